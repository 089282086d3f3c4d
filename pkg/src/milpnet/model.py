"""Formulation-agnostic MIP container: variables, constraints, objective, metadata.

The container is single-writer during construction and treated as immutable
once handed to a solver. Variable metadata maps ids back to (layer, neuron,
role) so exported models stay debuggable and downstream passes can locate
encoding variables without string parsing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

CONTINUOUS = "continuous"
BINARY = "binary"
INTEGER = "integer"

SENSES = ("<=", "=", ">=")

ROLE_UNIT_OUTPUT = "unit_output"
ROLE_COMPLEMENT = "complement"
ROLE_INDICATOR = "indicator"
ROLE_DISJUNCT_A = "disjunct_a"
ROLE_DISJUNCT_B = "disjunct_b"
ROLE_POOL_INDICATOR = "pool_indicator"
ROLE_DISTANCE = "distance"
ROLE_TRAINING_WEIGHT = "training_weight"
ROLE_TRAINING_PRODUCT = "training_product"


@dataclass(frozen=True)
class VarRole:
    """Where a variable came from: layer, neuron, and its job in the encoding."""

    layer: int | None = None
    neuron: int | None = None
    role: str | None = None
    sample: int | None = None
    part: int | None = None
    row: int | None = None
    col: int | None = None


@dataclass
class Variable:
    id: int
    name: str
    kind: str
    lb: float
    ub: float


@dataclass
class Constraint:
    id: int
    name: str
    terms: list  # list of (var_id, coefficient), coalesced
    sense: str
    rhs: float


@dataclass
class Objective:
    sense: str = "min"  # "min" or "max"
    terms: list = field(default_factory=list)
    constant: float = 0.0


@dataclass
class SolveResult:
    """Outcome of one LP or MIP solve.

    ``incumbent`` maps variable id to value. ``gap`` uses
    |objective - bound| / max(1e-10, |objective|).
    """

    status: str  # optimal | feasible | infeasible | unbounded | limit_no_incumbent
    objective: float | None = None
    best_bound: float | None = None
    gap: float | None = None
    incumbent: dict | None = None
    nodes: int = 0
    cuts: int = 0
    time_s: float = 0.0
    warnings: list = field(default_factory=list)


class MipModel:
    """Mutable-by-builders model of a linear-objective mixed-integer program."""

    def __init__(self, name: str = "MODEL"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective = Objective()
        self.meta: dict[int, VarRole] = {}
        self._names: dict[str, int] = {}

    # -- builders ---------------------------------------------------------

    def add_variable(self, name=None, kind=CONTINUOUS, lb=0.0, ub=math.inf, meta=None) -> int:
        vid = len(self.variables)
        if name is None:
            name = "v%d" % vid
        if name in self._names:
            raise ValueError("duplicate variable name %r" % name)
        if kind not in (CONTINUOUS, BINARY, INTEGER):
            raise ValueError("unknown variable kind %r" % kind)
        lb = float(lb)
        ub = float(ub)
        if kind == BINARY and ub == math.inf:
            ub = 1.0
        if lb > ub:
            raise ValueError("variable %r has inverted bounds [%r, %r]" % (name, lb, ub))
        if kind == BINARY:
            if lb < 0.0 or ub > 1.0:
                raise ValueError("binary variable %r must stay within [0, 1]" % name)
        if kind == INTEGER:
            if not (math.isfinite(lb) and math.isfinite(ub)):
                raise ValueError("integer variable %r needs finite bounds" % name)
            if lb != round(lb) or ub != round(ub):
                raise ValueError("integer variable %r needs integral bounds" % name)
        self.variables.append(Variable(id=vid, name=name, kind=kind, lb=lb, ub=ub))
        self._names[name] = vid
        if meta is not None:
            self.meta[vid] = meta
        return vid

    def _coalesce(self, terms):
        acc: dict[int, float] = {}
        for vid, coef in terms:
            vid = int(vid)
            if vid < 0 or vid >= len(self.variables):
                raise ValueError("unknown variable id %d" % vid)
            acc[vid] = acc.get(vid, 0.0) + float(coef)
        return [(vid, coef) for vid, coef in acc.items()]

    def add_constraint(self, terms, sense, rhs, name=None) -> int:
        if sense not in SENSES:
            raise ValueError("unknown constraint sense %r" % sense)
        cid = len(self.constraints)
        if name is None:
            name = "C%d" % (cid + 1)
        if any(c.name == name for c in self.constraints):
            raise ValueError("duplicate constraint name %r" % name)
        self.constraints.append(
            Constraint(id=cid, name=name, terms=self._coalesce(terms), sense=sense, rhs=float(rhs))
        )
        return cid

    def set_objective(self, sense, terms, constant=0.0) -> None:
        if sense not in ("min", "max"):
            raise ValueError("objective sense must be 'min' or 'max'")
        self.objective = Objective(sense=sense, terms=self._coalesce(terms), constant=float(constant))

    # -- lookups ----------------------------------------------------------

    def var_by_name(self, name: str) -> Variable:
        try:
            return self.variables[self._names[name]]
        except KeyError:
            raise KeyError("no variable named %r" % name)

    def vars_with_role(self, role=None, layer=None, sample=None):
        """Variables whose metadata matches all given filters, ordered by id."""
        out = []
        for vid in sorted(self.meta):
            tag = self.meta[vid]
            if role is not None and tag.role != role:
                continue
            if layer is not None and tag.layer != layer:
                continue
            if sample is not None and tag.sample != sample:
                continue
            out.append(self.variables[vid])
        return out

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def integer_ids(self):
        return [v.id for v in self.variables if v.kind in (BINARY, INTEGER)]

    # -- evaluation -------------------------------------------------------

    def values_array(self, assignment) -> np.ndarray:
        """Dense value vector from a dict keyed by id or an array."""
        if isinstance(assignment, dict):
            values = np.zeros(len(self.variables))
            for vid, val in assignment.items():
                values[vid] = val
            return values
        return np.asarray(assignment, dtype=np.float64)

    def check_assignment(self, assignment, tol=1e-7) -> list:
        """Constraint and bound violations above tol, as human-readable strings."""
        values = self.values_array(assignment)
        bad = []
        for var in self.variables:
            v = values[var.id]
            if v < var.lb - tol or v > var.ub + tol:
                bad.append("variable %s=%r outside [%r, %r]" % (var.name, v, var.lb, var.ub))
        for con in self.constraints:
            lhs = sum(values[vid] * coef for vid, coef in con.terms)
            if con.sense == "<=" and lhs > con.rhs + tol:
                bad.append("constraint %s: %r > %r" % (con.name, lhs, con.rhs))
            elif con.sense == ">=" and lhs < con.rhs - tol:
                bad.append("constraint %s: %r < %r" % (con.name, lhs, con.rhs))
            elif con.sense == "=" and abs(lhs - con.rhs) > tol:
                bad.append("constraint %s: %r != %r" % (con.name, lhs, con.rhs))
        return bad

    def objective_value(self, assignment) -> float:
        values = self.values_array(assignment)
        return float(
            sum(values[vid] * coef for vid, coef in self.objective.terms) + self.objective.constant
        )


# -- solve-result documents -------------------------------------------------


def solve_result_to_doc(result: SolveResult, model: MipModel | None = None, include_time=False, label=None) -> dict:
    """Canonical text-document form of a result.

    Wall time is the one nondeterministic field, so it is written as null
    unless ``include_time`` is set; everything else is reproducible byte for
    byte for a fixed model, params, and seed.
    """
    incumbent = None
    if result.incumbent is not None:
        if model is not None:
            incumbent = {
                model.variables[vid].name: result.incumbent[vid]
                for vid in sorted(result.incumbent)
            }
        else:
            incumbent = {str(vid): result.incumbent[vid] for vid in sorted(result.incumbent)}
    doc = {
        "status": result.status,
        "objective": result.objective,
        "best_bound": result.best_bound,
        "gap": result.gap,
        "nodes": result.nodes,
        "cuts": result.cuts,
        "time_s": result.time_s if include_time else None,
        "incumbent": incumbent,
    }
    if label is not None:
        doc["label"] = label
    return doc


def write_solve_result(result: SolveResult, path, model=None, include_time=False, label=None) -> None:
    with open(path, "w") as fh:
        json.dump(solve_result_to_doc(result, model, include_time, label), fh, indent=2)
        fh.write("\n")
