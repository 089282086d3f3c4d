"""LP solving, branch and bound with optional cut separation, and the
brute-force activation-pattern oracle.

One solve is single threaded and fully deterministic: best-bound node
selection with newest-node tie breaking, most-fractional branching with
smallest-id tie breaking, and a global cut pool with support-based
deduplication.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from .model import MipModel, SolveResult
from .network import AvgPoolLayer, DenseLayer, MaxPoolLayer, Network
from .simplex import simplex_solve, standard_form

INF = math.inf


class PatternBudgetError(RuntimeError):
    """The activation-pattern enumeration would exceed its budget."""


@dataclass
class SolverParams:
    """Knobs for solve_lp / solve_mip. The seed is reserved; every algorithm
    here is deterministic, so it only tags runs."""

    time_limit: float | None = None
    gap_tol: float = 1e-6
    int_tol: float = 1e-6
    feas_tol: float = 1e-7
    node_limit: int | None = None
    cut_rounds: int = 10
    max_cuts_per_round: int = 50
    node_cut_depth: int = 2
    branching: str = "most_fractional"
    node_selection: str = "best_bound"
    node_memory_cap: int = 50000
    seed: int = 0

    def __post_init__(self):
        for name in ("gap_tol", "int_tol", "feas_tol"):
            if getattr(self, name) <= 0:
                raise ValueError("%s must be positive" % name)
        for name in ("time_limit", "node_limit"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValueError("%s must be nonnegative" % name)
        if self.branching != "most_fractional":
            raise ValueError("unknown branching rule %r" % self.branching)
        if self.node_selection not in ("best_bound", "depth_first"):
            raise ValueError("unknown node selection %r" % self.node_selection)


def _gap(objective, bound):
    if objective is None or bound is None:
        return None
    return abs(objective - bound) / max(1e-10, abs(objective))


def _user_value(value, maximize):
    if value is None:
        return None
    return -value if maximize else value


def solve_lp(model: MipModel, params: SolverParams | None = None) -> SolveResult:
    """Solve the LP relaxation (integrality dropped) by primal simplex."""
    params = params or SolverParams()
    start = time.perf_counter()
    sf = standard_form(model)
    sol = simplex_solve(sf, feas_tol=params.feas_tol)
    elapsed = time.perf_counter() - start
    if sol.status == "optimal":
        obj = _user_value(sol.obj, sf.maximize)
        return SolveResult(
            status="optimal",
            objective=obj,
            best_bound=obj,
            gap=0.0,
            incumbent={i: float(v) for i, v in enumerate(sol.x)},
            nodes=0,
            cuts=0,
            time_s=elapsed,
        )
    if sol.status in ("infeasible", "unbounded"):
        return SolveResult(status=sol.status, time_s=elapsed)
    return SolveResult(
        status="limit_no_incumbent",
        time_s=elapsed,
        warnings=["simplex breakdown: %s" % sol.message],
    )


@dataclass
class _Node:
    uid: int
    parent: "_Node | None"
    var: int | None
    lo: float
    hi: float
    bound: float
    depth: int


def _node_bounds(node: _Node, root_lb, root_ub):
    lb = root_lb.copy()
    ub = root_ub.copy()
    walk = node
    while walk is not None and walk.var is not None:
        lb[walk.var] = max(lb[walk.var], walk.lo)
        ub[walk.var] = min(ub[walk.var], walk.hi)
        walk = walk.parent
    return lb, ub


class _CutPool:
    """Global pool of <= rows with support-and-coefficient deduplication."""

    def __init__(self, n):
        self.n = n
        self.rows = []
        self.rhs = []
        self._by_support = {}

    def add(self, terms, rhs):
        row = np.zeros(self.n)
        for vid, coef in terms:
            row[vid] += coef
        support = tuple(np.nonzero(np.abs(row) > 0)[0].tolist())
        for other, other_rhs in self._by_support.get(support, []):
            same = abs(other_rhs - rhs) <= 1e-12
            if same and support:
                same = np.abs(other[list(support)] - row[list(support)]).max() <= 1e-12
            if same:
                return False
        self._by_support.setdefault(support, []).append((row, rhs))
        self.rows.append(row)
        self.rhs.append(float(rhs))
        return True

    def extra_rows(self):
        if not self.rows:
            return None
        return np.array(self.rows), np.full(len(self.rows), -1, dtype=np.int8), np.array(self.rhs)

    def __len__(self):
        return len(self.rows)


def solve_mip(model: MipModel, params: SolverParams | None = None, separator=None) -> SolveResult:
    """Branch and bound over the LP relaxation.

    ``separator``, when given, maps a fractional point (dense value array) to
    a list of (terms, rhs) rows of <= cuts valid for every integer point; it
    runs for ``params.cut_rounds`` rounds at the root and one round per node
    of depth at most ``params.node_cut_depth``. Cuts land in a global pool
    shared by all nodes. Results are independent of wall time unless a limit
    actually triggers.
    """
    params = params or SolverParams()
    start = time.perf_counter()
    sf = standard_form(model)
    int_ids = sf.int_ids
    warnings: list[str] = []
    pool = _CutPool(sf.A.shape[1])

    root_lb = sf.lb.copy()
    root_ub = sf.ub.copy()
    if int_ids.size and not (
        np.isfinite(root_lb[int_ids]).all() and np.isfinite(root_ub[int_ids]).all()
    ):
        raise ValueError("every integer variable needs finite bounds")

    def node_lp(lb, ub):
        return simplex_solve(sf, lb=lb, ub=ub, extra_rows=pool.extra_rows(), feas_tol=params.feas_tol)

    def out_of_limits(nodes_done):
        if params.time_limit is not None and time.perf_counter() - start > params.time_limit:
            return True
        return params.node_limit is not None and nodes_done >= params.node_limit

    state = {"best": INF, "incumbent": None, "exact": True, "nodes": 0}

    def frac_mask(x):
        if not int_ids.size:
            return np.zeros(0, dtype=bool)
        f = x[int_ids] - np.floor(x[int_ids])
        return np.minimum(f, 1.0 - f) > params.int_tol

    def register_incumbent(x, lb, ub):
        """Fix integers to their rounded values and re-solve the continuous
        completion, so incumbents satisfy constraints to LP accuracy."""
        if not int_ids.size:
            if x is not None:
                obj = float(sf.c @ x + sf.const)
                if obj < state["best"] - 1e-12:
                    state["best"] = obj
                    state["incumbent"] = {i: float(v) for i, v in enumerate(x)}
            return
        fixed_lb = lb.copy()
        fixed_ub = ub.copy()
        rounded = np.round(x[int_ids])
        fixed_lb[int_ids] = rounded
        fixed_ub[int_ids] = rounded
        sol = simplex_solve(sf, lb=fixed_lb, ub=fixed_ub, extra_rows=pool.extra_rows(), feas_tol=params.feas_tol)
        if sol.status != "optimal":
            return
        if sol.obj < state["best"] - 1e-12:
            values = sol.x.copy()
            values[int_ids] = rounded
            state["best"] = sol.obj
            state["incumbent"] = {i: float(v) for i, v in enumerate(values)}

    def run_cut_rounds(point, lb, ub, rounds):
        """Returns the last LP solution, or None when no cut was added."""
        sol = None
        for _ in range(rounds):
            cuts = separator(point)
            added = 0
            for terms, rhs in cuts:
                if added >= params.max_cuts_per_round:
                    break
                if pool.add(terms, rhs):
                    added += 1
            if not added:
                break
            sol = node_lp(lb, ub)
            if sol.status != "optimal":
                return sol
            point = sol.x
        return sol

    def finish(status, bound):
        best = state["best"] if state["incumbent"] is not None else None
        obj = _user_value(best, sf.maximize)
        bnd = _user_value(bound, sf.maximize)
        return SolveResult(
            status=status,
            objective=obj,
            best_bound=bnd,
            gap=_gap(obj, bnd),
            incumbent=state["incumbent"],
            nodes=state["nodes"],
            cuts=len(pool),
            time_s=time.perf_counter() - start,
            warnings=warnings,
        )

    sol = node_lp(root_lb, root_ub)
    state["nodes"] += 1
    if sol.status == "infeasible":
        return finish("infeasible", None)
    if sol.status == "unbounded":
        return finish("unbounded", None)
    if sol.status == "breakdown":
        warnings.append("root LP breakdown: %s" % sol.message)
        return finish("limit_no_incumbent", None)

    if separator is not None:
        better = run_cut_rounds(sol.x, root_lb, root_ub, params.cut_rounds)
        if better is not None:
            if better.status != "optimal":
                warnings.append("root re-solve after cuts: %s" % better.status)
                return finish("limit_no_incumbent", None)
            sol = better

    uid_counter = itertools.count(1)
    heap = []   # (bound, -uid, node): best bound first, newest node on ties
    stack = []  # parallel LIFO used beyond the node-memory cap
    done = set()
    open_count = 0

    def push(node):
        nonlocal open_count
        heapq.heappush(heap, (node.bound, -node.uid, node))
        stack.append(node)
        open_count += 1

    def pop():
        nonlocal open_count
        deep = params.node_selection == "depth_first" or open_count > params.node_memory_cap
        source = stack if deep else None
        if source is not None:
            while source:
                node = source.pop()
                if node.uid not in done:
                    done.add(node.uid)
                    open_count -= 1
                    return node
            return None
        while heap:
            _, _, node = heapq.heappop(heap)
            if node.uid not in done:
                done.add(node.uid)
                open_count -= 1
                return node
        return None

    def open_bound():
        while heap and heap[0][2].uid in done:
            heapq.heappop(heap)
        return heap[0][0] if heap else INF

    def branch(parent, x, parent_obj):
        mask = frac_mask(x)
        f = x[int_ids] - np.floor(x[int_ids])
        dist = np.where(mask, np.abs(np.minimum(f, 1.0 - f) - 0.5), INF)
        pick = int(np.argmin(dist))
        var = int(int_ids[pick])
        value = x[var]
        down = _Node(next(uid_counter), parent, var, -INF, math.floor(value), parent_obj, parent.depth + 1)
        up = _Node(next(uid_counter), parent, var, math.ceil(value), INF, parent_obj, parent.depth + 1)
        push(down)
        push(up)

    root = _Node(0, None, None, 0.0, 0.0, sol.obj, 0)
    if not frac_mask(sol.x).any():
        register_incumbent(sol.x, root_lb, root_ub)
        return finish("optimal", state["best"])
    branch(root, sol.x, sol.obj)

    status = "optimal"
    bound = sol.obj
    while True:
        bound = open_bound()
        best = state["best"]
        if state["incumbent"] is not None:
            if bound >= best - 1e-12:
                status = "optimal" if state["exact"] else "feasible"
                bound = best if state["exact"] else min(bound, best)
                break
            if _gap(best, bound) <= params.gap_tol:
                status = "optimal" if state["exact"] else "feasible"
                bound = min(bound, best)
                break
        node = pop()
        if node is None:
            if state["incumbent"] is not None:
                status = "optimal" if state["exact"] else "feasible"
                bound = state["best"] if state["exact"] else bound
            elif state["exact"]:
                status = "infeasible"
                bound = None
            else:
                status = "limit_no_incumbent"
                bound = None
            break
        if node.bound >= state["best"] - 1e-12:
            continue
        if out_of_limits(state["nodes"]):
            status = "feasible" if state["incumbent"] is not None else "limit_no_incumbent"
            bound = min(bound, node.bound)
            break

        lb, ub = _node_bounds(node, root_lb, root_ub)
        sol = node_lp(lb, ub)
        state["nodes"] += 1
        if sol.status == "infeasible":
            continue
        if sol.status in ("unbounded", "breakdown"):
            warnings.append("node %d LP %s; pruned" % (node.uid, sol.status))
            state["exact"] = False
            continue
        if sol.obj >= state["best"] - 1e-12:
            continue
        if separator is not None and node.depth <= params.node_cut_depth:
            better = run_cut_rounds(sol.x, lb, ub, 1)
            if better is not None:
                if better.status != "optimal":
                    warnings.append("node %d re-solve after cuts: %s" % (node.uid, better.status))
                    state["exact"] = False
                    continue
                sol = better
                if sol.obj >= state["best"] - 1e-12:
                    continue
        if not frac_mask(sol.x).any():
            register_incumbent(sol.x, lb, ub)
            continue
        branch(node, sol.x, sol.obj)

    return finish(status, bound)


# -- activation-pattern oracle ------------------------------------------------


def _interval_pre_bounds(net: Network):
    """Plain interval propagation, kept local so the oracle stands alone."""
    lo = net.input_lo.copy()
    hi = net.input_hi.copy()
    pre = []
    for layer in net.layers:
        if isinstance(layer, DenseLayer):
            w_pos = np.maximum(layer.weights, 0.0)
            w_neg = np.minimum(layer.weights, 0.0)
            y_lo = lo @ w_pos + hi @ w_neg + layer.bias
            y_hi = hi @ w_pos + lo @ w_neg + layer.bias
            pre.append((y_lo, y_hi))
            if layer.activation == "relu":
                lo, hi = np.maximum(y_lo, 0.0), np.maximum(y_hi, 0.0)
            elif layer.activation == "linear":
                lo, hi = y_lo, y_hi
            else:
                raise ValueError("oracle supports relu/linear networks only")
        elif isinstance(layer, MaxPoolLayer):
            pre.append(None)
            lo = np.array([np.max(lo[list(p)]) for p in layer.pools])
            hi = np.array([np.max(hi[list(p)]) for p in layer.pools])
        else:
            pre.append(None)
            lo = np.array([np.mean(lo[list(p)]) for p in layer.pools])
            hi = np.array([np.mean(hi[list(p)]) for p in layer.pools])
    return pre


@dataclass
class OracleResult:
    status: str  # optimal | infeasible | unbounded
    value: float | None
    x0: np.ndarray | None
    patterns: int
    feasible_patterns: int


def pattern_oracle(
    net: Network,
    sense: str = "min",
    input_terms=(),
    output_terms=(),
    l1_reference=None,
    constraints=(),
    max_patterns: int = 1 << 20,
    feas_tol: float = 1e-7,
) -> OracleResult:
    """Ground-truth optimum by enumerating every ReLU regime and pool choice.

    The objective is ``sum(input_terms) + sum(output_terms)`` plus, when
    ``l1_reference`` is given (minimization only), the L1 distance of the
    input to that reference. ``constraints`` is a list of (input_terms,
    output_terms, sense, rhs) linear side constraints. Each pattern pins
    every nonlinearity to one affine regime and contributes one LP; the sign
    constraints make the pattern polytopes cover the whole network graph, so
    the best value over patterns is exact. Stable units found by interval
    arithmetic keep their only feasible regime instead of doubling the count.
    """
    if sense not in ("min", "max"):
        raise ValueError("sense must be 'min' or 'max'")
    if l1_reference is not None and sense != "min":
        raise ValueError("the L1 distance objective only supports minimization")
    pre_bounds = _interval_pre_bounds(net)

    model = MipModel(name="oracle")
    input_ids = [
        model.add_variable(name="in%d" % i, lb=net.input_lo[i], ub=net.input_hi[i])
        for i in range(net.input_dim)
    ]
    prev = input_ids
    toggles = []  # (kind, payload) per nonlinearity, in (layer, neuron) order
    for l, layer in enumerate(net.layers, start=1):
        cur = []
        if isinstance(layer, DenseLayer):
            y_lo, y_hi = pre_bounds[l - 1]
            for i in range(layer.n_out):
                if layer.activation == "linear":
                    x = model.add_variable(name="x_%d_%d" % (l, i), lb=-INF, ub=INF)
                    terms = [(x, 1.0)] + [
                        (prev[j], -layer.weights[j, i]) for j in range(layer.n_in)
                    ]
                    model.add_constraint(terms, "=", layer.bias[i])
                    cur.append(x)
                    continue
                y = model.add_variable(name="y_%d_%d" % (l, i), lb=-INF, ub=INF)
                g = model.add_variable(name="g_%d_%d" % (l, i), lb=0.0, ub=INF)
                x = model.add_variable(name="x_%d_%d" % (l, i), lb=0.0, ub=INF)
                model.add_constraint(
                    [(y, 1.0)] + [(prev[j], -layer.weights[j, i]) for j in range(layer.n_in)],
                    "=",
                    layer.bias[i],
                )
                model.add_constraint([(x, 1.0), (y, -1.0), (g, -1.0)], "=", 0.0)
                cur.append(x)
                if y_hi[i] <= 0.0:
                    toggles.append(("fixed_off", (y, g, x)))
                elif y_lo[i] >= 0.0:
                    toggles.append(("fixed_on", (y, g, x)))
                else:
                    toggles.append(("relu", (y, g, x)))
        elif isinstance(layer, MaxPoolLayer):
            for i, pool in enumerate(layer.pools):
                if len(pool) > 3:
                    raise PatternBudgetError("pool wider than 3 is outside the oracle budget")
                x = model.add_variable(name="x_%d_%d" % (l, i), lb=-INF, ub=INF)
                slacks = []
                for k, j in enumerate(pool):
                    h = model.add_variable(name="h_%d_%d_%d" % (l, i, k), lb=0.0, ub=INF)
                    model.add_constraint([(x, 1.0), (prev[j], -1.0), (h, -1.0)], "=", 0.0)
                    slacks.append(h)
                cur.append(x)
                toggles.append(("pool", slacks))
        else:
            for i, pool in enumerate(layer.pools):
                x = model.add_variable(name="x_%d_%d" % (l, i), lb=-INF, ub=INF)
                terms = [(x, 1.0)] + [(prev[j], -1.0 / len(pool)) for j in pool]
                model.add_constraint(terms, "=", 0.0)
                cur.append(x)
        prev = cur

    output_ids = prev
    objective = [(input_ids[i], coef) for i, coef in input_terms]
    objective += [(output_ids[i], coef) for i, coef in output_terms]
    if l1_reference is not None:
        ref = np.asarray(l1_reference, dtype=np.float64)
        for i in range(net.input_dim):
            d = model.add_variable(name="d%d" % i, lb=0.0, ub=INF)
            model.add_constraint([(input_ids[i], 1.0), (d, -1.0)], "<=", ref[i])
            model.add_constraint([(input_ids[i], 1.0), (d, 1.0)], ">=", ref[i])
            objective.append((d, 1.0))
    for in_terms, out_terms, con_sense, rhs in constraints:
        terms = [(input_ids[i], coef) for i, coef in in_terms]
        terms += [(output_ids[i], coef) for i, coef in out_terms]
        model.add_constraint(terms, con_sense, rhs)
    model.set_objective(sense, objective)

    sf = standard_form(model)
    base_lb = sf.lb.copy()
    base_ub = sf.ub.copy()

    choices = [
        2 if kind == "relu" else (len(payload) if kind == "pool" else 1)
        for kind, payload in toggles
    ]
    total = 1
    for count in choices:
        total *= count
    if total > max_patterns:
        raise PatternBudgetError("%d patterns exceed the budget of %d" % (total, max_patterns))
    unstable = sum(1 for kind, _ in toggles if kind == "relu")
    if unstable > 20:
        raise PatternBudgetError("%d unstable units exceed the 20-unit budget" % unstable)

    best = None
    best_x = None
    feasible = 0
    for combo in itertools.product(*(range(count) for count in choices)):
        lb = base_lb.copy()
        ub = base_ub.copy()
        for (kind, payload), pick in zip(toggles, combo):
            if kind == "pool":
                ub[payload[pick]] = 0.0
                continue
            y, g, x = payload
            active = kind == "fixed_on" or (kind == "relu" and pick == 0)
            if active:
                lb[y] = 0.0
                ub[g] = 0.0
            else:
                ub[y] = 0.0
                ub[x] = 0.0
        sol = simplex_solve(sf, lb=lb, ub=ub, feas_tol=feas_tol)
        if sol.status == "unbounded":
            return OracleResult("unbounded", None, None, total, feasible)
        if sol.status != "optimal":
            continue
        feasible += 1
        if best is None or sol.obj < best - 1e-12:
            best = sol.obj
            best_x = sol.x[: net.input_dim].copy()
    if best is None:
        return OracleResult("infeasible", None, None, total, 0)
    value = -best if sense == "max" else best
    return OracleResult("optimal", float(value), best_x, total, feasible)
