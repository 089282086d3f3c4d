"""Minimum-L1 adversarial example construction on top of any encoding.

Given a reference input classified as some digit, the attack asks for the
closest input (in L1) whose logit for a chosen wrong class beats every other
logit by a fixed factor. The margin constraint compares raw logits; the
probability-normalizing output layer is monotone, so it never enters the
model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import ROLE_DISTANCE, ROLE_UNIT_OUTPUT, MipModel, VarRole
from .network import Network, forward


@dataclass(frozen=True)
class AttackSpec:
    """Reference input, its class, and the targeting rule.

    With ``target_digit`` unset the wrong class is derived as
    ``(true_digit + 5) mod 10``. The margin factor multiplies competing
    logits as written, so with negative logits the constraint loosens
    rather than tightens; callers pick reference points accordingly.
    """

    reference_input: np.ndarray
    true_digit: int
    target_digit: int | None = None
    margin: float = 1.2
    logits_layer: int | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "reference_input", np.asarray(self.reference_input, dtype=np.float64)
        )
        if self.margin <= 1.0:
            raise ValueError("margin factor must exceed 1")

    def resolved_target(self) -> int:
        target = self.target_digit
        if target is None:
            target = (self.true_digit + 5) % 10
        if target == self.true_digit:
            raise ValueError("target digit equals the true digit")
        return target


def build_attack(model: MipModel, net: Network, spec: AttackSpec) -> MipModel:
    """Add margin constraints, distance variables, and the L1 objective to an
    encoded network model (mutates and returns it)."""
    ref = spec.reference_input
    if ref.shape != (net.input_dim,):
        raise ValueError("reference input length does not match the network")
    if ((ref < net.input_lo - 1e-9) | (ref > net.input_hi + 1e-9)).any():
        raise ValueError("reference input lies outside the input box")
    logits_layer = spec.logits_layer if spec.logits_layer is not None else len(net.layers)
    logit_vars = model.vars_with_role(role=ROLE_UNIT_OUTPUT, layer=logits_layer)
    if len(logit_vars) < 2:
        raise ValueError("logits layer %d has fewer than 2 outputs" % logits_layer)
    target = spec.resolved_target()
    if target >= len(logit_vars) or spec.true_digit >= len(logit_vars):
        raise ValueError(
            "class %d is out of range for %d logits" % (max(target, spec.true_digit), len(logit_vars))
        )
    input_vars = model.vars_with_role(role=ROLE_UNIT_OUTPUT, layer=0)
    x_target = logit_vars[target]
    for j, var in enumerate(logit_vars):
        if j == target:
            continue
        model.add_constraint(
            [(x_target.id, 1.0), (var.id, -spec.margin)], ">=", 0.0,
            name="margin_c%d" % j,
        )
    distance_terms = []
    for j, var in enumerate(input_vars):
        d = model.add_variable(
            name="d_n%d" % j, lb=0.0,
            meta=VarRole(layer=0, neuron=j, role=ROLE_DISTANCE),
        )
        model.add_constraint(
            [(var.id, 1.0), (d, -1.0)], "<=", float(ref[j]), name="dist_ub_n%d" % j
        )
        model.add_constraint(
            [(var.id, 1.0), (d, 1.0)], ">=", float(ref[j]), name="dist_lb_n%d" % j
        )
        distance_terms.append((d, 1.0))
    model.set_objective("min", distance_terms)
    return model


@dataclass
class AttackReport:
    x0: np.ndarray
    logits: np.ndarray
    l1_distance: float
    target: int
    true_digit: int
    margin: float
    margin_ok: bool
    worst_slack: float
    predicted: int


def verify_attack(net: Network, spec: AttackSpec, x0_solution, tol: float = 1e-6) -> AttackReport:
    """Run the exact forward pass on a solution and check the margin rule.

    A failed margin check is a report outcome, not an error.
    """
    x0 = np.asarray(x0_solution, dtype=np.float64)
    acts = forward(net, x0)
    logits_layer = spec.logits_layer if spec.logits_layer is not None else len(net.layers)
    logits = acts.post[logits_layer - 1]
    target = spec.resolved_target()
    slacks = [
        logits[target] - spec.margin * logits[j] for j in range(len(logits)) if j != target
    ]
    worst = float(min(slacks))
    l1 = float(np.abs(x0 - spec.reference_input).sum())
    return AttackReport(
        x0=x0,
        logits=np.asarray(logits),
        l1_distance=l1,
        target=target,
        true_digit=spec.true_digit,
        margin=spec.margin,
        margin_ok=worst >= -tol,
        worst_slack=worst,
        predicted=int(np.argmax(logits)),
    )


def attack_report_to_doc(report: AttackReport) -> dict:
    return {
        "true_digit": report.true_digit,
        "target_digit": report.target,
        "margin": report.margin,
        "margin_ok": report.margin_ok,
        "worst_margin_slack": report.worst_slack,
        "l1_distance": report.l1_distance,
        "predicted": report.predicted,
        "logits": [float(v) for v in report.logits],
        "perturbed_input": [float(v) for v in report.x0],
    }


def attack_spec_to_doc(spec: AttackSpec) -> dict:
    return {
        "reference_input": [float(v) for v in spec.reference_input],
        "true_digit": spec.true_digit,
        "target_digit": spec.target_digit,
        "margin": spec.margin,
        "logits_layer": spec.logits_layer,
    }


def attack_spec_from_doc(doc: dict) -> AttackSpec:
    return AttackSpec(
        reference_input=np.asarray(doc["reference_input"], dtype=np.float64),
        true_digit=int(doc["true_digit"]),
        target_digit=None if doc.get("target_digit") is None else int(doc["target_digit"]),
        margin=float(doc.get("margin", 1.2)),
        logits_layer=None if doc.get("logits_layer") is None else int(doc["logits_layer"]),
    )


def load_attack_spec(path) -> AttackSpec:
    with open(path) as fh:
        return attack_spec_from_doc(json.load(fh))
