"""Per-neuron pre/post-activation bounds and stability classification.

Four procedures fill the same BoundSet shape: two flavors of interval
arithmetic (differing in written form and in their big-M rule), LP-based
tightening over a big-M relaxation of the preceding layers, and the
positive-part propagation used by the lifted (complement-variable) encoding.
"""

from __future__ import annotations

import copy
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .model import BINARY, CONTINUOUS, MipModel
from .simplex import simplex_solve, standard_form
from .network import AvgPoolLayer, DenseLayer, MaxPoolLayer, Network

log = logging.getLogger(__name__)

STABLY_ACTIVE = "active"
STABLY_INACTIVE = "inactive"
UNSTABLE = "unstable"

M_RULE_MAXNEG = "maxneg"  # M = max(-L, U)
M_RULE_UPPER = "upper"    # M = U for unstable units, 0 for stable ones


@dataclass
class LayerBounds:
    """Bounds for one layer; pre/big_m/stability stay None for pools."""

    pre_lo: np.ndarray | None
    pre_hi: np.ndarray | None
    post_lo: np.ndarray
    post_hi: np.ndarray
    big_m: np.ndarray | None = None
    m_plus: np.ndarray | None = None
    m_minus: np.ndarray | None = None
    stability: list | None = None


@dataclass
class BoundSet:
    method: str
    m_rule: str
    input_lo: np.ndarray
    input_hi: np.ndarray
    layers: list = field(default_factory=list)
    input_m_plus: np.ndarray | None = None
    input_m_minus: np.ndarray | None = None

    def post(self, layer_index: int):
        """Post-activation interval of layer ``layer_index`` (0 = inputs)."""
        if layer_index == 0:
            return self.input_lo, self.input_hi
        rec = self.layers[layer_index - 1]
        return rec.post_lo, rec.post_hi


def _stability_tags(pre_lo, pre_hi):
    # A [0, 0] interval satisfies both rules; inactive wins since the unit
    # output is identically zero either way.
    tags = []
    for lo, hi in zip(pre_lo, pre_hi):
        if hi <= 0.0:
            tags.append(STABLY_INACTIVE)
        elif lo >= 0.0:
            tags.append(STABLY_ACTIVE)
        else:
            tags.append(UNSTABLE)
    return tags


def _finish_dense_record(layer, pre_lo, pre_hi, m_rule):
    if layer.activation == "relu":
        post_lo = np.maximum(pre_lo, 0.0)
        post_hi = np.maximum(pre_hi, 0.0)
        tags = _stability_tags(pre_lo, pre_hi)
        if m_rule == M_RULE_MAXNEG:
            big_m = np.maximum(-pre_lo, pre_hi)
        else:
            big_m = np.where(
                [t == UNSTABLE for t in tags], post_hi, 0.0
            )
        return LayerBounds(
            pre_lo=pre_lo,
            pre_hi=pre_hi,
            post_lo=post_lo,
            post_hi=post_hi,
            big_m=big_m,
            m_plus=np.maximum(pre_hi, 0.0),
            m_minus=np.maximum(-pre_lo, 0.0),
            stability=tags,
        )
    if layer.activation == "linear":
        return LayerBounds(
            pre_lo=pre_lo,
            pre_hi=pre_hi,
            post_lo=pre_lo.copy(),
            post_hi=pre_hi.copy(),
            m_plus=np.maximum(pre_hi, 0.0),
            m_minus=np.maximum(-pre_lo, 0.0),
        )
    raise ValueError("bounds are defined for relu/linear dense layers only")


def _pool_record(layer, prev_lo, prev_hi):
    if isinstance(layer, MaxPoolLayer):
        lo = np.array([np.max(prev_lo[list(p)]) for p in layer.pools])
        hi = np.array([np.max(prev_hi[list(p)]) for p in layer.pools])
    else:
        lo = np.array([np.mean(prev_lo[list(p)]) for p in layer.pools])
        hi = np.array([np.mean(prev_hi[list(p)]) for p in layer.pools])
    return LayerBounds(
        pre_lo=None,
        pre_hi=None,
        post_lo=lo,
        post_hi=hi,
        m_plus=np.maximum(hi, 0.0),
        m_minus=np.maximum(-lo, 0.0),
    )


def bounds_interval_bunel(net: Network) -> BoundSet:
    """Interval propagation via the positive/negative weight split.

    The first dense layer sees the raw input box; deeper layers see the
    clamped outputs of the previous activation, which is where the positive
    parts in the update rule come from.
    """
    out = BoundSet(
        method="bunel", m_rule=M_RULE_MAXNEG, input_lo=net.input_lo.copy(), input_hi=net.input_hi.copy()
    )
    prev_lo, prev_hi = out.input_lo, out.input_hi
    for layer in net.layers:
        if isinstance(layer, DenseLayer):
            w_pos = np.maximum(layer.weights, 0.0)
            w_neg = np.minimum(layer.weights, 0.0)
            pre_lo = prev_lo @ w_pos + prev_hi @ w_neg + layer.bias
            pre_hi = prev_hi @ w_pos + prev_lo @ w_neg + layer.bias
            rec = _finish_dense_record(layer, pre_lo, pre_hi, M_RULE_MAXNEG)
        else:
            rec = _pool_record(layer, prev_lo, prev_hi)
        out.layers.append(rec)
        prev_lo, prev_hi = rec.post_lo, rec.post_hi
    return out


def bounds_interval_cheng(net: Network) -> BoundSet:
    """Interval propagation via per-term min/max over the two box corners.

    Stable units are flagged so encoders drop their gating constraints;
    consequently their big-M entries stay zero and must not be used.
    """
    out = BoundSet(
        method="cheng", m_rule=M_RULE_UPPER, input_lo=net.input_lo.copy(), input_hi=net.input_hi.copy()
    )
    prev_lo, prev_hi = out.input_lo, out.input_hi
    for layer in net.layers:
        if isinstance(layer, DenseLayer):
            a = layer.weights * prev_lo[:, None]
            b = layer.weights * prev_hi[:, None]
            pre_lo = np.minimum(a, b).sum(axis=0) + layer.bias
            pre_hi = np.maximum(a, b).sum(axis=0) + layer.bias
            rec = _finish_dense_record(layer, pre_lo, pre_hi, M_RULE_UPPER)
        else:
            rec = _pool_record(layer, prev_lo, prev_hi)
        out.layers.append(rec)
        prev_lo, prev_hi = rec.post_lo, rec.post_hi
    return out


def bounds_extended_serra(net: Network) -> BoundSet:
    """Positive-part propagation of the two one-sided magnitudes used by the
    lifted encoding. Assumes a nonnegative input box (image-style data); the
    update rule only tracks the positive magnitude of the previous layer.
    """
    out = BoundSet(
        method="serra", m_rule=M_RULE_MAXNEG, input_lo=net.input_lo.copy(), input_hi=net.input_hi.copy()
    )
    out.input_m_plus = np.maximum(net.input_hi, 0.0)
    out.input_m_minus = np.maximum(-net.input_lo, 0.0)
    prev_plus = out.input_m_plus
    prev_minus = out.input_m_minus
    for layer in net.layers:
        if isinstance(layer, DenseLayer):
            scaled = layer.weights * prev_plus[:, None]
            m_plus = np.maximum(np.maximum(scaled, 0.0).sum(axis=0) + layer.bias, 0.0)
            m_minus = np.maximum(np.maximum(-scaled, 0.0).sum(axis=0) - layer.bias, 0.0)
            pre_lo = -m_minus
            pre_hi = m_plus
            rec = _finish_dense_record(layer, pre_lo, pre_hi, M_RULE_MAXNEG)
            rec.m_plus = m_plus
            rec.m_minus = m_minus
            rec.big_m = np.maximum(m_plus, m_minus)
        elif isinstance(layer, MaxPoolLayer):
            m_plus = np.array([np.max(prev_plus[list(p)]) for p in layer.pools])
            m_minus = np.array([np.min(prev_minus[list(p)]) for p in layer.pools])
            rec = LayerBounds(
                pre_lo=None, pre_hi=None, post_lo=-m_minus, post_hi=m_plus,
                m_plus=m_plus, m_minus=m_minus,
            )
        else:
            m_plus = np.array([np.mean(prev_plus[list(p)]) for p in layer.pools])
            m_minus = np.array([np.mean(prev_minus[list(p)]) for p in layer.pools])
            rec = LayerBounds(
                pre_lo=None, pre_hi=None, post_lo=-m_minus, post_hi=m_plus,
                m_plus=m_plus, m_minus=m_minus,
            )
        out.layers.append(rec)
        prev_plus = rec.m_plus
        prev_minus = rec.m_minus
    return out


def classify_stability(bounds: BoundSet) -> BoundSet:
    """Refresh stability tags from the pre-activation intervals. Idempotent."""
    for rec in bounds.layers:
        if rec.stability is not None:
            rec.stability = _stability_tags(rec.pre_lo, rec.pre_hi)
    return bounds


def build_bigm_prefix(net: Network, bounds: BoundSet, upto_layer: int):
    """Big-M model of layers 1..upto_layer with stable units simplified.

    Returns (model, per-layer output variable id lists with index 0 being
    the inputs). Binary indicators are declared binary; the LP path relaxes
    them. Used by the LP bound tightener and by LP partition bounds.
    """
    model = MipModel(name="prefix")
    lo, hi = bounds.post(0)
    layer_vars = [[
        model.add_variable(name="x_l0_n%d" % i, lb=lo[i], ub=hi[i])
        for i in range(net.input_dim)
    ]]
    for l in range(1, upto_layer + 1):
        layer = net.layers[l - 1]
        rec = bounds.layers[l - 1]
        prev = layer_vars[-1]
        cur = []
        if isinstance(layer, DenseLayer):
            for i in range(layer.n_out):
                w = layer.weights[:, i]
                b = layer.bias[i]
                wx = [(prev[j], -w[j]) for j in range(layer.n_in) if w[j] != 0.0]
                if layer.activation == "linear":
                    x = model.add_variable(
                        name="x_l%d_n%d" % (l, i), lb=rec.post_lo[i], ub=rec.post_hi[i]
                    )
                    model.add_constraint([(x, 1.0)] + wx, "=", b)
                elif rec.stability[i] == STABLY_INACTIVE:
                    x = model.add_variable(name="x_l%d_n%d" % (l, i), lb=0.0, ub=0.0)
                elif rec.stability[i] == STABLY_ACTIVE:
                    x = model.add_variable(
                        name="x_l%d_n%d" % (l, i), lb=rec.post_lo[i], ub=rec.post_hi[i]
                    )
                    model.add_constraint([(x, 1.0)] + wx, "=", b)
                else:
                    m_val = max(-rec.pre_lo[i], rec.pre_hi[i])
                    x = model.add_variable(
                        name="x_l%d_n%d" % (l, i), lb=0.0, ub=rec.post_hi[i]
                    )
                    z = model.add_variable(name="z_l%d_n%d" % (l, i), kind=BINARY)
                    model.add_constraint([(x, 1.0)] + wx, ">=", b)
                    model.add_constraint([(x, 1.0), (z, m_val)] + wx, "<=", b + m_val)
                    model.add_constraint([(x, 1.0), (z, -m_val)], "<=", 0.0)
                cur.append(x)
        elif isinstance(layer, MaxPoolLayer):
            prev_rec_lo, prev_rec_hi = bounds.post(l - 1)
            for i, pool in enumerate(layer.pools):
                u_max = max(prev_rec_hi[j] for j in pool)
                x = model.add_variable(
                    name="x_l%d_n%d" % (l, i), lb=rec.post_lo[i], ub=rec.post_hi[i]
                )
                deltas = []
                for k, j in enumerate(pool):
                    model.add_constraint([(x, 1.0), (prev[j], -1.0)], ">=", 0.0)
                    delta = model.add_variable(name="delta_l%d_n%d_p%d" % (l, i, k), kind=BINARY)
                    gap = u_max - prev_rec_lo[j]
                    model.add_constraint(
                        [(x, 1.0), (prev[j], -1.0), (delta, gap)], "<=", gap
                    )
                    deltas.append(delta)
                model.add_constraint([(d, 1.0) for d in deltas], "=", 1.0)
                cur.append(x)
        else:
            for i, pool in enumerate(layer.pools):
                x = model.add_variable(
                    name="x_l%d_n%d" % (l, i), lb=rec.post_lo[i], ub=rec.post_hi[i]
                )
                terms = [(x, 1.0)] + [(prev[j], -1.0 / len(pool)) for j in pool]
                model.add_constraint(terms, "=", 0.0)
                cur.append(x)
        layer_vars.append(cur)
    return model, layer_vars


def bounds_lp_tjeng(net: Network, seed: BoundSet, exact_mip: bool = False, feas_tol: float = 1e-7) -> BoundSet:
    """Tighten each dense unit's pre-activation interval by optimizing it
    over a relaxation of the preceding layers, then intersect with the seed.

    The relaxation is the big-M encoding built from the best bounds known so
    far; with ``exact_mip`` the per-unit subproblems keep integrality and are
    solved by branch and bound (exact but exponential; desk scale only).
    """
    out = copy.deepcopy(seed)
    out.method = "tjeng_mip" if exact_mip else "tjeng_lp"
    for l in range(1, len(net.layers) + 1):
        layer = net.layers[l - 1]
        rec = out.layers[l - 1]
        if not isinstance(layer, DenseLayer):
            prev_lo, prev_hi = out.post(l - 1)
            fresh = _pool_record(layer, prev_lo, prev_hi)
            rec.post_lo, rec.post_hi = fresh.post_lo, fresh.post_hi
            rec.m_plus, rec.m_minus = fresh.m_plus, fresh.m_minus
            continue
        model, layer_vars = build_bigm_prefix(net, out, l - 1)
        prev = layer_vars[-1]
        new_lo = rec.pre_lo.copy()
        new_hi = rec.pre_hi.copy()
        for i in range(layer.n_out):
            w = layer.weights[:, i]
            terms = [(prev[j], w[j]) for j in range(layer.n_in) if w[j] != 0.0]
            solved = {}
            failed = False
            for goal in ("max", "min"):
                model.set_objective(goal, terms, constant=float(layer.bias[i]))
                if exact_mip:
                    from .solver import solve_mip

                    res = solve_mip(model)
                    if res.status != "optimal":
                        failed = True
                        break
                    solved[goal] = res.objective
                else:
                    sf = standard_form(model)
                    sol = simplex_solve(sf, feas_tol=feas_tol)
                    if sol.status != "optimal":
                        failed = True
                        break
                    solved[goal] = -sol.obj if sf.maximize else sol.obj
            if failed:
                log.warning("LP bound solve failed for layer %d unit %d; keeping seed", l, i)
                continue
            lo = max(solved["min"], rec.pre_lo[i])
            hi = min(solved["max"], rec.pre_hi[i])
            if lo > hi:
                # Intersection can invert by roundoff only; collapse it.
                if lo - hi > 1e-6:
                    log.warning("bound crossing at layer %d unit %d (%r > %r)", l, i, lo, hi)
                lo = hi = 0.5 * (lo + hi)
            new_lo[i] = lo
            new_hi[i] = hi
        fresh = _finish_dense_record(layer, new_lo, new_hi, out.m_rule)
        out.layers[l - 1] = fresh
    return out


# -- serialization ------------------------------------------------------------


def _arr(values):
    return None if values is None else [float(v) for v in values]


def bound_set_to_doc(bounds: BoundSet) -> dict:
    layers = []
    for rec in bounds.layers:
        layers.append(
            {
                "pre": None
                if rec.pre_lo is None
                else [[float(a), float(b)] for a, b in zip(rec.pre_lo, rec.pre_hi)],
                "post": [[float(a), float(b)] for a, b in zip(rec.post_lo, rec.post_hi)],
                "big_m": _arr(rec.big_m),
                "m_plus": _arr(rec.m_plus),
                "m_minus": _arr(rec.m_minus),
                "stability": rec.stability,
            }
        )
    return {
        "method": bounds.method,
        "m_rule": bounds.m_rule,
        "input_box": [[float(a), float(b)] for a, b in zip(bounds.input_lo, bounds.input_hi)],
        "input_m_plus": _arr(bounds.input_m_plus),
        "input_m_minus": _arr(bounds.input_m_minus),
        "layers": layers,
    }


def bound_set_from_doc(doc: dict) -> BoundSet:
    box = np.asarray(doc["input_box"], dtype=np.float64)
    out = BoundSet(
        method=doc["method"],
        m_rule=doc["m_rule"],
        input_lo=box[:, 0].copy(),
        input_hi=box[:, 1].copy(),
        input_m_plus=None if doc.get("input_m_plus") is None else np.asarray(doc["input_m_plus"]),
        input_m_minus=None if doc.get("input_m_minus") is None else np.asarray(doc["input_m_minus"]),
    )
    for rec in doc["layers"]:
        pre = rec.get("pre")
        post = np.asarray(rec["post"], dtype=np.float64)
        out.layers.append(
            LayerBounds(
                pre_lo=None if pre is None else np.asarray(pre, dtype=np.float64)[:, 0],
                pre_hi=None if pre is None else np.asarray(pre, dtype=np.float64)[:, 1],
                post_lo=post[:, 0].copy(),
                post_hi=post[:, 1].copy(),
                big_m=None if rec.get("big_m") is None else np.asarray(rec["big_m"]),
                m_plus=None if rec.get("m_plus") is None else np.asarray(rec["m_plus"]),
                m_minus=None if rec.get("m_minus") is None else np.asarray(rec["m_minus"]),
                stability=rec.get("stability"),
            )
        )
    return out


def save_bound_set(bounds: BoundSet, path) -> None:
    with open(path, "w") as fh:
        json.dump(bound_set_to_doc(bounds), fh, indent=2)
        fh.write("\n")


def load_bound_set(path) -> BoundSet:
    with open(path) as fh:
        return bound_set_from_doc(json.load(fh))


def compute_bounds(net: Network, method: str, seed_method: str = "bunel", exact_mip: bool = False) -> BoundSet:
    """Dispatch by method name; the LP tightener seeds from ``seed_method``."""
    if method == "bunel":
        return bounds_interval_bunel(net)
    if method == "cheng":
        return bounds_interval_cheng(net)
    if method == "serra":
        return bounds_extended_serra(net)
    if method == "tjeng":
        seed = compute_bounds(net, seed_method)
        return bounds_lp_tjeng(net, seed, exact_mip=exact_mip)
    raise ValueError("unknown bound method %r" % method)
