"""Emit ReLU, pooling, and stability-simplified encodings into a MipModel.

Four interchangeable unit formulations:

* ``bigm``: indicator-gated upper envelopes with one binary per unit.
* ``extended``: lifted split of the pre-activation into two nonnegative
  parts tied by a complementarity indicator, optionally strengthened by
  indicator valid inequalities on consecutive layers.
* ``disjunctive``: per-regime auxiliary variables with indicator-scaled
  bounds, optionally partitioned over groups of incoming terms.
* ``hullcuts``: the big-M base plus on-demand separation of the
  single-unit convex-hull inequality family inside branch and bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bounds import (
    M_RULE_UPPER,
    STABLY_ACTIVE,
    STABLY_INACTIVE,
    UNSTABLE,
    BoundSet,
    build_bigm_prefix,
)
from .model import (
    BINARY,
    ROLE_COMPLEMENT,
    ROLE_DISJUNCT_A,
    ROLE_DISJUNCT_B,
    ROLE_INDICATOR,
    ROLE_POOL_INDICATOR,
    ROLE_UNIT_OUTPUT,
    MipModel,
    VarRole,
)
from .network import AvgPoolLayer, DenseLayer, MaxPoolLayer, Network, forward
from .simplex import simplex_solve, standard_form

INF = math.inf

RELU_KINDS = ("bigm", "extended", "disjunctive", "hullcuts")
BOUND_METHODS = ("bunel", "cheng", "tjeng", "serra")


@dataclass(frozen=True)
class FormulationSpec:
    relu: str = "bigm"
    bound_method: str = "bunel"
    valid_inequalities: bool = False
    partitions: int = 1
    partition_bounds: str = "interval"  # or "lp"
    simplify_stable: bool = False
    cut_rounds: int = 10
    max_cuts_per_round: int = 50

    def __post_init__(self):
        if self.relu not in RELU_KINDS:
            raise ValueError("unknown relu formulation %r" % self.relu)
        if self.bound_method not in BOUND_METHODS:
            raise ValueError("unknown bound method %r" % self.bound_method)
        if self.bound_method == "serra" and self.relu != "extended":
            raise ValueError("the serra bound propagation pairs with the extended formulation only")
        if self.valid_inequalities and self.relu != "extended":
            raise ValueError("valid inequalities attach to the extended formulation")
        if self.partitions < 1:
            raise ValueError("partition count must be at least 1")
        if self.partition_bounds not in ("interval", "lp"):
            raise ValueError("partition_bounds must be 'interval' or 'lp'")


def partition_indices(n_in: int, k: int):
    """Equal-size contiguous index groups; the first groups take the rest."""
    if k > n_in:
        raise ValueError("%d partitions exceed the fan-in %d" % (k, n_in))
    return [part for part in np.array_split(np.arange(n_in), k)]


def _require_finite(value, what):
    if not math.isfinite(value):
        raise ValueError("%s must be finite, got %r" % (what, value))
    return float(value)


def _simplify_unit(spec: FormulationSpec, bounds: BoundSet, tag: str) -> bool:
    if tag == UNSTABLE:
        return False
    if spec.simplify_stable:
        return True
    # With the upper-bound big-M rule, stable units carry M = 0 and their
    # gated constraints are meaningless; the encoder must drop them.
    return bounds.m_rule == M_RULE_UPPER and spec.relu in ("bigm", "hullcuts")


def encode_network(net: Network, bounds: BoundSet, spec: FormulationSpec) -> MipModel:
    """Encode the whole network under ``spec``; bounds must come from the
    matching bound method. Variable metadata records (layer, neuron, role).
    """
    if bounds.method.split("_")[0] != spec.bound_method:
        raise ValueError(
            "bounds were computed by %r but the formulation asks for %r"
            % (bounds.method, spec.bound_method)
        )
    model = MipModel(name="net_%s" % spec.relu)
    layer_vars = [[
        model.add_variable(
            name="x_l0_n%d" % i,
            lb=net.input_lo[i],
            ub=net.input_hi[i],
            meta=VarRole(layer=0, neuron=i, role=ROLE_UNIT_OUTPUT),
        )
        for i in range(net.input_dim)
    ]]
    z_by_layer = [None]  # per layer: list of indicator ids (None per stable unit)

    for l, layer in enumerate(net.layers, start=1):
        rec = bounds.layers[l - 1]
        prev = layer_vars[-1]
        cur = []
        cur_z = None
        if isinstance(layer, DenseLayer):
            if layer.activation not in ("relu", "linear"):
                raise ValueError("layer %d: only relu/linear dense layers encode to MIP" % l)
            cur_z = [None] * layer.n_out
            for i in range(layer.n_out):
                w = layer.weights[:, i]
                b = float(layer.bias[i])
                if layer.n_in == 0:
                    value = max(0.0, b) if layer.activation == "relu" else b
                    cur.append(
                        model.add_variable(
                            name="x_l%d_n%d" % (l, i), lb=value, ub=value,
                            meta=VarRole(layer=l, neuron=i, role=ROLE_UNIT_OUTPUT),
                        )
                    )
                    continue
                wx = [(prev[j], -w[j]) for j in range(layer.n_in) if w[j] != 0.0]
                if layer.activation == "linear":
                    x = model.add_variable(
                        name="x_l%d_n%d" % (l, i), lb=rec.post_lo[i], ub=rec.post_hi[i],
                        meta=VarRole(layer=l, neuron=i, role=ROLE_UNIT_OUTPUT),
                    )
                    model.add_constraint([(x, 1.0)] + wx, "=", b, name="lin_out_l%d_n%d" % (l, i))
                    cur.append(x)
                    continue
                tag = rec.stability[i]
                if _simplify_unit(spec, bounds, tag):
                    if tag == STABLY_INACTIVE:
                        x = model.add_variable(
                            name="x_l%d_n%d" % (l, i), lb=0.0, ub=0.0,
                            meta=VarRole(layer=l, neuron=i, role=ROLE_UNIT_OUTPUT),
                        )
                    else:
                        x = model.add_variable(
                            name="x_l%d_n%d" % (l, i), lb=rec.post_lo[i], ub=rec.post_hi[i],
                            meta=VarRole(layer=l, neuron=i, role=ROLE_UNIT_OUTPUT),
                        )
                        model.add_constraint(
                            [(x, 1.0)] + wx, "=", b, name="relu_fix_l%d_n%d" % (l, i)
                        )
                    cur.append(x)
                    continue
                if spec.relu in ("bigm", "hullcuts"):
                    x, z = _encode_relu_bigm(model, l, i, wx, b, rec, bounds.m_rule)
                elif spec.relu == "extended":
                    x, z = _encode_relu_extended(model, l, i, wx, b, rec)
                else:
                    x, z = _encode_relu_disjunctive(
                        model, net, bounds, spec, l, i, prev, w, b, rec
                    )
                cur.append(x)
                cur_z[i] = z
            if spec.valid_inequalities and l >= 2 and isinstance(net.layers[l - 2], DenseLayer):
                prev_layer = net.layers[l - 2]
                if prev_layer.activation == "relu":
                    _emit_valid_inequalities(
                        model, layer, bounds.layers[l - 2], z_by_layer[-1], cur_z, l
                    )
        elif isinstance(layer, MaxPoolLayer):
            prev_lo, prev_hi = bounds.post(l - 1)
            for i, pool in enumerate(layer.pools):
                cur.append(
                    _encode_maxpool(model, l, i, pool, prev, prev_lo, prev_hi, rec)
                )
        else:
            for i, pool in enumerate(layer.pools):
                x = model.add_variable(
                    name="x_l%d_n%d" % (l, i), lb=rec.post_lo[i], ub=rec.post_hi[i],
                    meta=VarRole(layer=l, neuron=i, role=ROLE_UNIT_OUTPUT),
                )
                terms = [(x, 1.0)] + [(prev[j], -1.0 / len(pool)) for j in pool]
                model.add_constraint(terms, "=", 0.0, name="avg_out_l%d_n%d" % (l, i))
                cur.append(x)
        layer_vars.append(cur)
        z_by_layer.append(cur_z)
    return model


def _encode_relu_bigm(model, l, i, wx, b, rec, m_rule):
    cap_m = _require_finite(rec.big_m[i], "big-M for layer %d unit %d" % (l, i))
    if m_rule == M_RULE_UPPER:
        # The stored constant is the unit's upper range; it caps the output
        # but cannot absorb the negative range in the slack row, so that row
        # gets the smallest valid constant instead. Without this the gated
        # upper row cuts off inputs whose unit input drops below -M.
        slack_m = _require_finite(
            max(0.0, -rec.pre_lo[i]), "slack constant for layer %d unit %d" % (l, i)
        )
    else:
        slack_m = cap_m
    x = model.add_variable(
        name="x_l%d_n%d" % (l, i), lb=rec.post_lo[i], ub=rec.post_hi[i],
        meta=VarRole(layer=l, neuron=i, role=ROLE_UNIT_OUTPUT),
    )
    z = model.add_variable(
        name="z_l%d_n%d" % (l, i), kind=BINARY,
        meta=VarRole(layer=l, neuron=i, role=ROLE_INDICATOR),
    )
    model.add_constraint([(x, 1.0)] + wx, ">=", b, name="relu_lb_l%d_n%d" % (l, i))
    model.add_constraint([(x, 1.0), (z, slack_m)] + wx, "<=", b + slack_m, name="relu_ub_l%d_n%d" % (l, i))
    model.add_constraint([(x, 1.0), (z, -cap_m)], "<=", 0.0, name="relu_cap_l%d_n%d" % (l, i))
    return x, z


def _encode_relu_extended(model, l, i, wx, b, rec):
    m_plus = _require_finite(rec.m_plus[i], "positive magnitude for layer %d unit %d" % (l, i))
    m_minus = _require_finite(rec.m_minus[i], "negative magnitude for layer %d unit %d" % (l, i))
    x = model.add_variable(
        name="x_l%d_n%d" % (l, i), lb=max(0.0, rec.post_lo[i]), ub=m_plus,
        meta=VarRole(layer=l, neuron=i, role=ROLE_UNIT_OUTPUT),
    )
    xb = model.add_variable(
        name="xb_l%d_n%d" % (l, i), lb=0.0, ub=m_minus,
        meta=VarRole(layer=l, neuron=i, role=ROLE_COMPLEMENT),
    )
    z = model.add_variable(
        name="z_l%d_n%d" % (l, i), kind=BINARY,
        meta=VarRole(layer=l, neuron=i, role=ROLE_INDICATOR),
    )
    # x - xb = wx' + b, gated so at most one side is nonzero.
    model.add_constraint(
        [(x, 1.0), (xb, -1.0)] + wx, "=", b, name="ext_split_l%d_n%d" % (l, i)
    )
    model.add_constraint([(x, 1.0), (z, -m_plus)], "<=", 0.0, name="ext_cap_pos_l%d_n%d" % (l, i))
    model.add_constraint([(xb, 1.0), (z, m_minus)], "<=", m_minus, name="ext_cap_neg_l%d_n%d" % (l, i))
    return x, z


def _emit_valid_inequalities(model, layer, prev_rec, prev_z, cur_z, l):
    """Indicator implications between consecutive layers: with a nonpositive
    bias an active unit needs an active positive-weight feeder, with a
    nonnegative bias an inactive unit needs an active negative-weight feeder.
    Stable feeder units fold in as constants."""
    for i in range(layer.n_out):
        z_i = cur_z[i]
        if z_i is None:
            continue
        b = float(layer.bias[i])
        w = layer.weights[:, i]
        if b <= 0.0:
            terms = [(z_i, 1.0)]
            const = 0.0
            for j in range(layer.n_in):
                if w[j] <= 0.0:
                    continue
                if prev_z[j] is not None:
                    terms.append((prev_z[j], -1.0))
                elif prev_rec.stability[j] == STABLY_ACTIVE:
                    const += 1.0
            if const < 1.0:
                model.add_constraint(terms, "<=", const, name="vi_act_l%d_n%d" % (l, i))
        if b >= 0.0:
            terms = [(z_i, -1.0)]
            const = 0.0
            for j in range(layer.n_in):
                if w[j] >= 0.0:
                    continue
                if prev_z[j] is not None:
                    terms.append((prev_z[j], -1.0))
                elif prev_rec.stability[j] == STABLY_ACTIVE:
                    const += 1.0
            if const < 1.0:
                model.add_constraint(terms, "<=", const - 1.0, name="vi_inact_l%d_n%d" % (l, i))


def _interval_partition_bounds(w, parts, prev_lo, prev_hi):
    out = []
    for part in parts:
        a = w[part] * prev_lo[part]
        b = w[part] * prev_hi[part]
        out.append((float(np.minimum(a, b).sum()), float(np.maximum(a, b).sum())))
    return out


def _lp_partition_bounds(net, bounds, l, i, w, b, parts, interval):
    """Per-regime subset-sum ranges from 4K LP relaxations of the preceding
    layers (each regime adds its sign constraint on the unit input). Falls
    back to the interval range when a regime is empty or a solve fails."""
    ranges = {"a": [list(r) for r in interval], "b": [list(r) for r in interval]}
    for region, sense in (("a", "<="), ("b", ">=")):
        model, layer_vars = build_bigm_prefix(net, bounds, l - 1)
        prev = layer_vars[-1]
        gate = [(prev[j], w[j]) for j in range(len(w)) if w[j] != 0.0]
        if gate:
            model.add_constraint(gate, sense, -b, name="regime")
        for k, part in enumerate(parts):
            terms = [(prev[j], w[j]) for j in part if w[j] != 0.0]
            for goal, slot in (("min", 0), ("max", 1)):
                if not terms:
                    ranges[region][k][slot] = 0.0
                    continue
                model.set_objective(goal, terms)
                sf = standard_form(model)
                sol = simplex_solve(sf)
                if sol.status != "optimal":
                    continue
                value = -sol.obj if sf.maximize else sol.obj
                if goal == "min":
                    ranges[region][k][slot] = max(ranges[region][k][slot], value)
                else:
                    ranges[region][k][slot] = min(ranges[region][k][slot], value)
    return ranges


def _encode_relu_disjunctive(model, net, bounds, spec, l, i, prev, w, b, rec):
    n_in = len(prev)
    parts = partition_indices(n_in, spec.partitions)
    prev_lo, prev_hi = bounds.post(l - 1)
    interval = _interval_partition_bounds(w, parts, prev_lo, prev_hi)
    if spec.partition_bounds == "lp":
        ranges = _lp_partition_bounds(net, bounds, l, i, w, b, parts, interval)
    else:
        ranges = {"a": interval, "b": interval}
    k_count = len(parts)

    def tag(k):
        return "" if k_count == 1 else "_k%d" % k

    x = model.add_variable(
        name="x_l%d_n%d" % (l, i), lb=rec.post_lo[i], ub=rec.post_hi[i],
        meta=VarRole(layer=l, neuron=i, role=ROLE_UNIT_OUTPUT),
    )
    z = model.add_variable(
        name="z_l%d_n%d" % (l, i), kind=BINARY,
        meta=VarRole(layer=l, neuron=i, role=ROLE_INDICATOR),
    )
    ya = []
    yb = []
    for k, part in enumerate(parts):
        la, ua = ranges["a"][k]
        lb_b, ub_b = ranges["b"][k]
        for value, what in ((la, "lower"), (ua, "upper"), (lb_b, "lower"), (ub_b, "upper")):
            _require_finite(value, "%s partition bound for layer %d unit %d" % (what, l, i))
        a_var = model.add_variable(
            name="ya_l%d_n%d%s" % (l, i, tag(k)), lb=min(la, 0.0), ub=max(ua, 0.0),
            meta=VarRole(layer=l, neuron=i, role=ROLE_DISJUNCT_A, part=k),
        )
        b_var = model.add_variable(
            name="yb_l%d_n%d%s" % (l, i, tag(k)), lb=min(lb_b, 0.0), ub=max(ub_b, 0.0),
            meta=VarRole(layer=l, neuron=i, role=ROLE_DISJUNCT_B, part=k),
        )
        ya.append(a_var)
        yb.append(b_var)
        terms = [(prev[j], w[j]) for j in part if w[j] != 0.0]
        terms += [(a_var, -1.0), (b_var, -1.0)]
        model.add_constraint(terms, "=", 0.0, name="disj_split_l%d_n%d%s" % (l, i, tag(k)))
        model.add_constraint(
            [(a_var, 1.0), (z, -ua)], "<=", 0.0, name="disj_a_ub_l%d_n%d%s" % (l, i, tag(k))
        )
        model.add_constraint(
            [(a_var, 1.0), (z, -la)], ">=", 0.0, name="disj_a_lb_l%d_n%d%s" % (l, i, tag(k))
        )
        model.add_constraint(
            [(b_var, 1.0), (z, ub_b)], "<=", ub_b, name="disj_b_ub_l%d_n%d%s" % (l, i, tag(k))
        )
        model.add_constraint(
            [(b_var, 1.0), (z, lb_b)], ">=", lb_b, name="disj_b_lb_l%d_n%d%s" % (l, i, tag(k))
        )
    # The indicator picks the inactive branch: z = 1 forces the output to
    # zero and the unit input nonpositive, z = 0 forces output = input.
    model.add_constraint(
        [(a, 1.0) for a in ya] + [(z, b)], "<=", 0.0, name="disj_off_l%d_n%d" % (l, i)
    )
    model.add_constraint(
        [(v, 1.0) for v in yb] + [(z, -b)], ">=", -b, name="disj_on_l%d_n%d" % (l, i)
    )
    model.add_constraint(
        [(v, 1.0) for v in yb] + [(z, -b), (x, -1.0)], "=", -b, name="disj_out_l%d_n%d" % (l, i)
    )
    return x, z


def _encode_maxpool(model, l, i, pool, prev, prev_lo, prev_hi, rec):
    u_max = max(prev_hi[j] for j in pool)
    x = model.add_variable(
        name="x_l%d_n%d" % (l, i), lb=rec.post_lo[i], ub=rec.post_hi[i],
        meta=VarRole(layer=l, neuron=i, role=ROLE_UNIT_OUTPUT),
    )
    deltas = []
    for k, j in enumerate(pool):
        model.add_constraint(
            [(x, 1.0), (prev[j], -1.0)], ">=", 0.0, name="pool_lb_l%d_n%d_p%d" % (l, i, k)
        )
        delta = model.add_variable(
            name="delta_l%d_n%d_p%d" % (l, i, k), kind=BINARY,
            meta=VarRole(layer=l, neuron=i, role=ROLE_POOL_INDICATOR, part=k),
        )
        gap = u_max - prev_lo[j]
        model.add_constraint(
            [(x, 1.0), (prev[j], -1.0), (delta, gap)], "<=", gap,
            name="pool_ub_l%d_n%d_p%d" % (l, i, k),
        )
        deltas.append(delta)
    model.add_constraint([(d, 1.0) for d in deltas], "=", 1.0, name="pool_pick_l%d_n%d" % (l, i))
    return x


# -- convex-hull cut separation ------------------------------------------------


@dataclass
class HullCut:
    """One inequality from the single-unit hull family:
    x_out <= sum_{i in S} w_i x_i + coef_z * z + rhs."""

    include: np.ndarray
    w: np.ndarray
    coef_z: float
    rhs: float
    violation: float

    def rhs_value(self, x_prev, z):
        return float((self.w * x_prev)[self.include].sum() + self.coef_z * z + self.rhs)


def separate_hull_cut(w, b, lower, upper, x_prev, z_value, x_value, tol=1e-7):
    """Most violated member of the hull family at a fractional point.

    Index selection is a per-term greedy (each term independently picks the
    smaller of its in-set and out-of-set contribution), which attains the
    subset-enumeration minimum; ties go to exclusion. Returns None when the
    point violates nothing by more than ``tol``.
    """
    w = np.asarray(w, dtype=np.float64)
    x_prev = np.asarray(x_prev, dtype=np.float64)
    lhat = np.where(w >= 0.0, lower, upper)
    uhat = np.where(w >= 0.0, upper, lower)
    supp = w != 0.0
    in_val = w * (x_prev - lhat * (1.0 - z_value))
    out_val = w * uhat * z_value
    include = supp & (in_val < out_val)
    rhs_at_point = in_val[include].sum() + out_val[~include].sum() + b * z_value
    violation = float(x_value - rhs_at_point)
    if violation <= tol:
        return None
    coef_z = float((w * lhat)[include].sum() + b + (w * uhat)[~include].sum())
    rhs = float(-(w * lhat)[include].sum())
    return HullCut(include=include, w=w, coef_z=coef_z, rhs=rhs, violation=violation)


def hull_rhs_for_subset(w, b, lower, upper, include, x_prev, z_value):
    """Right side of the subset's inequality at a point; test helper for the
    greedy-versus-enumeration comparison."""
    w = np.asarray(w, dtype=np.float64)
    lhat = np.where(w >= 0.0, lower, upper)
    uhat = np.where(w >= 0.0, upper, lower)
    include = np.asarray(include, dtype=bool)
    in_val = w * (np.asarray(x_prev) - lhat * (1.0 - z_value))
    out_val = w * uhat * z_value
    return float(in_val[include].sum() + out_val[~include].sum() + b * z_value)


def make_hull_separator(net: Network, bounds: BoundSet, model: MipModel, tol=1e-7):
    """Build the separation callback for solve_mip over a big-M model.

    Covers every dense ReLU unit that kept its indicator variable. Returned
    cuts are sorted most violated first and expressed over model ids.
    """
    by_key = {}
    for vid, role in model.meta.items():
        by_key[(role.layer, role.neuron, role.role)] = vid
    records = []
    for l, layer in enumerate(net.layers, start=1):
        if not isinstance(layer, DenseLayer) or layer.activation != "relu":
            continue
        prev_lo, prev_hi = bounds.post(l - 1)
        prev_ids = [by_key[(l - 1, j, ROLE_UNIT_OUTPUT)] for j in range(layer.n_in)]
        for i in range(layer.n_out):
            z_id = by_key.get((l, i, ROLE_INDICATOR))
            if z_id is None:
                continue
            x_id = by_key[(l, i, ROLE_UNIT_OUTPUT)]
            records.append(
                (l, i, layer.weights[:, i], float(layer.bias[i]), prev_lo, prev_hi, prev_ids, z_id, x_id)
            )

    def separator(values):
        found = []
        for l, i, w, b, lo, hi, prev_ids, z_id, x_id in records:
            x_prev = values[prev_ids]
            cut = separate_hull_cut(w, b, lo, hi, x_prev, values[z_id], values[x_id], tol=tol)
            if cut is None:
                continue
            terms = [(x_id, 1.0)]
            for j in np.nonzero(cut.include)[0]:
                terms.append((prev_ids[j], -w[j]))
            if cut.coef_z != 0.0:
                terms.append((z_id, -cut.coef_z))
            found.append((cut.violation, l, i, terms, cut.rhs))
        found.sort(key=lambda item: (-item[0], item[1], item[2]))
        return [(terms, rhs) for _, _, _, terms, rhs in found]

    return separator


# -- feasibility witnesses ------------------------------------------------------


def feasible_point(net: Network, bounds: BoundSet, spec: FormulationSpec, model: MipModel, x0):
    """Assignment induced by an exact forward pass; feasible in every
    formulation for inputs inside the box. Indicators follow each
    formulation's own convention (the disjunctive indicator marks the
    inactive branch)."""
    acts = forward(net, x0)
    values = np.zeros(model.num_variables)
    by_key = {}
    for vid, role in model.meta.items():
        key = (role.layer, role.neuron, role.role)
        if role.part is not None:
            by_key[key + (role.part,)] = vid
        else:
            by_key[key] = vid
    for i in range(net.input_dim):
        values[by_key[(0, i, ROLE_UNIT_OUTPUT)]] = acts.x0[i]
    prev_post = acts.x0
    for l, layer in enumerate(net.layers, start=1):
        post = acts.post[l - 1]
        for i in range(layer.n_out):
            values[by_key[(l, i, ROLE_UNIT_OUTPUT)]] = post[i]
        if isinstance(layer, DenseLayer) and layer.activation == "relu":
            pre = acts.pre[l - 1]
            parts = partition_indices(layer.n_in, spec.partitions) if spec.relu == "disjunctive" and layer.n_in else []
            for i in range(layer.n_out):
                y = pre[i]
                z_id = by_key.get((l, i, ROLE_INDICATOR))
                if z_id is None:
                    continue
                if spec.relu == "disjunctive":
                    inactive = y <= 0.0
                    values[z_id] = 1.0 if inactive else 0.0
                    w = layer.weights[:, i]
                    for k, part in enumerate(parts):
                        subset = float((w[part] * prev_post[part]).sum())
                        values[by_key[(l, i, ROLE_DISJUNCT_A, k)]] = subset if inactive else 0.0
                        values[by_key[(l, i, ROLE_DISJUNCT_B, k)]] = 0.0 if inactive else subset
                else:
                    values[z_id] = 1.0 if y > 0.0 else 0.0
                    xb_id = by_key.get((l, i, ROLE_COMPLEMENT))
                    if xb_id is not None:
                        values[xb_id] = max(0.0, -y)
        elif isinstance(layer, MaxPoolLayer):
            for i, pool in enumerate(layer.pools):
                members = np.array([prev_post[j] for j in pool])
                winner = int(np.argmax(members))
                for k in range(len(pool)):
                    values[by_key[(l, i, ROLE_POOL_INDICATOR, k)]] = 1.0 if k == winner else 0.0
        prev_post = post
    return values
