"""MIP encodings that train small discrete networks, and the decoder that
turns a solved model back into a runnable Network.

Two variants share one shape: weights are model variables reused across
samples, every sample gets its own activation and product variables, and
strict activation thresholds are realized through a single epsilon margin
(MIP constraints cannot be strict).

* ``binary``: step activations in {0, 1}, continuous weights in [-1, 1],
  products linearized against the binary upstream activations, and a
  linear regression head.
* ``binarized``: activations in {-1, +1} via indicator variables, weights
  on the lattice {-P, 0, P} (an integer variable scaled by P at decode
  time), products tied by four two-P-coefficient rows, and a scaled head.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    BINARY,
    INTEGER,
    ROLE_DISTANCE,
    ROLE_INDICATOR,
    ROLE_TRAINING_PRODUCT,
    ROLE_TRAINING_WEIGHT,
    ROLE_UNIT_OUTPUT,
    MipModel,
    SolveResult,
    VarRole,
)
from .network import DenseLayer, Network, forward

INF = math.inf


@dataclass(frozen=True)
class TrainingSpec:
    layer_sizes: tuple
    inputs: np.ndarray          # (samples, n0)
    labels: np.ndarray          # class indices
    variant: str = "binary"     # binary | binarized
    weight_levels: int = 1      # P for the binarized variant
    loss: str = "l1"            # l1 | hinge
    input_radius: float = 1.0   # binary variant: inputs live in [-r, r]
    epsilon: float = 1e-4

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(n) for n in self.layer_sizes))
        object.__setattr__(self, "inputs", np.asarray(self.inputs, dtype=np.float64))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))
        if len(self.layer_sizes) < 2:
            raise ValueError("architecture needs at least input and output sizes")
        if self.variant not in ("binary", "binarized"):
            raise ValueError("unknown training variant %r" % self.variant)
        if self.loss not in ("l1", "hinge"):
            raise ValueError("unsupported loss %r (quadratic losses are rejected)" % self.loss)
        if self.weight_levels < 1:
            raise ValueError("weight level P must be a positive integer")
        if self.epsilon <= 0:
            raise ValueError("strictness epsilon must be positive")
        if self.input_radius <= 0:
            raise ValueError("input radius must be positive")
        if self.inputs.ndim != 2 or self.inputs.shape[1] != self.layer_sizes[0]:
            raise ValueError("inputs must be (samples, %d)" % self.layer_sizes[0])
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ValueError("inputs and labels disagree on the sample count")
        if self.variant == "binary" and np.abs(self.inputs).max(initial=0.0) > self.input_radius + 1e-12:
            raise ValueError("inputs exceed the declared radius %r" % self.input_radius)
        if self.variant == "binarized" and np.abs(self.inputs).max(initial=0.0) > 1.0 + 1e-12:
            raise ValueError("binarized training assumes inputs within [-1, 1]")

    @property
    def num_samples(self) -> int:
        return self.inputs.shape[0]

    @property
    def depth(self) -> int:
        return len(self.layer_sizes) - 1


def target_matrix(spec: TrainingSpec) -> np.ndarray:
    """Per-sample targets: raw labels for a single output, one-hot otherwise.
    Sign coding (+-1) applies to the binarized variant and to the hinge loss."""
    n_out = spec.layer_sizes[-1]
    signed = spec.variant == "binarized" or spec.loss == "hinge"
    if n_out == 1:
        if ((spec.labels < 0) | (spec.labels > 1)).any():
            raise ValueError("a single output unit supports labels 0/1 only")
        values = spec.labels.astype(np.float64).reshape(-1, 1)
        return 2.0 * values - 1.0 if signed else values
    if ((spec.labels < 0) | (spec.labels >= n_out)).any():
        raise ValueError("labels must index the %d output units" % n_out)
    one_hot = np.zeros((spec.num_samples, n_out))
    one_hot[np.arange(spec.num_samples), spec.labels] = 1.0
    return 2.0 * one_hot - 1.0 if signed else one_hot


def loss_value(outputs, targets, loss: str) -> float:
    outputs = np.asarray(outputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if loss == "l1":
        return float(np.abs(outputs - targets).sum())
    return float(np.maximum(0.0, 0.5 - targets * outputs).sum())


def _add_loss(model, spec, out_ids, target, s, objective):
    for j, x_id in enumerate(out_ids):
        y = float(target[j])
        if spec.loss == "l1":
            d = model.add_variable(
                name="d_n%d_s%d" % (j, s), lb=0.0,
                meta=VarRole(neuron=j, sample=s, role=ROLE_DISTANCE),
            )
            model.add_constraint(
                [(x_id, 1.0), (d, -1.0)], "<=", y, name="loss_ub_n%d_s%d" % (j, s)
            )
            model.add_constraint(
                [(x_id, 1.0), (d, 1.0)], ">=", y, name="loss_lb_n%d_s%d" % (j, s)
            )
            objective.append((d, 1.0))
        else:
            h = model.add_variable(
                name="h_n%d_s%d" % (j, s), lb=0.0,
                meta=VarRole(neuron=j, sample=s, role=ROLE_DISTANCE),
            )
            # h >= 1/2 - y * x, h >= 0: the positive part of the margin shortfall.
            model.add_constraint(
                [(h, 1.0), (x_id, y)], ">=", 0.5, name="loss_hinge_n%d_s%d" % (j, s)
            )
            objective.append((h, 1.0))


def _weight_vars(model, spec, kind, lo, hi):
    """Shared weight variables; row 0 is the bias unit with constant input 1."""
    weights = []
    for l in range(1, spec.depth + 1):
        n_in = spec.layer_sizes[l - 1]
        n_out = spec.layer_sizes[l]
        table = np.empty((n_in + 1, n_out), dtype=np.int64)
        for j in range(n_in + 1):
            for i in range(n_out):
                table[j, i] = model.add_variable(
                    name="w_l%d_r%d_c%d" % (l, j, i), kind=kind, lb=lo, ub=hi,
                    meta=VarRole(layer=l, row=j, col=i, role=ROLE_TRAINING_WEIGHT),
                )
        weights.append(table)
    return weights


def encode_binary_training(spec: TrainingSpec) -> MipModel:
    """Training MIP for step-activation networks.

    Hidden activations are binary variables thresholded against the unit
    input through big-M rows (M covers the largest attainable magnitude:
    n*r + 1 at the first layer, fan-in + 1 deeper). Products of weights and
    binary activations are linearized exactly through [-1, 1] auxiliaries,
    and the last layer is a plain regression head.
    """
    if spec.variant != "binary":
        raise ValueError("spec variant is %r, expected 'binary'" % spec.variant)
    sizes = spec.layer_sizes
    depth = spec.depth
    targets = target_matrix(spec)
    model = MipModel(name="train_binary")
    weights = _weight_vars(model, spec, "continuous", -1.0, 1.0)
    objective = []
    m_first = sizes[0] * spec.input_radius + 1.0

    for s in range(spec.num_samples):
        x_data = spec.inputs[s]
        acts = None  # binary activation ids of the previous hidden layer
        for l in range(1, depth + 1):
            n_in = sizes[l - 1]
            n_out = sizes[l]
            w = weights[l - 1]
            is_head = l == depth
            if l == 1:
                # Unit inputs are linear in the weights: data times weight.
                def row_terms(i):
                    terms = [(int(w[0, i]), 1.0)]
                    terms += [
                        (int(w[j + 1, i]), float(x_data[j]))
                        for j in range(n_in)
                        if x_data[j] != 0.0
                    ]
                    return terms

                m_layer = m_first
            else:
                u_ids = np.empty((n_in + 1, n_out), dtype=np.int64)
                for i in range(n_out):
                    for j in range(n_in + 1):
                        u = model.add_variable(
                            name="u_l%d_r%d_c%d_s%d" % (l, j, i, s), lb=-1.0, ub=1.0,
                            meta=VarRole(layer=l, row=j, col=i, sample=s, role=ROLE_TRAINING_PRODUCT),
                        )
                        u_ids[j, i] = u
                        w_id = int(w[j, i])
                        if j == 0:
                            model.add_constraint(
                                [(u, 1.0), (w_id, -1.0)], "=", 0.0,
                                name="u_fix_l%d_r0_c%d_s%d" % (l, i, s),
                            )
                            continue
                        xp = acts[j - 1]
                        model.add_constraint([(u, 1.0), (xp, -1.0)], "<=", 0.0,
                                             name="u_ub1_l%d_r%d_c%d_s%d" % (l, j, i, s))
                        model.add_constraint([(u, 1.0), (xp, 1.0)], ">=", 0.0,
                                             name="u_lb1_l%d_r%d_c%d_s%d" % (l, j, i, s))
                        model.add_constraint([(u, 1.0), (w_id, -1.0), (xp, 1.0)], "<=", 1.0,
                                             name="u_ub2_l%d_r%d_c%d_s%d" % (l, j, i, s))
                        model.add_constraint([(u, 1.0), (w_id, -1.0), (xp, -1.0)], ">=", -1.0,
                                             name="u_lb2_l%d_r%d_c%d_s%d" % (l, j, i, s))

                def row_terms(i):
                    return [(int(u_ids[j, i]), 1.0) for j in range(n_in + 1)]

                m_layer = n_in + 1.0
            if is_head:
                out_ids = []
                for i in range(n_out):
                    x = model.add_variable(
                        name="x_l%d_n%d_s%d" % (l, i, s), lb=-m_layer, ub=m_layer,
                        meta=VarRole(layer=l, neuron=i, sample=s, role=ROLE_UNIT_OUTPUT),
                    )
                    model.add_constraint(
                        [(x, 1.0)] + [(vid, -coef) for vid, coef in row_terms(i)],
                        "=", 0.0, name="head_l%d_n%d_s%d" % (l, i, s),
                    )
                    out_ids.append(x)
                _add_loss(model, spec, out_ids, targets[s], s, objective)
            else:
                next_acts = []
                for i in range(n_out):
                    x = model.add_variable(
                        name="x_l%d_n%d_s%d" % (l, i, s), kind=BINARY,
                        meta=VarRole(layer=l, neuron=i, sample=s, role=ROLE_UNIT_OUTPUT),
                    )
                    terms = row_terms(i)
                    model.add_constraint(
                        terms + [(x, -m_layer)], "<=", -spec.epsilon,
                        name="thr_up_l%d_n%d_s%d" % (l, i, s),
                    )
                    model.add_constraint(
                        terms + [(x, -m_layer)], ">=", -m_layer,
                        name="thr_lo_l%d_n%d_s%d" % (l, i, s),
                    )
                    next_acts.append(x)
                acts = next_acts
    model.set_objective("min", objective)
    return model


def encode_binarized_training(spec: TrainingSpec) -> MipModel:
    """Training MIP for sign-activation networks on the {-P, 0, P} lattice.

    Weight variables live in {-1, 0, 1} and scale by P at decode time.
    Product variables u equal the physical weight times the upstream sign,
    so |u| <= P; thresholds gate their sums with M = P * (fan-in + 1) and
    the head scales the product sum by 2 / (P * (fan-in + 1)).
    """
    if spec.variant != "binarized":
        raise ValueError("spec variant is %r, expected 'binarized'" % spec.variant)
    sizes = spec.layer_sizes
    depth = spec.depth
    p_val = float(spec.weight_levels)
    targets = target_matrix(spec)
    model = MipModel(name="train_binarized")
    weights = _weight_vars(model, spec, INTEGER, -1, 1)
    objective = []

    for s in range(spec.num_samples):
        x_data = spec.inputs[s]
        prev_z = None  # indicator ids of the previous hidden layer
        for l in range(1, depth + 1):
            n_in = sizes[l - 1]
            n_out = sizes[l]
            w = weights[l - 1]
            is_head = l == depth
            u_ids = np.empty((n_in + 1, n_out), dtype=np.int64)
            for i in range(n_out):
                for j in range(n_in + 1):
                    u = model.add_variable(
                        name="u_l%d_r%d_c%d_s%d" % (l, j, i, s), lb=-p_val, ub=p_val,
                        meta=VarRole(layer=l, row=j, col=i, sample=s, role=ROLE_TRAINING_PRODUCT),
                    )
                    u_ids[j, i] = u
                    w_id = int(w[j, i])
                    if j == 0:
                        model.add_constraint(
                            [(u, 1.0), (w_id, -p_val)], "=", 0.0,
                            name="u_fix_l%d_r0_c%d_s%d" % (l, i, s),
                        )
                    elif l == 1:
                        # Data constants make the first-layer products exact.
                        model.add_constraint(
                            [(u, 1.0), (w_id, -p_val * float(x_data[j - 1]))], "=", 0.0,
                            name="u_fix_l%d_r%d_c%d_s%d" % (l, j, i, s),
                        )
                    else:
                        z = prev_z[j - 1]
                        two_p = 2.0 * p_val
                        model.add_constraint(
                            [(u, 1.0), (w_id, -p_val), (z, two_p)], "<=", two_p,
                            name="u_ub1_l%d_r%d_c%d_s%d" % (l, j, i, s),
                        )
                        model.add_constraint(
                            [(u, 1.0), (w_id, p_val), (z, -two_p)], "<=", 0.0,
                            name="u_ub2_l%d_r%d_c%d_s%d" % (l, j, i, s),
                        )
                        model.add_constraint(
                            [(u, 1.0), (w_id, -p_val), (z, -two_p)], ">=", -two_p,
                            name="u_lb1_l%d_r%d_c%d_s%d" % (l, j, i, s),
                        )
                        model.add_constraint(
                            [(u, 1.0), (w_id, p_val), (z, two_p)], ">=", 0.0,
                            name="u_lb2_l%d_r%d_c%d_s%d" % (l, j, i, s),
                        )
            if is_head:
                scale = 2.0 / (p_val * (n_in + 1.0))
                out_ids = []
                for i in range(n_out):
                    x = model.add_variable(
                        name="x_l%d_n%d_s%d" % (l, i, s), lb=-2.0, ub=2.0,
                        meta=VarRole(layer=l, neuron=i, sample=s, role=ROLE_UNIT_OUTPUT),
                    )
                    terms = [(x, 1.0)] + [(int(u_ids[j, i]), -scale) for j in range(n_in + 1)]
                    model.add_constraint(terms, "=", 0.0, name="head_l%d_n%d_s%d" % (l, i, s))
                    out_ids.append(x)
                _add_loss(model, spec, out_ids, targets[s], s, objective)
            else:
                m_layer = p_val * (n_in + 1.0)
                next_z = []
                for i in range(n_out):
                    z = model.add_variable(
                        name="z_l%d_n%d_s%d" % (l, i, s), kind=BINARY,
                        meta=VarRole(layer=l, neuron=i, sample=s, role=ROLE_INDICATOR),
                    )
                    terms = [(int(u_ids[j, i]), 1.0) for j in range(n_in + 1)]
                    # Strict negative side: with z = 0 the sum must reach -epsilon.
                    model.add_constraint(
                        terms + [(z, -(m_layer + spec.epsilon))], "<=", -spec.epsilon,
                        name="thr_up_l%d_n%d_s%d" % (l, i, s),
                    )
                    model.add_constraint(
                        terms + [(z, -m_layer)], ">=", -m_layer,
                        name="thr_lo_l%d_n%d_s%d" % (l, i, s),
                    )
                    next_z.append(z)
                prev_z = next_z
    model.set_objective("min", objective)
    return model


def encode_training(spec: TrainingSpec) -> MipModel:
    if spec.variant == "binary":
        return encode_binary_training(spec)
    return encode_binarized_training(spec)


@dataclass
class TrainingReport:
    total_loss: float
    objective: float
    per_sample: list = field(default_factory=list)
    all_consistent: bool = True
    all_correct: bool = True
    lattice: list = field(default_factory=list)  # decoded weight tables, bias row first

    def to_doc(self) -> dict:
        return {
            "objective": self.objective,
            "total_loss": self.total_loss,
            "all_consistent": self.all_consistent,
            "all_correct": self.all_correct,
            "weights": [table.tolist() for table in self.lattice],
            "samples": self.per_sample,
        }


def _extract_weights(spec, model, incumbent):
    tables = []
    for l in range(1, spec.depth + 1):
        n_in = spec.layer_sizes[l - 1]
        n_out = spec.layer_sizes[l]
        table = np.zeros((n_in + 1, n_out))
        for j in range(n_in + 1):
            for i in range(n_out):
                vid = model.var_by_name("w_l%d_r%d_c%d" % (l, j, i)).id
                table[j, i] = incumbent[vid]
        tables.append(table)
    return tables


def _predicted_class(output, variant):
    if output.shape[0] == 1:
        threshold = 0.5 if variant == "binary" else 0.0
        return int(output[0] >= threshold)
    return int(np.argmax(output))


def decode_trained(spec: TrainingSpec, model: MipModel, result: SolveResult):
    """Rebuild a runnable Network from an incumbent and cross-check it.

    The binarized decode folds the lattice scale into the weights so the
    network runs on plain sign activations; the head keeps its fixed output
    scaling. The report compares the solver's internal activations and
    outputs against an exact discrete forward pass on every sample.
    """
    if result.incumbent is None:
        raise ValueError("the solve result carries no incumbent to decode")
    incumbent = result.incumbent
    p_val = float(spec.weight_levels)
    raw = _extract_weights(spec, model, incumbent)
    layers = []
    lattice = []
    for l, table in enumerate(raw, start=1):
        is_head = l == spec.depth
        if spec.variant == "binary":
            table = np.clip(table, -1.0, 1.0)
            lattice.append(table.copy())
            weight = table[1:, :]
            bias = table[0, :]
            activation = "linear" if is_head else "step"
        else:
            table = np.round(table)
            lattice.append(p_val * table)  # physical lattice weights {-P, 0, P}
            weight = p_val * table[1:, :]
            bias = p_val * table[0, :]
            if is_head:
                scale = 2.0 / (p_val * (spec.layer_sizes[l - 1] + 1.0))
                weight = scale * weight
                bias = scale * bias
                activation = "linear"
            else:
                activation = "sign"
        layers.append(DenseLayer(weights=weight, bias=bias, activation=activation))
    if spec.variant == "binary":
        radius = spec.input_radius
    else:
        radius = 1.0
    net = Network(
        input_dim=spec.layer_sizes[0],
        input_lo=np.full(spec.layer_sizes[0], -radius),
        input_hi=np.full(spec.layer_sizes[0], radius),
        layers=tuple(layers),
    )

    targets = target_matrix(spec)
    report = TrainingReport(total_loss=0.0, objective=float(result.objective), lattice=lattice)
    for s in range(spec.num_samples):
        acts = forward(net, spec.inputs[s])
        decoded_out = acts.post[-1]
        mip_out = np.array([
            incumbent[model.var_by_name("x_l%d_n%d_s%d" % (spec.depth, i, s)).id]
            for i in range(spec.layer_sizes[-1])
        ])
        consistent = bool(np.abs(decoded_out - mip_out).max() <= 1e-6)
        for l in range(1, spec.depth):
            hidden = acts.post[l - 1]
            for i in range(spec.layer_sizes[l]):
                if spec.variant == "binary":
                    vid = model.var_by_name("x_l%d_n%d_s%d" % (l, i, s)).id
                    mip_act = incumbent[vid]
                else:
                    vid = model.var_by_name("z_l%d_n%d_s%d" % (l, i, s)).id
                    mip_act = 2.0 * incumbent[vid] - 1.0
                if abs(hidden[i] - mip_act) > 1e-6:
                    consistent = False
        sample_loss = loss_value(decoded_out, targets[s], spec.loss)
        predicted = _predicted_class(decoded_out, spec.variant)
        correct = predicted == int(spec.labels[s])
        report.per_sample.append(
            {
                "input": [float(v) for v in spec.inputs[s]],
                "label": int(spec.labels[s]),
                "target": [float(v) for v in targets[s]],
                "mip_output": [float(v) for v in mip_out],
                "decoded_output": [float(v) for v in decoded_out],
                "consistent": consistent,
                "loss": sample_loss,
                "predicted": predicted,
                "correct": correct,
            }
        )
        report.total_loss += sample_loss
        report.all_consistent &= consistent
        report.all_correct &= correct
    return net, report
