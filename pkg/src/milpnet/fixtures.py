"""Deterministic fixture networks, datasets, and independent brute-force
oracles.

The oracles here never touch the solver or the encoders; they are
straight-line enumeration used to pin expected values in tests. Seeds are
fixed in the repo so acceptance runs reproduce byte for byte.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .network import AvgPoolLayer, DenseLayer, MaxPoolLayer, Network

# Seeds behind the published acceptance fixtures.
ACCEPTANCE_NET_SEEDS = (101, 102, 103, 104, 105, 106, 107, 108, 109, 110)
FUZZ_NET_SEEDS = tuple(range(1, 19))
ATTACK_NET_SEED = 7001


@dataclass(frozen=True)
class FixtureSpec:
    seed: int
    layer_sizes: tuple
    weight_scale: float = 1.0
    input_lo: float = 0.0
    input_hi: float = 1.0
    final_linear: bool = True

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(n) for n in self.layer_sizes))


def gen_network(spec: FixtureSpec) -> Network:
    """Dense network with uniform weights in [-scale, scale], hidden ReLU
    layers, and (by default) a linear last layer for logits."""
    rng = np.random.default_rng(spec.seed)
    sizes = spec.layer_sizes
    layers = []
    for l in range(1, len(sizes)):
        weights = rng.uniform(-spec.weight_scale, spec.weight_scale, size=(sizes[l - 1], sizes[l]))
        bias = rng.uniform(-spec.weight_scale, spec.weight_scale, size=sizes[l])
        is_last = l == len(sizes) - 1
        activation = "linear" if (is_last and spec.final_linear) else "relu"
        layers.append(DenseLayer(weights=weights, bias=bias, activation=activation))
    n0 = sizes[0]
    return Network(
        input_dim=n0,
        input_lo=np.full(n0, float(spec.input_lo)),
        input_hi=np.full(n0, float(spec.input_hi)),
        layers=tuple(layers),
    )


def acceptance_nets():
    """The ten 4-5-5-3 networks behind the cross-formulation criteria."""
    return [
        gen_network(FixtureSpec(seed=seed, layer_sizes=(4, 5, 5, 3)))
        for seed in ACCEPTANCE_NET_SEEDS
    ]


def tightening_net() -> Network:
    """Two mirrored first-layer units feed one adder; interval arithmetic
    sees [0, 2] for the adder input while its true range is [0, 1], so the
    LP tightener must strictly improve it."""
    first = DenseLayer(
        weights=np.array([[1.0, -1.0], [-1.0, 1.0]]), bias=np.zeros(2), activation="relu"
    )
    second = DenseLayer(weights=np.array([[1.0], [1.0]]), bias=np.zeros(1), activation="relu")
    return Network(
        input_dim=2, input_lo=np.zeros(2), input_hi=np.ones(2), layers=(first, second)
    )


def pool_net(seed: int = 4242) -> Network:
    """Dense/maxpool/dense/avgpool sandwich for pooling coverage."""
    rng = np.random.default_rng(seed)
    d1 = DenseLayer(
        weights=rng.uniform(-1, 1, size=(4, 6)), bias=rng.uniform(-1, 1, size=6), activation="relu"
    )
    mp = MaxPoolLayer(pools=((0, 1, 2), (3, 4, 5)))
    d2 = DenseLayer(
        weights=rng.uniform(-1, 1, size=(2, 4)), bias=rng.uniform(-1, 1, size=4), activation="relu"
    )
    ap = AvgPoolLayer(pools=((0, 1), (2, 3)))
    d3 = DenseLayer(
        weights=rng.uniform(-1, 1, size=(2, 2)), bias=rng.uniform(-1, 1, size=2), activation="linear"
    )
    return Network(input_dim=4, input_lo=np.zeros(4), input_hi=np.ones(4), layers=(d1, mp, d2, ap, d3))


def fuzz_nets():
    """Twenty varied networks (including two pooled ones) for soundness fuzz."""
    nets = []
    shapes = [(3, 4, 2), (4, 5, 5, 3), (2, 6, 3), (5, 4, 4, 2), (3, 3, 3, 3), (6, 5, 2)]
    for k, seed in enumerate(FUZZ_NET_SEEDS):
        shape = shapes[k % len(shapes)]
        scale = 0.5 + 0.25 * (k % 3)
        nets.append(gen_network(FixtureSpec(seed=seed, layer_sizes=shape, weight_scale=scale)))
    nets.append(pool_net(4242))
    nets.append(pool_net(4243))
    return nets


def attack_net() -> Network:
    """Largest fixture: 16 inputs, hidden chain 12-8-4, ten-class logits."""
    return gen_network(
        FixtureSpec(seed=ATTACK_NET_SEED, layer_sizes=(16, 12, 8, 4, 10), weight_scale=0.6)
    )


# -- datasets ------------------------------------------------------------------


def xor4():
    """The four-point parity dataset."""
    inputs = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    labels = np.array([0, 1, 1, 0])
    return inputs, labels


def random_separable(seed: int, samples: int = 8, dim: int = 2, margin: float = 0.3):
    """Linearly separable points with a guaranteed margin, labels by sign."""
    rng = np.random.default_rng(seed)
    normal = rng.uniform(-1.0, 1.0, size=dim)
    normal /= np.abs(normal).sum()
    offset = rng.uniform(-0.2, 0.2)
    inputs = []
    labels = []
    while len(inputs) < samples:
        x = rng.uniform(0.0, 1.0, size=dim)
        score = float(normal @ x + offset)
        if abs(score) < margin:
            continue
        inputs.append(x)
        labels.append(1 if score >= 0 else 0)
    return np.array(inputs), np.array(labels, dtype=np.int64)


# -- independent oracles --------------------------------------------------------


def corner_enumeration_bounds(net: Network):
    """Exact first-layer pre-activation ranges over all box corners.

    Affine maps attain extremes at corners, so this is exact for layer 1.
    Limited to 12 inputs (4096 corners).
    """
    if net.input_dim > 12:
        raise ValueError("corner enumeration is limited to 12 inputs")
    layer = net.layers[0]
    if not isinstance(layer, DenseLayer):
        raise ValueError("the first layer must be dense")
    lo = np.full(layer.n_out, np.inf)
    hi = np.full(layer.n_out, -np.inf)
    for corner in itertools.product(*zip(net.input_lo, net.input_hi)):
        y = np.asarray(corner) @ layer.weights + layer.bias
        lo = np.minimum(lo, y)
        hi = np.maximum(hi, y)
    return lo, hi


def _enumerate_tables(levels, n_rows, n_cols):
    """All weight tables with entries from ``levels``; bias row included."""
    combos = itertools.product(levels, repeat=n_rows * n_cols)
    return (np.array(c, dtype=np.float64).reshape(n_rows, n_cols) for c in combos)


def _discrete_loss(outputs, targets, loss):
    if loss == "l1":
        return np.abs(outputs - targets).sum(axis=-1)
    return np.maximum(0.0, 0.5 - targets * outputs).sum(axis=-1)


def ternary_weight_search(layer_sizes, inputs, labels, weight_levels: int = 1, loss: str = "hinge"):
    """Best loss over every ternary weight table for a one-hidden-layer
    sign-activation network on the {-P, 0, P} lattice (the training oracle).

    Semantics mirror the binarized trainer: hidden unit s = w0 + w . x fires
    +1 when s >= 0, the head averages products with scale
    2 / (P * (hidden + 1)).
    """
    sizes = tuple(int(n) for n in layer_sizes)
    if len(sizes) != 3:
        raise ValueError("the exhaustive search covers one-hidden-layer nets")
    n0, n1, n2 = sizes
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.shape[0] == 0:
        return 0.0, None
    p_val = float(weight_levels)
    labels = np.asarray(labels, dtype=np.int64)
    if n2 == 1:
        targets = (2.0 * labels - 1.0).reshape(-1, 1)
    else:
        one_hot = np.zeros((labels.shape[0], n2))
        one_hot[np.arange(labels.shape[0]), labels] = 1.0
        targets = 2.0 * one_hot - 1.0
    levels = (-p_val, 0.0, p_val)
    ones = np.ones((inputs.shape[0], 1))
    data = np.hstack([ones, inputs])  # bias column first
    scale = 2.0 / (p_val * (n1 + 1.0))
    best = np.inf
    best_tables = None
    hidden_tables = list(_enumerate_tables(levels, n0 + 1, n1))
    head_tables = list(_enumerate_tables(levels, n1 + 1, n2))
    hidden_stack = np.stack(hidden_tables)  # (H, n0+1, n1)
    pre = np.einsum("sj,hjk->hsk", data, hidden_stack)
    signs = np.where(pre >= 0.0, 1.0, -1.0)  # (H, samples, n1)
    signed = np.concatenate([np.ones(signs.shape[:2] + (1,)), signs], axis=2)
    for head in head_tables:
        outputs = scale * np.einsum("hsj,jk->hsk", signed, head)
        losses = _discrete_loss(outputs, targets[None, :, :], loss).sum(axis=1)
        idx = int(np.argmin(losses))
        if losses[idx] < best - 1e-12:
            best = float(losses[idx])
            best_tables = (hidden_stack[idx].copy(), head.copy())
    return best, best_tables


def step_lattice_search(layer_sizes, inputs, labels, levels=(-1.0, -0.5, 0.0, 0.5, 1.0), loss: str = "l1"):
    """Best loss over a weight lattice for a one-hidden-layer step-activation
    network with a linear head (the binary-variant training oracle)."""
    sizes = tuple(int(n) for n in layer_sizes)
    if len(sizes) != 3:
        raise ValueError("the exhaustive search covers one-hidden-layer nets")
    n0, n1, n2 = sizes
    inputs = np.asarray(inputs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if n2 == 1:
        targets = labels.astype(np.float64).reshape(-1, 1)
    else:
        targets = np.zeros((labels.shape[0], n2))
        targets[np.arange(labels.shape[0]), labels] = 1.0
    if loss == "hinge":
        targets = 2.0 * targets - 1.0
    ones = np.ones((inputs.shape[0], 1))
    data = np.hstack([ones, inputs])
    best = np.inf
    best_tables = None
    hidden_stack = np.stack(list(_enumerate_tables(levels, n0 + 1, n1)))
    pre = np.einsum("sj,hjk->hsk", data, hidden_stack)
    steps = (pre >= 0.0).astype(np.float64)
    stepped = np.concatenate([np.ones(steps.shape[:2] + (1,)), steps], axis=2)
    for head in _enumerate_tables(levels, n1 + 1, n2):
        outputs = np.einsum("hsj,jk->hsk", stepped, head)
        losses = _discrete_loss(outputs, targets[None, :, :], loss).sum(axis=1)
        idx = int(np.argmin(losses))
        if losses[idx] < best - 1e-12:
            best = float(losses[idx])
            best_tables = (hidden_stack[idx].copy(), head.copy())
    return best, best_tables
