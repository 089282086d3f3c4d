"""Feed-forward network container, file I/O, and exact forward evaluation.

Networks are ordered lists of dense and pooling layers over an input box.
The forward pass here is the ground truth that every MIP encoding and every
bound procedure is tested against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "linear", "step", "sign")


class NetworkParseError(ValueError):
    """The network document is malformed."""


class DimensionMismatchError(ValueError):
    """Adjacent layer dimensions do not chain."""


class IntervalError(ValueError):
    """An interval has its lower end above its upper end."""


@dataclass(frozen=True)
class DenseLayer:
    """Affine map plus elementwise activation.

    ``weights[j, i]`` connects input coordinate j to unit i, so the
    pre-activation of unit i is ``sum_j weights[j, i] * x[j] + bias[i]``.
    """

    weights: np.ndarray
    bias: np.ndarray
    activation: str = "relu"

    kind = "dense"

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64))
        object.__setattr__(self, "bias", np.asarray(self.bias, dtype=np.float64))
        if self.weights.ndim != 2:
            raise NetworkParseError("dense weights must be a matrix")
        if self.bias.shape != (self.weights.shape[1],):
            raise DimensionMismatchError(
                "bias length %d does not match %d units"
                % (self.bias.shape[0], self.weights.shape[1])
            )
        if self.activation not in ACTIVATIONS:
            raise NetworkParseError("unknown activation %r" % (self.activation,))

    @property
    def n_in(self) -> int:
        return self.weights.shape[0]

    @property
    def n_out(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class PoolLayer:
    """Base for pooling layers; pools are explicit 0-based index groups."""

    pools: tuple

    kind = "pool"

    def __post_init__(self):
        object.__setattr__(
            self, "pools", tuple(tuple(int(j) for j in pool) for pool in self.pools)
        )
        for p, pool in enumerate(self.pools):
            if len(pool) == 0:
                raise NetworkParseError("pool %d is empty" % p)

    @property
    def n_in(self) -> int:
        return 1 + max(j for pool in self.pools for j in pool)

    @property
    def n_out(self) -> int:
        return len(self.pools)


class MaxPoolLayer(PoolLayer):
    kind = "maxpool"


class AvgPoolLayer(PoolLayer):
    kind = "avgpool"


@dataclass(frozen=True)
class Network:
    """Validated network: input box plus layers indexed l = 1..L."""

    input_dim: int
    input_lo: np.ndarray
    input_hi: np.ndarray
    layers: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "input_lo", np.asarray(self.input_lo, dtype=np.float64))
        object.__setattr__(self, "input_hi", np.asarray(self.input_hi, dtype=np.float64))
        object.__setattr__(self, "layers", tuple(self.layers))
        self._validate()

    def _validate(self):
        if self.input_dim <= 0:
            raise NetworkParseError("input_dim must be positive")
        if self.input_lo.shape != (self.input_dim,) or self.input_hi.shape != (self.input_dim,):
            raise DimensionMismatchError("input box length does not match input_dim")
        bad = np.nonzero(self.input_lo > self.input_hi)[0]
        if bad.size:
            raise IntervalError(
                "input box coordinate %d has lower %r above upper %r"
                % (bad[0], float(self.input_lo[bad[0]]), float(self.input_hi[bad[0]]))
            )
        size = self.input_dim
        for l, layer in enumerate(self.layers, start=1):
            if isinstance(layer, PoolLayer):
                seen = sorted(j for pool in layer.pools for j in pool)
                if len(set(seen)) != len(seen):
                    raise NetworkParseError("layer %d pools overlap" % l)
                if seen != list(range(size)):
                    raise DimensionMismatchError(
                        "layer %d pools do not partition the %d inputs" % (l, size)
                    )
            elif layer.n_in != size:
                raise DimensionMismatchError(
                    "layer %d expects %d inputs but the previous layer yields %d"
                    % (l, layer.n_in, size)
                )
            size = layer.n_out

    @property
    def layer_sizes(self):
        """Sizes n^0 .. n^L including the input layer."""
        sizes = [self.input_dim]
        for layer in self.layers:
            sizes.append(layer.n_out)
        return sizes

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]


@dataclass(frozen=True)
class Activations:
    """Per-layer pre-activations (None for pools) and post-activations."""

    x0: np.ndarray
    pre: tuple
    post: tuple

    @property
    def output(self) -> np.ndarray:
        return self.post[-1] if self.post else self.x0


def _apply_activation(kind: str, y: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.maximum(y, 0.0)
    if kind == "linear":
        return y
    if kind == "step":
        return (y >= 0.0).astype(np.float64)
    if kind == "sign":
        return np.where(y >= 0.0, 1.0, -1.0)
    raise NetworkParseError("unknown activation %r" % (kind,))


def forward(net: Network, x0) -> Activations:
    """Evaluate the exact forward pass.

    Inputs are not clipped to the input box; only the length is checked.
    """
    x = np.asarray(x0, dtype=np.float64)
    if x.shape != (net.input_dim,):
        raise DimensionMismatchError(
            "input length %d does not match input_dim %d" % (x.size, net.input_dim)
        )
    pre = []
    post = []
    for layer in net.layers:
        if isinstance(layer, DenseLayer):
            y = x @ layer.weights + layer.bias
            pre.append(y)
            x = _apply_activation(layer.activation, y)
        elif isinstance(layer, MaxPoolLayer):
            pre.append(None)
            x = np.array([np.max(x[list(pool)]) for pool in layer.pools])
        elif isinstance(layer, AvgPoolLayer):
            pre.append(None)
            x = np.array([np.mean(x[list(pool)]) for pool in layer.pools])
        else:
            raise NetworkParseError("unknown layer kind %r" % (layer,))
        post.append(x)
    return Activations(x0=np.array(x0, dtype=np.float64), pre=tuple(pre), post=tuple(post))


def _layer_to_doc(layer) -> dict:
    if isinstance(layer, DenseLayer):
        return {
            "kind": "dense",
            "weights": layer.weights.tolist(),
            "bias": layer.bias.tolist(),
            "activation": layer.activation,
        }
    return {"kind": layer.kind, "pools": [list(pool) for pool in layer.pools]}


def _layer_from_doc(doc: dict, index: int):
    try:
        kind = doc["kind"]
    except (TypeError, KeyError):
        raise NetworkParseError("layer %d has no kind" % index)
    if kind == "dense":
        try:
            weights = doc["weights"]
            bias = doc["bias"]
        except KeyError as exc:
            raise NetworkParseError("layer %d misses field %s" % (index, exc))
        return DenseLayer(
            weights=np.asarray(weights, dtype=np.float64),
            bias=np.asarray(bias, dtype=np.float64),
            activation=doc.get("activation", "relu"),
        )
    if kind == "maxpool":
        return MaxPoolLayer(pools=tuple(doc["pools"]))
    if kind == "avgpool":
        return AvgPoolLayer(pools=tuple(doc["pools"]))
    raise NetworkParseError("layer %d has unknown kind %r" % (index, kind))


def network_to_doc(net: Network) -> dict:
    box = [[float(lo), float(hi)] for lo, hi in zip(net.input_lo, net.input_hi)]
    return {
        "input_dim": net.input_dim,
        "input_box": box,
        "layers": [_layer_to_doc(layer) for layer in net.layers],
    }


def network_from_doc(doc: dict) -> Network:
    if not isinstance(doc, dict):
        raise NetworkParseError("network document must be an object")
    for key in ("input_dim", "input_box", "layers"):
        if key not in doc:
            raise NetworkParseError("missing field %r" % key)
    input_dim = int(doc["input_dim"])
    box = doc["input_box"]
    if (
        isinstance(box, (list, tuple))
        and len(box) == 2
        and all(isinstance(v, (int, float)) for v in box)
    ):
        # Scalar pair broadcast to every input coordinate.
        lo = np.full(input_dim, float(box[0]))
        hi = np.full(input_dim, float(box[1]))
    else:
        pairs = [[float(v) for v in pair] for pair in box]
        if len(pairs) != input_dim:
            raise DimensionMismatchError(
                "input_box has %d entries for input_dim %d" % (len(pairs), input_dim)
            )
        lo = np.array([p[0] for p in pairs])
        hi = np.array([p[1] for p in pairs])
    layers = tuple(
        _layer_from_doc(layer_doc, index)
        for index, layer_doc in enumerate(doc["layers"], start=1)
    )
    return Network(input_dim=input_dim, input_lo=lo, input_hi=hi, layers=layers)


def save_network(net: Network, path) -> None:
    with open(path, "w") as fh:
        json.dump(network_to_doc(net), fh, indent=2)
        fh.write("\n")


def load_network(path) -> Network:
    """Read and validate a network document."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise NetworkParseError("cannot parse %s: %s" % (path, exc))
    return network_from_doc(doc)
