"""Feed-forward network container, JSON I/O, exact evaluation and max-pool expansion."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

ACTIVATION_KINDS = ("relu", "leaky_relu", "sigmoid", "tanh", "arctan", "elu")


class ModelError(ValueError):
    """Raised for malformed or inconsistent network descriptions."""


@dataclass(frozen=True)
class ActivationKind:
    kind: str
    alpha: float = 0.0

    def __post_init__(self):
        if self.kind not in ACTIVATION_KINDS:
            raise ModelError(f"unknown activation kind {self.kind!r}")
        if not np.isfinite(self.alpha):
            raise ModelError("activation alpha must be finite")
        if self.kind == "leaky_relu" and not 0.0 <= self.alpha <= 1.0:
            raise ModelError("leaky_relu requires 0 <= alpha <= 1")
        if self.kind == "elu" and not 0.0 < self.alpha <= 1.0:
            raise ModelError("elu requires 0 < alpha <= 1")

    @property
    def derivative_sup(self) -> float:
        return 0.25 if self.kind == "sigmoid" else 1.0

    @property
    def piecewise_linear(self) -> bool:
        return self.kind in ("relu", "leaky_relu")

    @property
    def slope(self) -> float:
        """Negative-side slope of a piecewise-linear activation."""
        return self.alpha if self.kind == "leaky_relu" else 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k = self.kind
        if k == "relu":
            return np.maximum(x, 0.0)
        if k == "leaky_relu":
            return np.where(x >= 0, x, self.alpha * x)
        if k == "sigmoid":
            return 0.5 * (1.0 + np.tanh(0.5 * x))
        if k == "tanh":
            return np.tanh(x)
        if k == "arctan":
            return np.arctan(x)
        return np.where(x >= 0, x, self.alpha * np.expm1(np.minimum(x, 0.0)))

    def to_json(self) -> dict:
        if self.kind in ("leaky_relu", "elu"):
            return {"kind": self.kind, "alpha": self.alpha}
        return {"kind": self.kind}

    @classmethod
    def from_json(cls, obj) -> "ActivationKind":
        if not isinstance(obj, dict):
            raise ModelError(f"activation must be an object or null, got {obj!r}")
        extra = set(obj) - {"kind", "alpha"}
        if extra:
            raise ModelError(f"unknown activation keys {sorted(extra)}")
        if "kind" not in obj:
            raise ModelError("activation is missing 'kind'")
        kind = obj["kind"]
        if kind in ("leaky_relu", "elu"):
            alpha = obj.get("alpha", 0.01 if kind == "leaky_relu" else 1.0)
        else:
            if "alpha" in obj:
                raise ModelError(f"activation {kind!r} takes no alpha")
            alpha = 0.0
        return cls(kind, float(alpha))


RELU = ActivationKind("relu")


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray
    bias: np.ndarray
    activation: Optional[ActivationKind] = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64, copy=True)
        b = np.array(self.bias, dtype=np.float64, copy=True)
        if w.ndim != 2:
            raise ModelError(f"weights must be a matrix, got shape {w.shape}")
        if b.shape != (w.shape[0],):
            raise ModelError(f"bias shape {b.shape} does not match weights {w.shape}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ModelError("non-finite entry in layer parameters")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class MaxPoolSpec:
    groups: tuple

    def __post_init__(self):
        groups = tuple(tuple(int(i) for i in g) for g in self.groups)
        seen = set()
        for g in groups:
            if len(g) < 2:
                raise ModelError("max-pool groups need at least two neurons")
            if any(i < 0 for i in g):
                raise ModelError("negative max-pool index")
            if seen.intersection(g) or len(set(g)) != len(g):
                raise ModelError("overlapping max-pool groups")
            seen.update(g)
        object.__setattr__(self, "groups", groups)

    def check(self, width: int):
        for g in self.groups:
            if max(g) >= width:
                raise ModelError(f"max-pool index {max(g)} out of range for width {width}")

    def output_dim(self, width: int) -> int:
        return width - sum(len(g) - 1 for g in self.groups)

    def slots(self, width: int) -> list[tuple]:
        """Output slots in order: each group sits at its smallest index, others pass through."""
        owner = {}
        for g in self.groups:
            for i in g:
                owner[i] = g
        out, done = [], set()
        for i in range(width):
            g = owner.get(i)
            if g is None:
                out.append((i,))
            elif g not in done:
                done.add(g)
                out.append(g)
        return out

    def apply(self, h: np.ndarray) -> np.ndarray:
        width = h.shape[-1]
        return np.stack([h[..., list(s)].max(axis=-1) for s in self.slots(width)], axis=-1)


@dataclass(frozen=True)
class Network:
    """H affine layers; hidden layers carry an activation, the last one does not.

    ``maxpools`` maps a 1-based hidden layer index to the pooling applied to
    its post-activation output. Bound computations require a plain network,
    see :func:`expand_maxpool`.
    """

    layers: tuple
    maxpools: tuple = field(default=())

    def __post_init__(self):
        layers = tuple(self.layers)
        pools = tuple((int(l), p) for l, p in self.maxpools)
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "maxpools", pools)
        if not layers:
            raise ModelError("network needs at least one layer")
        if layers[-1].activation is not None:
            raise ModelError("last layer must not have an activation")
        for i, layer in enumerate(layers[:-1]):
            if layer.activation is None:
                raise ModelError(f"hidden layer {i + 1} has no activation")
        pooled = dict(pools)
        if len(pooled) != len(pools):
            raise ModelError("duplicate max-pool layer")
        width = layers[0].out_dim
        for i in range(1, len(layers)):
            if i in pooled:
                pooled[i].check(width)
                width = pooled[i].output_dim(width)
            if layers[i].in_dim != width:
                raise ModelError(
                    f"dimension mismatch: layer {i + 1} expects {layers[i].in_dim} inputs, "
                    f"previous layer gives {width}"
                )
            width = layers[i].out_dim
        for l in pooled:
            if not 1 <= l < len(layers):
                raise ModelError(f"max-pool after_layer {l} is not a hidden layer")

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def weights(self) -> list[np.ndarray]:
        return [layer.weights for layer in self.layers]

    @property
    def activations(self) -> list[ActivationKind]:
        return [layer.activation for layer in self.layers[:-1]]

    def require_plain(self):
        if self.maxpools:
            raise ModelError("network has max-pool layers; call expand_maxpool first")

    def to_json(self) -> dict:
        out = {
            "layers": [
                {
                    "weights": layer.weights.tolist(),
                    "bias": layer.bias.tolist(),
                    "activation": None if layer.activation is None else layer.activation.to_json(),
                }
                for layer in self.layers
            ]
        }
        if self.maxpools:
            out["maxpools"] = [
                {"after_layer": l, "groups": [list(g) for g in p.groups]} for l, p in self.maxpools
            ]
        return out


def network_from_json(obj) -> Network:
    if not isinstance(obj, dict):
        raise ModelError("model file must hold a JSON object")
    extra = set(obj) - {"layers", "maxpools"}
    if extra:
        raise ModelError(f"unknown model keys {sorted(extra)}")
    if not isinstance(obj.get("layers"), list):
        raise ModelError("model is missing the 'layers' list")
    layers = []
    for i, lobj in enumerate(obj["layers"]):
        if not isinstance(lobj, dict):
            raise ModelError(f"layer {i + 1} must be an object")
        extra = set(lobj) - {"weights", "bias", "activation"}
        if extra:
            raise ModelError(f"unknown keys {sorted(extra)} in layer {i + 1}")
        try:
            w = np.array(lobj["weights"], dtype=np.float64)
            b = np.array(lobj["bias"], dtype=np.float64)
        except KeyError as exc:
            raise ModelError(f"layer {i + 1} is missing {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise ModelError(f"layer {i + 1}: {exc}") from None
        act = lobj.get("activation")
        layers.append(Layer(w, b, None if act is None else ActivationKind.from_json(act)))
    pools = []
    for pobj in obj.get("maxpools", []):
        if not isinstance(pobj, dict) or set(pobj) != {"after_layer", "groups"}:
            raise ModelError("maxpools entries need exactly 'after_layer' and 'groups'")
        pools.append((int(pobj["after_layer"]), MaxPoolSpec(pobj["groups"])))
    return Network(layers, pools)


def load_network(path) -> Network:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelError(f"cannot parse {path}: {exc}") from None
    return network_from_json(obj)


def save_network(net: Network, path):
    Path(path).write_text(json.dumps(net.to_json()))


def _as_input(net: Network, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.input_dim:
        raise ModelError(f"input has dimension {x.shape[-1]}, network expects {net.input_dim}")
    return x


def forward(net: Network, x):
    """Evaluate the network; returns ``(output, preacts)`` with one entry per hidden layer.

    ``x`` may carry leading batch dimensions.
    """
    h = _as_input(net, x)
    pools = dict(net.maxpools)
    preacts = []
    for l, layer in enumerate(net.layers[:-1], start=1):
        z = h @ layer.weights.T + layer.bias
        preacts.append(z)
        h = layer.activation(z)
        if l in pools:
            h = pools[l].apply(h)
    last = net.layers[-1]
    return h @ last.weights.T + last.bias, preacts


def jacobian_at(net: Network, x) -> np.ndarray:
    """Exact Jacobian ``W_H diag(s_{H-1}) ... diag(s_1) W_1``; batched over leading axes of x.

    At relu/leaky-relu kinks the right derivative (1) is used.
    """
    from .actbounds import derivative_at

    net.require_plain()
    x = _as_input(net, x)
    _, preacts = forward(net, x)
    ws = net.weights
    jac = np.broadcast_to(ws[-1], x.shape[:-1] + ws[-1].shape)
    for l in range(net.depth - 2, -1, -1):
        d = derivative_at(net.layers[l].activation, preacts[l])
        jac = (jac * d[..., None, :]) @ ws[l]
    return np.array(jac)


def margin_network(net: Network, c: int, j: int) -> Network:
    """Single-output network computing ``f_c - f_j``."""
    n = net.output_dim
    if not (0 <= c < n and 0 <= j < n) or c == j:
        raise ModelError(f"invalid class pair ({c}, {j}) for {n} outputs")
    last = net.layers[-1]
    w = (last.weights[c] - last.weights[j])[None, :]
    b = np.array([last.bias[c] - last.bias[j]])
    return Network(net.layers[:-1] + (Layer(w, b, None),), net.maxpools)


def select_output(net: Network, j: int) -> Network:
    last = net.layers[-1]
    if not 0 <= j < net.output_dim:
        raise ModelError(f"output index {j} out of range")
    return Network(net.layers[:-1] + (Layer(last.weights[j : j + 1], last.bias[j : j + 1]),), net.maxpools)


def _pool_stage(slots: Sequence[tuple]):
    """One tree level of pairwise maxima.

    ``slots`` are lists of value indices still to be reduced. Returns the
    relu pre-activation map ``A`` (over current values), the readout ``B``
    that rebuilds the next values from the relu outputs, and the next slots.
    """
    rows, readout, nxt = [], [], []
    nvals = sum(len(s) for s in slots)
    for s in slots:
        s = list(s)
        new = []
        while len(s) >= 2:
            a, b = s.pop(0), s.pop(0)
            base = len(rows)
            for coef in ((a, 1.0, b, -1.0), (b, 1.0, None, 0.0), (b, -1.0, None, 0.0)):
                row = np.zeros(nvals)
                row[coef[0]] += coef[1]
                if coef[2] is not None:
                    row[coef[2]] += coef[3]
                rows.append(row)
            # max(a, b) = relu(a - b) + relu(b) - relu(-b)
            readout.append({base: 1.0, base + 1: 1.0, base + 2: -1.0})
            new.append(None)
        if s:
            a = s.pop()
            base = len(rows)
            for sign in (1.0, -1.0):
                row = np.zeros(nvals)
                row[a] = sign
                rows.append(row)
            readout.append({base: 1.0, base + 1: -1.0})
            new.append(None)
        nxt.append(new)
    A = np.array(rows)
    B = np.zeros((len(readout), len(rows)))
    for i, coefs in enumerate(readout):
        for k, v in coefs.items():
            B[i, k] = v
    # renumber the next-level slots over the readout values
    out_slots, pos = [], 0
    for new in nxt:
        out_slots.append(tuple(range(pos, pos + len(new))))
        pos += len(new)
    return A, B, out_slots


def expand_maxpool(net: Network, pools=None) -> Network:
    """Replace max-pooling by equivalent relu layers (log2 of the group size many).

    ``pools`` defaults to the network's own pooling table. Passing a list of
    ``(after_layer, MaxPoolSpec)`` instead takes ``net`` as a plain sequence
    of layers whose widths already account for the pooling.
    """
    if pools is None:
        layers, pools = net.layers, list(net.maxpools)
    else:
        if isinstance(net, Network):
            net.require_plain()
        layers, pools = tuple(net.layers if isinstance(net, Network) else net), list(pools)
        Network(layers, pools)  # validates indices and dimensions
    pooled = dict(pools)
    out = []
    carry = None  # readout matrix to fold into the next affine layer
    for l, layer in enumerate(layers, start=1):
        w, b = layer.weights, layer.bias
        if carry is not None:
            w = w @ carry
            carry = None
        if l not in pooled:
            out.append(Layer(w, b, layer.activation))
            continue
        out.append(Layer(w, b, layer.activation))
        slots = [tuple(s) for s in pooled[l].slots(layer.out_dim)]
        readout = np.eye(layer.out_dim)
        while any(len(s) > 1 for s in slots):
            A, B, slots = _pool_stage(slots)
            out.append(Layer(A @ readout, np.zeros(A.shape[0]), RELU))
            readout = B
        carry = readout
    return Network(out)
