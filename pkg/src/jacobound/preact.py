"""Pre-activation bounds over lp balls by interval propagation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .actbounds import derivative_ranges, global_range
from .model import Network

NORMS = (1.0, 2.0, np.inf)


def parse_norm(p) -> float:
    if isinstance(p, str):
        p = p.strip().lower()
        p = np.inf if p in ("inf", "infinity", "linf") else float(p)
    p = float(p)
    if p not in NORMS:
        raise ValueError(f"unsupported norm p={p}; use 1, 2 or inf")
    return p


def dual_norm(p: float) -> float:
    return {1.0: np.inf, 2.0: 2.0, np.inf: 1.0}[parse_norm(p)]


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float
    p: float = np.inf

    def __post_init__(self):
        c = np.array(self.center, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(c)):
            raise ValueError("ball center must be finite")
        if not (self.radius >= 0 and np.isfinite(self.radius)):
            raise ValueError("ball radius must be a finite non-negative number")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "p", parse_norm(self.p))


@dataclass
class LayerIntervals:
    """Per hidden layer: pre-activation bounds and derivative ranges (lists of vectors)."""

    lower: list
    upper: list
    grad_lower: Optional[list] = field(default=None)
    grad_upper: Optional[list] = field(default=None)

    @property
    def n_unstable(self) -> int:
        if self.grad_lower is None:
            raise ValueError("derivative ranges not computed")
        return int(sum(np.count_nonzero(lo < hi) for lo, hi in zip(self.grad_lower, self.grad_upper)))


def interval_propagate(net: Network, ball: Ball) -> LayerIntervals:
    """Hölder bound on the first layer, signed interval arithmetic afterwards."""
    net.require_plain()
    if ball.center.shape != (net.input_dim,):
        raise ValueError(f"ball center has dimension {ball.center.size}, expected {net.input_dim}")
    q = dual_norm(ball.p)
    w = net.layers[0].weights
    mid = w @ ball.center + net.layers[0].bias
    rad = ball.radius * np.linalg.norm(w, ord=q, axis=1)
    lows, ups = [mid - rad], [mid + rad]
    for l in range(1, net.depth - 1):
        act = net.layers[l - 1].activation
        hl, hu = act(lows[-1]), act(ups[-1])
        layer = net.layers[l]
        wp, wn = np.maximum(layer.weights, 0.0), np.minimum(layer.weights, 0.0)
        lows.append(wp @ hl + wn @ hu + layer.bias)
        ups.append(wp @ hu + wn @ hl + layer.bias)
    return LayerIntervals(lows, ups)


def grad_ranges(net: Network, li: LayerIntervals) -> LayerIntervals:
    glo, ghi = [], []
    for act, l, u in zip(net.activations, li.lower, li.upper):
        lo, hi = derivative_ranges(act, l, u)
        glo.append(lo)
        ghi.append(hi)
    return LayerIntervals(li.lower, li.upper, glo, ghi)


def layer_intervals(net: Network, ball: Ball) -> LayerIntervals:
    return grad_ranges(net, interval_propagate(net, ball))


def global_intervals(net: Network) -> LayerIntervals:
    """Every neuron unconstrained: the worst-case activation pattern."""
    lows, ups, glo, ghi = [], [], [], []
    for layer in net.layers[:-1]:
        n = layer.out_dim
        g = global_range(layer.activation)
        lows.append(np.full(n, -np.inf))
        ups.append(np.full(n, np.inf))
        glo.append(np.full(n, g.lower))
        ghi.append(np.full(n, g.upper))
    return LayerIntervals(lows, ups, glo, ghi)
