"""Brute-force references: corner enumeration, ball sampling, finite differences."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Network, jacobian_at
from .preact import Ball, LayerIntervals, parse_norm


class EnumerationError(ValueError):
    pass


@dataclass
class PatternEnumeration:
    unstable: list  # (layer, index) pairs, 1-based layer
    lower: np.ndarray
    upper: np.ndarray

    @property
    def n_patterns(self) -> int:
        return 2 ** len(self.unstable)


def enumerate_exact(net: Network, li: LayerIntervals, cap: int = 16, chunk: int = 4096) -> PatternEnumeration:
    """Exact entry-wise extrema of ``W_H S_{H-1} ... S_1 W_1`` over independent diagonal boxes.

    Each entry is multilinear in the diagonal variables, so extrema sit at
    box corners; only unstable neurons need both corners.
    """
    net.require_plain()
    for act in net.activations:
        if not act.piecewise_linear:
            raise EnumerationError(f"enumeration needs relu/leaky_relu layers, got {act.kind}")
    unstable = [
        (l + 1, int(i))
        for l, (lo, hi) in enumerate(zip(li.grad_lower, li.grad_upper))
        for i in np.flatnonzero(lo < hi)
    ]
    if len(unstable) > cap:
        raise EnumerationError(f"{len(unstable)} unstable neurons exceed the cap of {cap}")
    ws = net.weights
    total = 2 ** len(unstable)
    lower = np.full((net.output_dim, net.input_dim), np.inf)
    upper = np.full((net.output_dim, net.input_dim), -np.inf)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(total, start + chunk))
        bits = (codes[:, None] >> np.arange(len(unstable))) & 1
        diags = [np.broadcast_to(lo, (len(codes), lo.size)).copy() for lo in li.grad_lower]
        for b, (l, i) in enumerate(unstable):
            diags[l - 1][:, i] = np.where(bits[:, b] == 1, li.grad_upper[l - 1][i], li.grad_lower[l - 1][i])
        prod = np.broadcast_to(ws[0], (len(codes),) + ws[0].shape)
        for l in range(1, net.depth):
            prod = ws[l] @ (diags[l - 1][:, :, None] * prod)
        lower = np.minimum(lower, prod.min(axis=0))
        upper = np.maximum(upper, prod.max(axis=0))
    return PatternEnumeration(unstable, lower, upper)


def sample_ball(ball: Ball, n: int, rng) -> np.ndarray:
    """Uniform samples from the closed lp ball (n x dim)."""
    d = ball.center.size
    p = parse_norm(ball.p)
    if p == np.inf:
        z = rng.uniform(-1.0, 1.0, size=(n, d))
    elif p == 2.0:
        g = rng.standard_normal((n, d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        z = g * rng.uniform(size=(n, 1)) ** (1.0 / d)
    else:
        e = rng.exponential(size=(n, d + 1))
        z = e[:, :d] / e.sum(axis=1, keepdims=True) * rng.choice([-1.0, 1.0], size=(n, d))
    return ball.center + ball.radius * z


def induced_norm(J, p) -> np.ndarray:
    """Induced p -> p norms of a stack of matrices (..., m, n)."""
    p = parse_norm(p)
    if p == 1.0:
        return np.abs(J).sum(axis=-2).max(axis=-1)
    if p == np.inf:
        return np.abs(J).sum(axis=-1).max(axis=-1)
    return np.linalg.norm(J, ord=2, axis=(-2, -1))


def sample_lipschitz_lower(net: Network, ball: Ball, samples: int = 1000, seed: int = 0) -> float:
    """Largest Jacobian norm seen at the center and at uniform samples: a lower bound."""
    if samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    xs = ball.center[None, :]
    if samples > 1:
        xs = np.vstack([xs, sample_ball(ball, samples - 1, rng)])
    return float(induced_norm(jacobian_at(net, xs), ball.p).max())


def finite_diff_jacobian(net: Network, x, h: float = 1e-4) -> np.ndarray:
    from .model import forward

    if h <= 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=np.float64)
    eye = np.eye(x.size) * h
    plus, _ = forward(net, x + eye)
    minus, _ = forward(net, x - eye)
    return ((plus - minus) / (2.0 * h)).T
