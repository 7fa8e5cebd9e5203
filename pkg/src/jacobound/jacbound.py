"""Element-wise Jacobian bounds: the recursive algorithm, its forward variants and baselines.

Indexing: ``ws[t]`` is the weight of layer ``t + 1`` and ``glo[t]``/``ghi[t]``
bound the activation derivative of that layer's output. ``lower[t]`` bounds
``Y_t = d f / d h_t`` (``h_0 = x``), so ``lower[0]`` bounds the Jacobian and
``lower[H - 1] = W_H``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import Network
from .preact import LayerIntervals, Ball, layer_intervals

METHODS = ("recurjac-b", "recurjac-f0", "recurjac-f1", "fastlip", "naive")


@dataclass
class JacobianBounds:
    """``lower[l - 1] <= d f / d h_{l-1} <= upper[l - 1]`` for the depths a method produces.

    Backward methods fill every depth; forward variants only depth 1 (the Jacobian).
    """

    lower: list
    upper: list
    method: str

    @property
    def jacobian(self):
        return self.lower[0], self.upper[0]

    def level(self, l: int):
        return self.lower[l - 1], self.upper[l - 1]


@dataclass(frozen=True)
class MergedMatrices:
    W_check: np.ndarray
    W_hat: np.ndarray


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


class _Chain:
    """A product ``ws[H-1] diag(g[H-2]) ... diag(g[0]) ws[0]`` with interval diagonals."""

    def __init__(self, ws, glo, ghi):
        self.ws = [_f64(w) for w in ws]
        self.glo = [_f64(g) for g in glo]
        self.ghi = [_f64(g) for g in ghi]
        self.H = len(self.ws)
        self.lower = [None] * self.H
        self.upper = [None] * self.H
        self.lower[-1] = self.upper[-1] = self.ws[-1]
        self._cache = None
        self._packed = None

    def _typed(self):
        """Level bounds in the container the active kernel expects; missing depths are empty."""
        key = self.lower + self.upper
        if self._cache is None or any(a is not b for a, b in zip(key, self._cache[0])):
            empty = np.empty((0, 0))
            lows = kernels.as_list([empty if a is None else _f64(a) for a in self.lower])
            ups = kernels.as_list([empty if a is None else _f64(a) for a in self.upper])
            self._cache = (key, lows, ups)
        if self._packed is None:
            self._packed = kernels.as_list(self.ws), kernels.as_list(self.glo), kernels.as_list(self.ghi)
        return self._cache[1], self._cache[2]

    def lower_row(self, j: int, t: int, V: np.ndarray) -> np.ndarray:
        """Lower bound on row ``j`` of ``Y_{t+1} diag(g_t) V``.

        Needs ``lower``/``upper`` for depths above ``t``. Sign-fixed entries of
        ``Y_{t+1}`` are expanded one layer up through the merged matrix, which
        is again a product of the same form, so the walk ends at the output.
        """
        lows, ups = self._typed()
        ws, glo, ghi = self._packed
        return kernels.lower_walk(j, t, _f64(V), ws, lows, ups, glo, ghi)

    def upper_row(self, j: int, t: int, V: np.ndarray) -> np.ndarray:
        return -self.lower_row(j, t, -_f64(V))

    def level_bounds(self, t: int, V, threads: int = 1):
        rows = self.ws[-1].shape[0]
        if kernels.level_walk is not None and threads == 1:
            lows, ups = self._typed()
            ws, glo, ghi = self._packed
            return kernels.level_walk(t, _f64(V), ws, lows, ups, glo, ghi)

        def one(j):
            return self.lower_row(j, t, V), self.upper_row(j, t, V)

        if threads > 1 and rows > 1:
            with ThreadPoolExecutor(threads) as ex:
                out = list(ex.map(one, range(rows)))
        else:
            out = [one(j) for j in range(rows)]
        return np.array([o[0] for o in out]), np.array([o[1] for o in out])

    def run(self, threads: int = 1, clip: bool = True):
        for t in range(self.H - 2, -1, -1):
            lo, hi = self.level_bounds(t, self.ws[t], threads)
            if clip:
                # the interval step from the level above is never tighter in exact
                # arithmetic; intersecting only removes rounding-level excursions
                ilo, ihi = kernels.interval_step(self.lower[t + 1], self.upper[t + 1], self.glo[t], self.ghi[t], self.ws[t])
                lo, hi = np.maximum(lo, ilo), np.minimum(hi, ihi)
                crossed = lo > hi
                lo[crossed], hi[crossed] = ilo[crossed], ihi[crossed]
            self.lower[t], self.upper[t] = lo, hi
        return self


def _chain_of(net: Network, li: LayerIntervals) -> _Chain:
    net.require_plain()
    if li.grad_lower is None:
        raise ValueError("layer intervals lack derivative ranges; call grad_ranges first")
    return _Chain(net.weights, li.grad_lower, li.grad_upper)


def bound_two_layer(A, B, g_lower, g_upper):
    """Bounds on ``A diag(g) B`` over the box ``g_lower <= g <= g_upper``."""
    A, B = _f64(np.atleast_2d(A)), _f64(np.atleast_2d(B))
    if A.shape[1] != B.shape[0] or len(g_lower) != A.shape[1]:
        raise ValueError("dimension mismatch in two-layer bound")
    chain = _Chain([B, A], [g_lower], [g_upper])
    return chain.level_bounds(0, chain.ws[0])


def term_I_bounds(L_out, U_out, W, g_lower, g_upper):
    """Worst-case bounds on the part of ``Y diag(g) W`` carried by sign-uncertain ``Y`` entries."""
    L_out, U_out, W = _f64(np.atleast_2d(L_out)), _f64(np.atleast_2d(U_out)), _f64(W)
    glo, ghi = _f64(g_lower), _f64(g_upper)
    if L_out.shape != U_out.shape or L_out.shape[1] != W.shape[0]:
        raise ValueError("dimension mismatch in term I bounds")
    lo = np.array([kernels.split_row(L_out[j], U_out[j], glo, ghi, W)[0] for j in range(L_out.shape[0])])
    hi = np.array([-kernels.split_row(L_out[j], U_out[j], glo, ghi, -W)[0] for j in range(L_out.shape[0])])
    return lo, hi


def merged_matrices(j, L_out, U_out, W_l, W_lm1, g_lower, g_upper) -> MergedMatrices:
    """Fold the sign-fixed part of row ``j`` into ``W_l`` (one matrix per bound side)."""
    L_out, U_out = _f64(np.atleast_2d(L_out)), _f64(np.atleast_2d(U_out))
    W_l, W_lm1 = _f64(W_l), _f64(W_lm1)
    glo, ghi = _f64(g_lower), _f64(g_upper)
    _, p_lo = kernels.split_row(L_out[j], U_out[j], glo, ghi, W_lm1)
    _, p_hi = kernels.split_row(L_out[j], U_out[j], glo, ghi, -W_lm1)
    return MergedMatrices(W_l @ p_lo, -(W_l @ p_hi))


def compute_lu(net: Network, li: LayerIntervals, jb: JacobianBounds, level: int, weight, rows=None):
    """Bounds on ``Y_{level} diag(g_level) weight``, i.e. depth ``level`` with a substituted weight.

    ``jb`` must hold backward bounds for all depths above ``level``. With
    ``weight = W_level`` this reproduces ``jb.level(level)``.
    """
    chain = _chain_of(net, li)
    H = chain.H
    if not 1 <= level <= H:
        raise ValueError(f"level must lie in [1, {H}]")
    for t in range(level, H):
        if jb.lower[t] is None:
            raise ValueError(f"missing bounds for depth {t + 1}")
        chain.lower[t], chain.upper[t] = _f64(jb.lower[t]), _f64(jb.upper[t])
    t = level - 1
    rows = range(chain.ws[-1].shape[0]) if rows is None else rows
    if t == H - 1:
        w = _f64(weight)
        return w[list(rows)].copy(), w[list(rows)].copy()
    lo = np.array([chain.lower_row(j, t, weight) for j in rows])
    hi = np.array([chain.upper_row(j, t, weight) for j in rows])
    return lo, hi


def recurjac_backward(net: Network, li: LayerIntervals, threads: int = 1, clip: bool = True) -> JacobianBounds:
    chain = _chain_of(net, li).run(threads, clip)
    return JacobianBounds(chain.lower, chain.upper, "recurjac-b")


def _reversed_chain(ws, glo, ghi):
    return _Chain([w.T for w in reversed(ws)], list(reversed(glo)), list(reversed(ghi)))


def recurjac_forward(net: Network, li: LayerIntervals, variant: str = "f0", threads: int = 1) -> JacobianBounds:
    """Same recursion on the transposed product, one pass per input coordinate.

    ``f0`` keeps intermediate bounds of ``d f_l / d x``; ``f1`` keeps
    ``d f_l / d h_1`` and finishes the first layer by interval arithmetic.
    """
    variant = variant.lower().removeprefix("recurjac-")
    if variant not in ("f0", "f1"):
        raise ValueError(f"unknown forward variant {variant!r}")
    chain = _chain_of(net, li)
    ws, glo, ghi = chain.ws, chain.glo, chain.ghi
    if chain.H == 1:
        return JacobianBounds([ws[0].copy()], [ws[0].copy()], f"recurjac-{variant}")
    if variant == "f0":
        rev = _reversed_chain(ws, glo, ghi).run(threads)
        return JacobianBounds([rev.lower[0].T.copy()], [rev.upper[0].T.copy()], "recurjac-f0")
    rev = _reversed_chain(ws[1:], glo[1:], ghi[1:]).run(threads)
    lo, hi = kernels.interval_step(_f64(rev.lower[0].T), _f64(rev.upper[0].T), glo[0], ghi[0], ws[0])
    return JacobianBounds([lo], [hi], "recurjac-f1")


def fastlip(net: Network, li: LayerIntervals) -> JacobianBounds:
    """Layer-by-layer interval product, no sign-fixing recursion."""
    chain = _chain_of(net, li)
    for t in range(chain.H - 2, -1, -1):
        chain.lower[t], chain.upper[t] = kernels.interval_step(
            chain.lower[t + 1], chain.upper[t + 1], chain.glo[t], chain.ghi[t], chain.ws[t]
        )
    return JacobianBounds(chain.lower, chain.upper, "fastlip")


def jacobian_bounds(net: Network, li: LayerIntervals, method: str = "recurjac-b", threads: int = 1) -> JacobianBounds:
    if method == "recurjac-b":
        return recurjac_backward(net, li, threads)
    if method in ("recurjac-f0", "recurjac-f1"):
        return recurjac_forward(net, li, method, threads)
    if method == "fastlip":
        return fastlip(net, li)
    raise ValueError(f"no Jacobian bounds for method {method!r}")


def bounds_for_ball(net: Network, ball: Ball, method: str = "recurjac-b", threads: int = 1) -> JacobianBounds:
    return jacobian_bounds(net, layer_intervals(net, ball), method, threads)
