"""Lipschitz constants from Jacobian bounds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .jacbound import METHODS, JacobianBounds, _chain_of, jacobian_bounds
from .model import Network
from .preact import Ball, LayerIntervals, layer_intervals, parse_norm


class ConvergenceError(RuntimeError):
    def __init__(self, message, upper, residual):
        super().__init__(message)
        self.upper = upper
        self.residual = residual


@dataclass(frozen=True)
class SignPartition:
    positive: np.ndarray  # L >= 0
    negative: np.ndarray  # U <= 0, not already positive
    uncertain: np.ndarray  # L < 0 < U


@dataclass(frozen=True)
class LipschitzResult:
    value: float
    p: float
    radius: float
    method: str


def worst_case_matrix(jb: JacobianBounds) -> np.ndarray:
    L, U = jb.jacobian
    return np.maximum(np.abs(L), np.abs(U))


def sign_partition(L, U) -> SignPartition:
    pos = L >= 0
    neg = (U <= 0) & ~pos
    return SignPartition(pos, neg, ~(pos | neg))


def spectral_norm_upper(M, tol: float = 1e-10, max_iter: int = 10_000) -> float:
    """Certified upper bound on ``||M||_2`` for entry-wise non-negative ``M``.

    Power iteration on ``A = M^T M`` from the all-ones vector. For a positive
    iterate ``x`` the ratio ``max_i (A x)_i / x_i`` bounds the largest
    eigenvalue from above, the Rayleigh quotient from below; iteration stops
    when they agree to ``tol`` (relative).
    """
    M = np.asarray(M, dtype=np.float64)
    if np.any(M < 0):
        raise ValueError("spectral_norm_upper expects a non-negative matrix")
    A = M.T @ M
    live = np.any(A > 0, axis=1)
    if not live.any():
        return 0.0
    A = A[np.ix_(live, live)]
    x = np.ones(A.shape[0]) / np.sqrt(A.shape[0])
    upper = np.inf
    gap = np.inf
    for _ in range(max_iter):
        y = A @ x
        lower = float(x @ y)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(x > 0, y / x, np.inf)
        upper = min(upper, float(ratio.max()))
        gap = upper - lower
        if gap <= tol * upper:
            return float(np.sqrt(upper))
        x = y / np.linalg.norm(y)
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} steps (relative gap {gap / upper:.3e})",
        float(np.sqrt(upper)),
        gap / upper,
    )


def lipschitz_p(M, p) -> float:
    """Induced ``p -> p`` norm of the worst-case matrix."""
    p = parse_norm(p)
    M = np.asarray(M, dtype=np.float64)
    if p == 1.0:
        return float(np.abs(M).sum(axis=0).max())
    if p == np.inf:
        return float(np.abs(M).sum(axis=1).max())
    return spectral_norm_upper(np.abs(M))


def lipschitz_inf_refined(net: Network, jb: JacobianBounds, li: LayerIntervals, backward: JacobianBounds = None) -> float:
    """Row-wise l-inf refinement: sign-known columns are summed with their signs before bounding.

    ``jb`` supplies the sign partition and worst-case matrix; the recursion
    for the signed sum needs backward bounds at depths >= 2, taken from
    ``backward`` (defaults to ``jb``).
    """
    M = worst_case_matrix(jb)
    row_sums = M.sum(axis=1)
    if net.depth == 1:
        return float(row_sums.max())
    back = jb if backward is None else backward
    chain = _chain_of(net, li)
    for t in range(1, chain.H):
        if back.lower[t] is None:
            raise ValueError("refinement needs backward bounds for every depth")
        chain.lower[t], chain.upper[t] = back.lower[t], back.upper[t]
    L, U = jb.jacobian
    part = sign_partition(L, U)
    W1 = chain.ws[0]
    best = -np.inf
    for j in range(M.shape[0]):
        tilde = M[j, part.uncertain[j]].sum()
        if part.positive[j].any() or part.negative[j].any():
            w_hat = W1[:, part.positive[j]].sum(axis=1) - W1[:, part.negative[j]].sum(axis=1)
            signed = chain.upper_row(j, 0, w_hat[:, None])[0]
            value = min(tilde + signed, row_sums[j])
        else:
            value = row_sums[j]
        best = max(best, value)
    return float(best)


def naive_global_lipschitz(net: Network, p) -> float:
    """Product of layer operator norms times the activations' derivative bounds."""
    p = parse_norm(p)
    net.require_plain()
    ord_ = {1.0: 1, 2.0: 2, np.inf: np.inf}[p]
    value = 1.0
    for w in net.weights:
        value *= float(np.linalg.norm(w, ord=ord_))
    for act in net.activations:
        value *= act.derivative_sup
    return value


def lipschitz_from_bounds(net: Network, li: LayerIntervals, jb: JacobianBounds, p, threads: int = 1) -> float:
    p = parse_norm(p)
    M = worst_case_matrix(jb)
    if p != np.inf or not jb.method.startswith("recurjac"):
        return lipschitz_p(M, p)
    if jb.method == "recurjac-b":
        return lipschitz_inf_refined(net, jb, li)
    back = jacobian_bounds(net, li, "recurjac-b", threads)
    return lipschitz_inf_refined(net, jb, li, backward=back)


def local_lipschitz(net: Network, ball: Ball, method: str = "recurjac-b", threads: int = 1) -> LipschitzResult:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    if method == "naive":
        return LipschitzResult(naive_global_lipschitz(net, ball.p), ball.p, ball.radius, method)
    li = layer_intervals(net, ball)
    jb = jacobian_bounds(net, li, method, threads)
    return LipschitzResult(lipschitz_from_bounds(net, li, jb, ball.p, threads), ball.p, ball.radius, method)
