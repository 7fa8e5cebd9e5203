"""Robustness radii from integrated local Lipschitz bounds, and stationary-point exclusion radii."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .jacbound import recurjac_backward
from .lipschitz import local_lipschitz
from .model import Network, forward, margin_network, select_output
from .preact import Ball, global_intervals, layer_intervals, parse_norm

DEFAULT_INTERVALS = 30
SEARCH_STEPS = 20


class CertificationError(ValueError):
    pass


@dataclass
class TargetCertificate:
    target: int
    margin: float
    radius: float
    grid: list = field(default_factory=list)  # (t_i, Lipschitz bound on B[s; t_i]) at the certified radius


@dataclass
class Certificate:
    source: np.ndarray
    label: int
    p: float
    targets: list

    @property
    def radius(self) -> float:
        return min(t.radius for t in self.targets)


@dataclass
class ExclusionResult:
    output: int
    radius: float
    witness: int = -1
    sign: str = ""  # "positive" or "negative"


def integral_grid(net: Network, s, R: float, n: int, p, method: str = "recurjac-b"):
    if n < 1 or not R > 0:
        raise ValueError("need n >= 1 and R > 0")
    ts = [R * i / n for i in range(1, n + 1)]
    return [(t, local_lipschitz(net, Ball(s, t, p), method).value) for t in ts]


def lipschitz_integral_bound(net: Network, s, R: float, n: int = DEFAULT_INTERVALS, p=np.inf, method: str = "recurjac-b") -> float:
    """Right-endpoint Riemann sum of the local Lipschitz bound over radii in (0, R]."""
    grid = integral_grid(net, s, R, n, p, method)
    dt = R / n
    return float(sum(v for _, v in grid) * dt)


def _bisect(pred, r_max: float, steps: int = SEARCH_STEPS) -> float:
    """Largest radius in (0, r_max] passing a monotone predicate; certified end of the bracket."""
    if pred(r_max):
        return r_max
    lo, hi = 0.0, r_max
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return lo


def certify_target(net: Network, s, c: int, j: int, p, r_max: float, n: int = DEFAULT_INTERVALS, method: str = "recurjac-b") -> TargetCertificate:
    g = margin_network(net, c, j)
    margin = float(forward(g, s)[0][0])
    if margin <= 0:
        return TargetCertificate(j, margin, 0.0)
    radius = _bisect(lambda R: lipschitz_integral_bound(g, s, R, n, p, method) < margin, r_max)
    grid = integral_grid(g, s, radius, n, p, method) if radius > 0 else []
    return TargetCertificate(j, margin, radius, grid)


def certify_radius(
    net: Network,
    s,
    c: int,
    targets=None,
    p=np.inf,
    r_max: float = 1.0,
    n: int = DEFAULT_INTERVALS,
    method: str = "recurjac-b",
    threads: int = 1,
    strict_margin: bool = True,
) -> Certificate:
    """Radius within which no target class overtakes ``c``; untargeted when ``targets`` is None."""
    s = np.asarray(s, dtype=np.float64)
    p = parse_norm(p)
    if not r_max > 0:
        raise ValueError("r_max must be positive")
    logits = forward(net, s)[0]
    if int(np.argmax(logits)) != c:
        raise CertificationError(f"input is classified as {int(np.argmax(logits))}, not {c}")
    if targets is None:
        targets = [j for j in range(net.output_dim) if j != c]
    targets = list(targets)

    def one(j):
        return certify_target(net, s, c, j, p, r_max, n, method)

    if threads > 1 and len(targets) > 1:
        with ThreadPoolExecutor(threads) as ex:
            certs = list(ex.map(one, targets))
    else:
        certs = [one(j) for j in targets]
    if strict_margin:
        bad = [t.target for t in certs if t.margin <= 0]
        if bad:
            raise CertificationError(f"non-positive margin against targets {bad}")
    return Certificate(s, c, p, certs)


def _sign_witness(L, U):
    pos = np.flatnonzero(L > 0)
    if pos.size:
        return int(pos[0]), "positive"
    neg = np.flatnonzero(U < 0)
    if neg.size:
        return int(neg[0]), "negative"
    return -1, ""


def exclusion_radius(net: Network, s, j: int, p=np.inf, r_max: float = 1.0) -> ExclusionResult:
    """Largest radius on which some coordinate of grad f_j keeps a fixed sign."""
    s = np.asarray(s, dtype=np.float64)
    f = select_output(net, j)
    gb = recurjac_backward(f, global_intervals(f))
    k, sign = _sign_witness(*gb.jacobian)
    if k >= 0:
        return ExclusionResult(j, np.inf, k, sign)

    def witness(R):
        jb = recurjac_backward(f, layer_intervals(f, Ball(s, R, p)))
        return _sign_witness(*jb.jacobian)

    radius = _bisect(lambda R: witness(R)[0] >= 0, r_max)
    k, sign = witness(radius) if radius > 0 else (-1, "")
    return ExclusionResult(j, radius, k, sign)
