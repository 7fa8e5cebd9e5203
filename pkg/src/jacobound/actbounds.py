"""Activation derivatives and their ranges over pre-activation intervals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ActivationKind

SIGMOID_FAMILY = ("sigmoid", "tanh", "arctan")


@dataclass(frozen=True)
class GradRange:
    lower: float
    upper: float


def derivative_at(act: ActivationKind, x):
    """Elementwise derivative; relu-type kinks take the right derivative."""
    x = np.asarray(x, dtype=np.float64)
    k = act.kind
    if k in ("relu", "leaky_relu"):
        return np.where(x >= 0, 1.0, act.slope)
    if k == "sigmoid":
        s = 0.5 * (1.0 + np.tanh(0.5 * x))
        return s * (1.0 - s)
    if k == "tanh":
        return 1.0 - np.tanh(x) ** 2
    if k == "arctan":
        return 1.0 / (1.0 + x * x)
    return np.where(x >= 0, 1.0, act.alpha * np.exp(np.minimum(x, 0.0)))


def derivative_ranges(act: ActivationKind, lower, upper):
    """Vectorised derivative range ``(l', u')`` for intervals ``[lower, upper]``."""
    l = np.asarray(lower, dtype=np.float64)
    u = np.asarray(upper, dtype=np.float64)
    if not (np.all(np.isfinite(l)) and np.all(np.isfinite(u))):
        raise ValueError("interval endpoints must be finite")
    if np.any(l > u):
        raise ValueError("interval lower end exceeds upper end")
    k = act.kind
    if k in ("relu", "leaky_relu"):
        a = act.slope
        # u == 0 counts as straddling so the right-derivative convention stays covered
        lo = np.where(l >= 0, 1.0, a)
        hi = np.where(u >= 0, 1.0, a)
        return lo, hi
    if k == "elu":
        return derivative_at(act, l), derivative_at(act, u)
    # unimodal, even derivative peaking at 0
    dl, du = derivative_at(act, l), derivative_at(act, u)
    neg = u <= 0
    pos = l >= 0
    lo = np.where(neg, dl, np.where(pos, du, derivative_at(act, np.maximum(-l, u))))
    hi = np.where(neg, du, np.where(pos, dl, derivative_at(act, 0.0)))
    return lo, hi


def derivative_range(act: ActivationKind, l: float, u: float) -> GradRange:
    lo, hi = derivative_ranges(act, l, u)
    return GradRange(float(lo), float(hi))


def global_range(act: ActivationKind) -> GradRange:
    """Derivative range over the whole real line (closure of)."""
    if act.kind == "leaky_relu":
        return GradRange(act.slope, 1.0)
    return GradRange(0.0, act.derivative_sup)
