"""Sign-selection kernels shared by the Jacobian bound algorithms.

Two implementations of each kernel live here: fused loops compiled with
numba, and a vectorised numpy path. Set ``JACOBOUND_DISABLE_NUMBA=1`` (or run
without numba installed) to use the numpy path. Both return the same values
up to summation order.
"""

from __future__ import annotations

import os

import numpy as np

try:
    if os.environ.get("JACOBOUND_DISABLE_NUMBA", "").strip() not in ("", "0"):
        raise ImportError("numba disabled by JACOBOUND_DISABLE_NUMBA")
    from numba import njit
except ImportError:
    njit = None

BACKEND = "numpy" if njit is None else "numba"


def as_list(arrays):
    """Container for a sequence of float64 arrays handed to ``lower_walk``.

    The compiled kernels take homogeneous tuples, so every entry is a fresh
    writable C-ordered copy (read-only arrays would change the tuple type).
    """
    return tuple(np.array(a, dtype=np.float64, order="C") for a in arrays)


def split_row_numpy(ylo, yhi, glo, ghi, V):
    """Lower-side split of ``y diag(g) V`` for one output row.

    ``ylo``/``yhi`` bound the row ``y``; ``glo``/``ghi`` bound the diagonal.
    Entries of ``y`` straddling zero are worst-cased into ``term`` (length m);
    sign-fixed entries get the derivative that minimises ``y_r g_r V_rk`` and
    come back as ``P`` (n x m) so the caller can expand ``y`` further.
    """
    unstable = (ylo < 0.0) & (yhi > 0.0)
    vp = np.maximum(V, 0.0)
    vn = np.minimum(V, 0.0)
    gu = np.where(unstable, ghi, 0.0)
    term = (gu * ylo) @ vp + (gu * yhi) @ vn
    pos = (ylo >= 0.0)[:, None]
    coef = np.where((V > 0.0) == pos, glo[:, None], ghi[:, None])
    P = coef * V
    P[unstable] = 0.0
    return term, P


def interval_step_numpy(lo, hi, glo, ghi, V):
    """Interval bounds of ``Y diag(g) V`` with ``Y`` in ``[lo, hi]`` (rows x n)."""
    a = np.minimum(lo * glo, lo * ghi)
    b = np.maximum(hi * glo, hi * ghi)
    vp = np.maximum(V, 0.0)
    vn = np.minimum(V, 0.0)
    return a @ vp + b @ vn, b @ vp + a @ vn


def lower_walk_numpy(j, t, V, ws, lows, ups, glo, ghi):
    """Lower bound on row ``j`` of ``Y_{t+1} diag(g_t) V`` (see ``_Chain.lower_row``).

    ``lows[d]``/``ups[d]`` bound ``Y_d`` and must be filled for ``d > t``.
    """
    H = len(ws)
    if t == H - 1:
        return V[j].copy()
    acc = np.zeros(V.shape[1])
    while True:
        ylo, yhi = lows[t + 1][j], ups[t + 1][j]
        term, P = split_row_numpy(ylo, yhi, glo[t], ghi[t], V)
        acc += term
        if t + 1 == H - 1:
            return acc + ws[H - 1][j] @ P
        # rows of P for sign-uncertain entries are zero; skip them in the product
        keep = np.flatnonzero((ylo >= 0.0) | (yhi <= 0.0))
        if keep.size == 0:
            return acc
        if keep.size == P.shape[0]:
            V = ws[t + 1] @ P
        else:
            V = ws[t + 1][:, keep] @ P[keep]
        t += 1


if njit is not None:

    @njit(cache=True, nogil=True)
    def split_row_numba(ylo, yhi, glo, ghi, V):
        n, m = V.shape
        term = np.zeros(m)
        P = np.empty((n, m))
        for r in range(n):
            lo = ylo[r]
            hi = yhi[r]
            if lo < 0.0 and hi > 0.0:
                cl = ghi[r] * lo
                ch = ghi[r] * hi
                for k in range(m):
                    v = V[r, k]
                    P[r, k] = 0.0
                    if v > 0.0:
                        term[k] += cl * v
                    elif v < 0.0:
                        term[k] += ch * v
            else:
                pos = lo >= 0.0
                a = glo[r]
                b = ghi[r]
                for k in range(m):
                    v = V[r, k]
                    if (v > 0.0) == pos:
                        P[r, k] = a * v
                    else:
                        P[r, k] = b * v
        return term, P

    @njit(cache=True, nogil=True)
    def interval_step_numba(lo, hi, glo, ghi, V):
        rows, n = lo.shape
        m = V.shape[1]
        L = np.zeros((rows, m))
        U = np.zeros((rows, m))
        for j in range(rows):
            for r in range(n):
                a = min(lo[j, r] * glo[r], lo[j, r] * ghi[r])
                b = max(hi[j, r] * glo[r], hi[j, r] * ghi[r])
                for k in range(m):
                    v = V[r, k]
                    if v > 0.0:
                        L[j, k] += a * v
                        U[j, k] += b * v
                    else:
                        L[j, k] += b * v
                        U[j, k] += a * v
        return L, U

    @njit(cache=True, nogil=True)
    def lower_walk_numba(j, t, V, ws, lows, ups, glo, ghi):
        H = len(ws)
        if t == H - 1:
            return V[j].copy()
        m = V.shape[1]
        acc = np.zeros(m)
        while True:
            ylo = lows[t + 1][j]
            yhi = ups[t + 1][j]
            term, P = split_row_numba(ylo, yhi, glo[t], ghi[t], V)
            acc += term
            W = ws[t + 1]
            if t + 1 == H - 1:
                for r in range(P.shape[0]):
                    w = W[j, r]
                    if w != 0.0:
                        for k in range(m):
                            acc[k] += w * P[r, k]
                return acc
            V = np.zeros((W.shape[0], m))
            kept = False
            for r in range(P.shape[0]):
                if ylo[r] < 0.0 and yhi[r] > 0.0:
                    continue
                kept = True
                for i in range(W.shape[0]):
                    w = W[i, r]
                    if w != 0.0:
                        for k in range(m):
                            V[i, k] += w * P[r, k]
            if not kept:
                return acc
            t += 1

    @njit(cache=True, nogil=True)
    def level_walk_numba(t, V, ws, lows, ups, glo, ghi):
        rows = ws[len(ws) - 1].shape[0]
        lo = np.empty((rows, V.shape[1]))
        hi = np.empty((rows, V.shape[1]))
        neg = -V
        for j in range(rows):
            lo[j] = lower_walk_numba(j, t, V, ws, lows, ups, glo, ghi)
            hi[j] = -lower_walk_numba(j, t, neg, ws, lows, ups, glo, ghi)
        return lo, hi

    split_row = split_row_numba
    interval_step = interval_step_numba
    lower_walk = lower_walk_numba
    level_walk = level_walk_numba
else:
    split_row_numba = interval_step_numba = lower_walk_numba = level_walk_numba = None
    split_row = split_row_numpy
    interval_step = interval_step_numpy
    lower_walk = lower_walk_numpy
    level_walk = None
