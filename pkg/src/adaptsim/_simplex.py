"""Shared primitive: distribute probability mass subject to box limits."""

from __future__ import annotations

import numpy as np

from .errors import EngineError


def clamp_simplex(weights, lows, highs, total: float = 1.0) -> np.ndarray:
    """Allocate ``total`` mass proportionally to ``weights`` within limits.

    Iteratively pins every entry that violates its bound to that bound and
    redistributes the remaining mass over the unpinned entries in proportion
    to their original weights. Reaches a fixed point in at most ``len(weights)``
    rounds. Requires ``sum(lows) <= total <= sum(highs)``.
    """
    w = np.asarray(weights, dtype=np.float64).copy()
    lo = np.asarray(lows, dtype=np.float64)
    hi = np.asarray(highs, dtype=np.float64)
    k = w.shape[0]
    if lo.sum() > total + 1e-9 or hi.sum() < total - 1e-9:
        raise EngineError(
            f"infeasible allocation limits: sum(min)={lo.sum():.6g}, "
            f"sum(max)={hi.sum():.6g}, required mass={total:.6g}"
        )
    out = np.empty(k)
    pinned = np.zeros(k, dtype=bool)
    for _ in range(k + 1):
        free = ~pinned
        mass = total - out[pinned].sum()
        wf = w[free]
        wsum = wf.sum()
        if free.any():
            if wsum <= 0.0:
                out[free] = mass / free.sum()  # no signal left: share equally
            else:
                out[free] = mass * wf / wsum
        below = free & (out < lo - 1e-12)
        above = free & (out > hi + 1e-12)
        if not below.any() and not above.any():
            break
        out[below] = lo[below]
        out[above] = hi[above]
        pinned |= below | above
    # tidy float noise so downstream simplex checks are exact to ~1e-15;
    # the correction must never push a zero-weight entry below zero
    free = ~pinned
    if free.any():
        out[free] += (total - out.sum()) / free.sum()
        np.maximum(out, 0.0, out=out)
    return out
