"""Deterministic, stream-splittable random number generation.

Every stochastic quantity in this package is drawn from a stream derived
from a ``(base_seed, stream_id)`` pair via the counter-based Philox 4x64
bit generator. Distinct pairs give statistically independent streams, and
the sequence produced by a pair does not depend on process, thread, or
evaluation order, which is what makes whole batch runs bit-reproducible.

Stream id ranges are partitioned so that different consumers can never
collide: simulation ``i`` of a batch uses stream id ``i`` directly, while
bootstrap resampling and internal truth oracles use ids offset by the
reserved bases below.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "BOOTSTRAP_STREAM_BASE",
    "ORACLE_STREAM_BASE",
    "derive_stream",
    "sample_beta",
    "sample_binomial",
    "sample_categorical",
    "sample_normal",
]

# Simulations use stream ids 0 .. n_rep - 1. Anything else draws from a
# disjoint range so growing a batch can never reuse another consumer's
# stream.
BOOTSTRAP_STREAM_BASE = 1 << 48
ORACLE_STREAM_BASE = 1 << 49

_MASK64 = (1 << 64) - 1


def derive_stream(base_seed: int, stream_id: int) -> np.random.Generator:
    """Return the generator for one ``(base_seed, stream_id)`` pair.

    The pair is used verbatim (mod 2**64) as the 128-bit Philox key, so
    identical pairs always reproduce the identical sample sequence and
    distinct pairs select independent counter-based streams.
    """
    key = np.array(
        [int(base_seed) & _MASK64, int(stream_id) & _MASK64], dtype=np.uint64
    )
    return np.random.Generator(np.random.Philox(key=key))


def sample_binomial(rng: np.random.Generator, n: int, p: float, size=None):
    """Binomial(n, p) draws; scalar when ``size`` is None."""
    if n < 0:
        raise ValueError(f"binomial requires n >= 0, got {n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"binomial requires p in [0, 1], got {p}")
    out = rng.binomial(n, p, size=size)
    return int(out) if size is None else out


def sample_beta(rng: np.random.Generator, alpha: float, beta: float, size=None):
    """Beta(alpha, beta) draws; both shapes must be positive."""
    if alpha <= 0.0 or beta <= 0.0:
        raise ValueError(f"beta requires positive shapes, got ({alpha}, {beta})")
    out = rng.beta(alpha, beta, size=size)
    return float(out) if size is None else out


def sample_normal(rng: np.random.Generator, mean: float, sd: float, size=None):
    """Normal(mean, sd) draws; ``sd`` may be zero (degenerate at the mean)."""
    if sd < 0.0:
        raise ValueError(f"normal requires sd >= 0, got {sd}")
    out = rng.normal(mean, sd, size=size)
    return float(out) if size is None else out


def sample_categorical(rng: np.random.Generator, probs, size=None):
    """Index draws from a finite distribution given as a simplex vector.

    Implemented by inverse-CDF lookup on the cumulative probabilities, so
    categories with probability zero are never returned.
    """
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("probs must be a non-empty 1-D vector")
    if np.any(p < 0.0):
        raise ValueError("probs must be non-negative")
    total = p.sum()
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"probs must sum to 1 within 1e-9, got {total!r}")
    cum = np.cumsum(p)
    cum[-1] = 1.0  # guard against accumulated float error at the top end
    u = rng.random(size=size)
    out = np.searchsorted(cum, u, side="right")
    return int(out) if size is None else out
