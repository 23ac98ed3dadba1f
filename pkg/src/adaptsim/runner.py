"""Batch execution of independent trial simulations with persistence.

Simulation ``i`` of a batch always uses RNG stream ``(base_seed, i)``, so
results are identical whatever the worker count, and a batch can be grown
later: rerunning with a larger ``n_rep`` reuses every stored simulation and
only executes the missing tail.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from .design import ValidatedSpec
from .engine import STOP_SUPERIORITY, TrialResult, run_trial
from .errors import StoreError
from .metrics import PerformanceSummary, summarize_batch
from .rng import derive_stream
from .store import RunManifest, load_batch_file, save_batch_file

__all__ = ["Batch", "run_batch"]


@dataclass
class Batch:
    """A set of simulated trials sharing one spec and base seed."""

    spec: ValidatedSpec
    base_seed: int
    results: list[TrialResult]
    label: str = ""
    n_loaded: int = 0  # how many results came from the store
    manifest: Optional[RunManifest] = field(default=None, repr=False)

    @property
    def n_rep(self) -> int:
        return len(self.results)

    def prob_superior(self) -> float:
        return sum(r.final_status == STOP_SUPERIORITY for r in self.results) / len(self.results)

    def summarize(self, strategy="none", **kwargs) -> PerformanceSummary:
        """Performance metrics using the spec's scenario truths."""
        kwargs.setdefault("true_values", self.spec.truth_values())
        return summarize_batch(self.results, strategy, **kwargs)


def _run_range(spec: ValidatedSpec, base_seed: int, start: int, stop: int) -> list[TrialResult]:
    return [run_trial(spec, derive_stream(base_seed, i)) for i in range(start, stop)]


def _run_indices(spec, base_seed, start, stop, workers) -> list[TrialResult]:
    count = stop - start
    if count <= 0:
        return []
    if not workers or workers <= 1 or count < 4:
        return _run_range(spec, base_seed, start, stop)
    chunk = max(1, -(-count // (workers * 4)))
    bounds = list(range(start, stop, chunk)) + [stop]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_run_range, spec, base_seed, lo, hi)
            for lo, hi in zip(bounds, bounds[1:])
        ]
        out: list[TrialResult] = []
        for fut in futures:  # submission order == simulation-index order
            out.extend(fut.result())
    return out


def run_batch(
    spec: ValidatedSpec,
    n_rep: int,
    base_seed: int,
    workers: Optional[int] = None,
    store_path=None,
    label: str = "",
) -> Batch:
    """Run (or resume) ``n_rep`` simulations of ``spec``.

    With a ``store_path``, results persist across invocations: a matching
    stored batch is loaded instead of recomputed, a shorter request returns
    the stored prefix, and a longer request extends the store by running
    only the missing simulations. A stored batch whose fingerprint or base
    seed differs from the request is an error.
    """
    if n_rep < 1:
        raise ValueError("n_rep must be at least 1")
    workers = workers if workers is not None else (os.cpu_count() or 1)

    stored: list[TrialResult] = []
    if store_path is not None and os.path.exists(store_path):
        stored_spec, stored, manifest = load_batch_file(store_path)
        if manifest.fingerprint != spec.fingerprint():
            raise StoreError(
                f"{store_path}: stored batch is for a different design "
                f"(fingerprint {manifest.fingerprint[:12]}...)"
            )
        if manifest.base_seed != base_seed:
            raise StoreError(
                f"{store_path}: stored base_seed {manifest.base_seed} != requested {base_seed}"
            )
        label = label or manifest.label
        if len(stored) >= n_rep:
            return Batch(spec, base_seed, stored[:n_rep], label, n_loaded=n_rep, manifest=manifest)

    new = _run_indices(spec, base_seed, len(stored), n_rep, workers)
    results = stored + new
    manifest = RunManifest(
        fingerprint=spec.fingerprint(),
        n_rep=len(results),
        base_seed=base_seed,
        label=label,
        timestamp=time.strftime("%Y-%m-%dT%H:%M:%S"),
    )
    if store_path is not None:
        save_batch_file(store_path, spec, results, manifest)
    return Batch(spec, base_seed, results, label, n_loaded=len(stored), manifest=manifest)
