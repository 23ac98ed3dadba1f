"""Stopping-threshold calibration via a Gaussian-process surrogate.

``calibrate`` searches for a superiority threshold whose batch-level
metric (by default the probability of stopping for superiority under the
supplied spec, i.e. the type 1 error in a null scenario) lands in a
tolerance band around a target. Every candidate threshold is evaluated by
simulating a full batch with a cloned spec in which superiority = x and
inferiority = 1 - x at every look; all evaluations reuse the same base
seed, making the search a deterministic function of its settings.

The surrogate is a noiseless zero-mean GP over standardised metric values
with a power-exponential kernel on inputs scaled to [0, 1]. Because this is
level finding rather than maximisation, the acquisition picks the unvisited
grid point minimising ``|mu(x) - target| - kappa * sd(x)``; with narrowing
enabled the grid shrinks to the interval spanned by the pair of
evaluations bracketing the target once one exists.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .design import ValidatedSpec
from .errors import CalibrationError, StoreError
from .runner import Batch, run_batch

__all__ = [
    "CalibrationResult",
    "GPControls",
    "GPModel",
    "calibrate",
    "evaluate_threshold",
    "gp_fit",
    "propose_next",
]

_JITTER = 1e-8


@dataclass(frozen=True)
class GPControls:
    """Surrogate and acquisition settings."""

    resolution: int = 5000  # grid points per proposal
    kappa: float = 0.5  # exploration weight in the acquisition
    pow: float = 1.95  # power-exponential kernel exponent
    lengthscale: float = 1.0
    x_scaled: bool = True  # scale thresholds to [0, 1] over the search range
    noisy: bool = False  # noiseless interpolation only (noisy mode unsupported)
    narrowing: bool = True

    def __post_init__(self):
        if self.resolution < 2:
            raise ValueError("resolution must be at least 2")
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")
        if not 0.0 < self.pow <= 2.0:
            raise ValueError("pow must be in (0, 2]")
        if self.lengthscale <= 0:
            raise ValueError("lengthscale must be positive")


@dataclass
class GPModel:
    """Fitted noiseless GP; predictions on the original y scale."""

    xs: np.ndarray
    ys: np.ndarray
    controls: GPControls
    bounds: tuple[float, float]
    _chol: object = field(repr=False, default=None)
    _alpha: np.ndarray = field(repr=False, default=None)
    _y_mean: float = 0.0
    _y_sd: float = 1.0

    def _scale(self, x: np.ndarray) -> np.ndarray:
        if not self.controls.x_scaled:
            return x
        lo, hi = self.bounds
        return (x - lo) / (hi - lo) if hi > lo else x

    def predict(self, xq) -> tuple[np.ndarray, np.ndarray]:
        xq = np.atleast_1d(np.asarray(xq, dtype=np.float64))
        d = np.abs(self._scale(xq)[:, None] - self._scale(self.xs)[None, :])
        kstar = np.exp(-((d / self.controls.lengthscale) ** self.controls.pow))
        mu = kstar @ self._alpha
        q = solve_triangular(self._chol[0], kstar.T, lower=self._chol[1])
        var = np.clip(1.0 + _JITTER - np.sum(q * q, axis=0), 0.0, None)
        return mu * self._y_sd + self._y_mean, np.sqrt(var) * self._y_sd


def gp_fit(xs, ys, controls: GPControls = GPControls(), bounds=None) -> GPModel:
    """Fit the noiseless surrogate to evaluated (threshold, metric) pairs.

    Duplicate thresholds with identical values are collapsed; duplicates
    with conflicting values cannot be interpolated noiselessly and raise.
    """
    if controls.noisy:
        raise CalibrationError("noisy surrogate mode is not supported")
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    keep_x: list[float] = []
    keep_y: list[float] = []
    for x, y in zip(xs, ys):
        matched = False
        for i, kx in enumerate(keep_x):
            if abs(x - kx) < 1e-12:
                matched = True
                if abs(y - keep_y[i]) > 1e-12:
                    raise CalibrationError(
                        f"conflicting evaluations at x={x!r}; deduplicate them "
                        "(noisy surrogate mode is not supported)"
                    )
        if not matched:
            keep_x.append(float(x))
            keep_y.append(float(y))
    if len(keep_x) < 2:
        raise CalibrationError("GP fit needs at least two distinct evaluations")
    xs = np.array(keep_x)
    ys = np.array(keep_y)
    if bounds is None:
        bounds = (float(xs.min()), float(xs.max()))
    model = GPModel(xs=xs, ys=ys, controls=controls, bounds=tuple(bounds))
    y_mean = float(ys.mean())
    y_sd = float(ys.std())
    if y_sd == 0.0:
        y_sd = 1.0
    sx = model._scale(xs)
    d = np.abs(sx[:, None] - sx[None, :])
    K = np.exp(-((d / controls.lengthscale) ** controls.pow))
    K[np.diag_indices_from(K)] += _JITTER
    chol = cho_factor(K, lower=True)
    model._chol = chol
    model._alpha = cho_solve(chol, (ys - y_mean) / y_sd)
    model._y_mean = y_mean
    model._y_sd = y_sd
    return model


def propose_next(model: GPModel, grid, target: float, kappa: float, visited) -> float:
    """Unvisited grid point minimising ``|mu - target| - kappa * sd``.

    Ties resolve to the smallest threshold. Raises when every grid point
    has already been evaluated.
    """
    grid = np.asarray(grid, dtype=np.float64)
    mu, sd = model.predict(grid)
    acq = np.abs(mu - target) - kappa * sd
    visited = np.asarray(list(visited), dtype=np.float64)
    if visited.size:
        taken = np.any(np.abs(grid[:, None] - visited[None, :]) < 1e-12, axis=1)
        acq[taken] = np.inf
    idx = int(np.argmin(acq))
    if not math.isfinite(acq[idx]):
        raise CalibrationError("proposal grid exhausted; widen the search range")
    return float(grid[idx])


def evaluate_threshold(
    spec: ValidatedSpec,
    x: float,
    n_rep: int,
    base_seed: int,
    workers: Optional[int] = None,
    store_path=None,
    metric: Optional[Callable[[Batch], float]] = None,
) -> float:
    """Metric value of the spec with superiority ``x`` / inferiority ``1 - x``.

    The default metric is the fraction of simulations stopping for
    superiority (the type 1 error under a null scenario).
    """
    y, _ = _evaluate_threshold_batch(spec, x, n_rep, base_seed, workers, store_path, metric)
    return y


def _evaluate_threshold_batch(spec, x, n_rep, base_seed, workers, store_path, metric):
    if not 0.5 < x <= 1.0:
        raise ValueError(f"superiority threshold must be in (0.5, 1], got {x}")
    clone = spec.with_thresholds(superiority=x, inferiority=1.0 - x)
    batch = run_batch(
        clone, n_rep, base_seed, workers=workers, store_path=store_path, label=f"x={x!r}"
    )
    y = batch.prob_superior() if metric is None else metric(batch)
    return float(y), batch


@dataclass
class CalibrationResult:
    """Outcome of a calibration run."""

    evaluations: tuple[tuple[float, float], ...]
    best_x: float
    best_y: float
    success: bool
    best_trial_spec: Optional[ValidatedSpec]
    best_batch: Optional[Batch]
    settings: dict

    @property
    def n_evaluations(self) -> int:
        return len(self.evaluations)


def _band(target: float, tol: float, direction: int) -> tuple[float, float]:
    if direction < 0:
        return target - tol, target
    if direction > 0:
        return target, target + tol
    return target - tol, target + tol


def _narrowed_range(evaluations, target, full_range):
    above = [(x, y) for x, y in evaluations if y > target]
    below = [(x, y) for x, y in evaluations if y <= target]
    if not above or not below:
        return full_range
    best_pair = None
    best_gap = math.inf
    for xa, _ in above:
        for xb, _ in below:
            gap = abs(xa - xb)
            if gap < best_gap:
                best_gap = gap
                best_pair = (min(xa, xb), max(xa, xb))
    if best_pair is None or best_pair[1] - best_pair[0] < 1e-15:
        return full_range
    return best_pair


def calibrate(
    spec: Optional[ValidatedSpec],
    target: float = 0.05,
    search_range: tuple[float, float] = (0.9, 1.0),
    tol: float = 0.001,
    dir: int = -1,
    iter_max: int = 25,
    n_rep: int = 1000,
    base_seed: int = 0,
    workers: Optional[int] = None,
    controls: GPControls = GPControls(),
    store_path=None,
    batch_store_dir=None,
    evaluate: Optional[Callable[[float], float]] = None,
    metric: Optional[Callable[[Batch], float]] = None,
    progress: Optional[Callable[[str], None]] = None,
) -> CalibrationResult:
    """Search for a stopping threshold whose metric hits the target band.

    Evaluates the two search-range endpoints first, then alternates GP fits
    with acquisition proposals until an evaluation satisfies the tolerance
    (``dir = -1``: within ``tol`` at or below target; ``+1``: at or above;
    ``0``: either side) or ``iter_max`` total evaluations are spent. An
    unsuccessful search returns ``success=False`` rather than raising;
    widen the range, raise ``tol``/``iter_max`` or use more posterior draws
    and rerun.

    ``evaluate`` substitutes a deterministic function of x for the
    simulation-backed metric (used for validating the search machinery);
    with it, ``spec`` may be None and no batches are produced. A
    ``store_path`` persists evaluations keyed by spec fingerprint and
    settings so interrupted calibrations resume instead of recomputing;
    ``batch_store_dir`` additionally persists every evaluated batch.
    """
    if not 0.0 < target < 1.0:
        raise ValueError("target must be in (0, 1)")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if dir not in (-1, 0, 1):
        raise ValueError("dir must be -1, 0 or +1")
    lo, hi = float(search_range[0]), float(search_range[1])
    if not lo < hi:
        raise ValueError("search_range must be an increasing pair")
    if evaluate is None:
        if spec is None:
            raise ValueError("calibration needs a spec unless an evaluator is supplied")
        if not 0.5 < lo < hi <= 1.0:
            raise ValueError("threshold search_range must lie in (0.5, 1]")
    if iter_max < 2:
        raise ValueError("iter_max must allow at least the two endpoint evaluations")

    settings = {
        "target": target,
        "tol": tol,
        "dir": dir,
        "search_range": [lo, hi],
        "iter_max": iter_max,
        "n_rep": n_rep,
        "base_seed": base_seed,
        "controls": vars(controls),
    }
    band_lo, band_hi = _band(target, tol, dir)
    evaluations: list[tuple[float, float]] = []
    batches: dict[float, Batch] = {}

    if store_path is not None and os.path.exists(store_path):
        evaluations = _load_calibration_store(store_path, spec, settings)
        if progress:
            progress(f"resumed {len(evaluations)} stored evaluation(s)")

    def in_band(y: float) -> bool:
        return band_lo <= y <= band_hi

    def seen(x: float) -> bool:
        return any(abs(x - ex) < 1e-12 for ex, _ in evaluations)

    def batch_path(x: float):
        if batch_store_dir is None:
            return None
        os.makedirs(batch_store_dir, exist_ok=True)
        return os.path.join(batch_store_dir, f"eval_{x:.12g}.atb")

    def run_eval(x: float) -> float:
        if evaluate is not None:
            y = float(evaluate(x))
        else:
            y, batch = _evaluate_threshold_batch(
                spec, x, n_rep, base_seed, workers, batch_path(x), metric
            )
            batches[x] = batch
        evaluations.append((x, y))
        if store_path is not None:
            _save_calibration_store(store_path, spec, settings, evaluations)
        if progress:
            progress(f"evaluation {len(evaluations)}: x={x:.7g} -> y={y:.6g}")
        return y

    success = any(in_band(y) for _, y in evaluations)
    for endpoint in (lo, hi):
        if success or len(evaluations) >= iter_max:
            break
        if not seen(endpoint):
            success = in_band(run_eval(endpoint))

    while not success and len(evaluations) < iter_max:
        grid_lo, grid_hi = (
            _narrowed_range(evaluations, target, (lo, hi)) if controls.narrowing else (lo, hi)
        )
        grid = np.linspace(grid_lo, grid_hi, controls.resolution)
        model = gp_fit(
            [x for x, _ in evaluations],
            [y for _, y in evaluations],
            controls,
            bounds=(lo, hi),
        )
        try:
            x_next = propose_next(model, grid, target, controls.kappa, [x for x, _ in evaluations])
        except CalibrationError:
            if (grid_lo, grid_hi) == (lo, hi):
                break  # nothing left to try anywhere
            grid = np.linspace(lo, hi, controls.resolution)
            x_next = propose_next(model, grid, target, controls.kappa, [x for x, _ in evaluations])
        success = in_band(run_eval(x_next))

    admissible = [(x, y) for x, y in evaluations if in_band(y)]
    pool = admissible if admissible else evaluations
    best_x, best_y = min(pool, key=lambda e: abs(e[1] - target))

    best_spec = None
    best_batch = None
    if evaluate is None and spec is not None:
        best_spec = spec.with_thresholds(superiority=best_x, inferiority=1.0 - best_x)
        best_batch = batches.get(best_x)
        if best_batch is None:
            # resumed from a store that only keeps (x, y) pairs; the batch
            # is deterministic, so recomputing reproduces it exactly (and
            # loads instantly when batch_store_dir is set)
            _, best_batch = _evaluate_threshold_batch(
                spec, best_x, n_rep, base_seed, workers, batch_path(best_x), metric
            )
    return CalibrationResult(
        evaluations=tuple(evaluations),
        best_x=best_x,
        best_y=best_y,
        success=bool(admissible),
        best_trial_spec=best_spec,
        best_batch=best_batch,
        settings=settings,
    )


_CAL_SCHEMA = "adaptsim-calibration-v1"


def _calibration_key(spec, settings) -> dict:
    return {
        "schema": _CAL_SCHEMA,
        "fingerprint": spec.fingerprint() if spec is not None else None,
        "settings": settings,
    }


def _save_calibration_store(path, spec, settings, evaluations) -> None:
    payload = _calibration_key(spec, settings)
    payload["evaluations"] = [[x, y] for x, y in evaluations]
    tmp = str(path) + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
    os.replace(tmp, path)


def _load_calibration_store(path, spec, settings) -> list[tuple[float, float]]:
    with open(path) as fh:
        payload = json.load(fh)
    expected = _calibration_key(spec, settings)
    for key in ("schema", "fingerprint", "settings"):
        if payload.get(key) != expected[key]:
            raise StoreError(
                f"{path}: stored calibration does not match the requested "
                f"spec/settings (mismatch in {key})"
            )
    return [(float(x), float(y)) for x, y in payload.get("evaluations", [])]
