"""Performance metrics over batches of simulated trials.

``summarize_batch`` condenses a batch of :class:`TrialResult` into the
standard metric vector: sample-size, summed-outcome and outcome-rate
summaries (mean, SD, median, quartiles, range), stopping probabilities,
arm-selection probabilities under a choice of selection strategy,
estimation-error metrics (RMSE, MAE, and their treatment-effect variants)
and the ideal design percentage. Uncertainty comes from nonparametric
bootstrap resampling of the simulation results.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .engine import (
    STOP_EQUIVALENCE,
    STOP_FUTILITY,
    STOP_MAX,
    STOP_SUPERIORITY,
    TrialResult,
)

__all__ = [
    "MetricValue",
    "PerformanceSummary",
    "SelectionStrategy",
    "bootstrap_ci",
    "idp",
    "remaining_arm_combos",
    "select_arm",
    "summarize_batch",
]

_MAD_TO_SD = 1.4826

_STATUS_CODE = {STOP_SUPERIORITY: 0, STOP_EQUIVALENCE: 1, STOP_FUTILITY: 2, STOP_MAX: 3}


@dataclass(frozen=True)
class SelectionStrategy:
    """Rule assigning a "chosen" arm to trials that did not end in
    superiority (superiority results always select the superior arm)."""

    kind: str  # none | best | control_if_available | first_of_list
    arm_list: tuple[str, ...] = ()

    _KINDS = ("none", "best", "control_if_available", "first_of_list")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown selection strategy {self.kind!r}")
        if self.kind == "first_of_list" and not self.arm_list:
            raise ValueError("first_of_list needs at least one arm name")

    @classmethod
    def parse(cls, value) -> "SelectionStrategy":
        """Accept 'none'/'best'/'control_if_available', 'list:A,B', or a
        sequence of arm names."""
        if isinstance(value, SelectionStrategy):
            return value
        if isinstance(value, str):
            if value.startswith("list:"):
                names = tuple(x.strip() for x in value[5:].split(",") if x.strip())
                return cls("first_of_list", names)
            return cls(value)
        return cls("first_of_list", tuple(value))


def select_arm(result: TrialResult, strategy: SelectionStrategy) -> Optional[str]:
    """The arm this simulation selects, or None."""
    for name in strategy.arm_list:
        if name not in result.arms:
            raise ValueError(f"strategy names unknown arm {name!r}")
    if result.superior_arm is not None:
        return result.superior_arm
    if strategy.kind == "none":
        return None
    if strategy.kind == "best":
        pb = np.asarray(result.final_prob_best)
        candidates = [i for i, ok in enumerate(result.available_at_end) if ok]
        best = max(candidates, key=lambda i: (pb[i], -i))
        return result.arms[best]
    if strategy.kind == "control_if_available":
        if result.control is not None:
            i = result.arms.index(result.control)
            if result.available_at_end[i]:
                return result.control
        return None
    for name in strategy.arm_list:  # first_of_list
        if result.available_at_end[result.arms.index(name)]:
            return name
    return None


def idp(
    selection_counts: Sequence[float],
    true_values: Sequence[float],
    highest_is_best: bool,
) -> Optional[float]:
    """Ideal design percentage: expected truth of the selected arm scaled
    between the worst arm (0%) and the best arm (100%).

    Returns None for degenerate inputs: no selections, or no between-arm
    differences in the truths.
    """
    counts = np.asarray(selection_counts, dtype=np.float64)
    truths = np.asarray(true_values, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        return None
    best = truths.max() if highest_is_best else truths.min()
    worst = truths.min() if highest_is_best else truths.max()
    if best == worst:
        return None
    expected = float(counts @ truths) / total
    return 100.0 * (expected - worst) / (best - worst)


@dataclass(frozen=True)
class MetricValue:
    est: float
    err_sd: Optional[float] = None
    err_mad: Optional[float] = None
    lo: Optional[float] = None
    hi: Optional[float] = None


class PerformanceSummary:
    """Ordered metric table with optional bootstrap uncertainty."""

    def __init__(self, metrics: dict[str, MetricValue], arms, strategy, n):
        self.metrics = metrics
        self.arms = tuple(arms)
        self.strategy = strategy
        self.n = n

    def __getitem__(self, name: str) -> MetricValue:
        return self.metrics[name]

    def __contains__(self, name: str) -> bool:
        return name in self.metrics

    def names(self) -> list[str]:
        return list(self.metrics)

    def rows(self):
        return [(name, value) for name, value in self.metrics.items()]

    def __repr__(self):
        body = ", ".join(f"{k}={v.est:.4g}" for k, v in list(self.metrics.items())[:6])
        return f"PerformanceSummary(n={self.n}, {body}, ...)"


class _BatchArrays:
    """Columnar view of a batch, precomputed once for fast resampling."""

    def __init__(self, results, strategy, true_values, reference_arm):
        first = results[0]
        arms = first.arms
        for r in results:
            if r.arms != arms:
                raise ValueError("all results must come from the same design")
        self.arms = arms
        k = len(arms)
        n = len(results)
        self.size = np.array([r.n_randomised_total for r in results], dtype=np.float64)
        self.sum_ys = np.array([sum(r.sum_ys) for r in results])
        self.status = np.array([_STATUS_CODE[r.final_status] for r in results], dtype=np.int8)
        sel = np.empty(n, dtype=np.int64)
        for i, r in enumerate(results):
            name = select_arm(r, strategy)
            sel[i] = arms.index(name) if name is not None else -1
        self.selected = sel

        self.truths = None if true_values is None else np.asarray(true_values, dtype=np.float64)
        self.highest_is_best = first.highest_is_best
        ref = reference_arm if reference_arm is not None else first.control
        self.reference_index = arms.index(ref) if ref is not None else None

        est = np.array([r.posterior_estimates for r in results])
        self.err = np.full(n, np.nan)
        self.err_te = np.full(n, np.nan)
        if self.truths is not None:
            has_sel = sel >= 0
            idx = np.nonzero(has_sel)[0]
            self.err[idx] = est[idx, sel[idx]] - self.truths[sel[idx]]
            if self.reference_index is not None:
                ref_i = self.reference_index
                te_idx = idx[sel[idx] != ref_i]
                self.err_te[te_idx] = (est[te_idx, sel[te_idx]] - est[te_idx, ref_i]) - (
                    self.truths[sel[te_idx]] - self.truths[ref_i]
                )

    def metric_names(self):
        names = ["n_summarised"]
        for block in ("size", "sum_ys", "ratio_ys"):
            names += [f"{block}_{s}" for s in ("mean", "sd", "median", "p25", "p75", "p0", "p100")]
        names += ["prob_conclusive", "prob_superior", "prob_equivalence", "prob_futility", "prob_max"]
        names += [f"prob_select_arm_{arm}" for arm in self.arms]
        names += ["prob_select_none", "rmse", "rmse_te", "mae", "mae_te", "idp"]
        return names

    def compute(self, idx: np.ndarray) -> np.ndarray:
        n = idx.shape[0]
        out = [float(n)]
        size = self.size[idx]
        sums = self.sum_ys[idx]
        for block in (size, sums, sums / size):
            out += _seven_point(block)
        status = self.status[idx]
        p_sup = float(np.mean(status == 0))
        p_eq = float(np.mean(status == 1))
        p_fut = float(np.mean(status == 2))
        p_max = float(np.mean(status == 3))
        out += [p_sup + p_eq + p_fut, p_sup, p_eq, p_fut, p_max]
        sel = self.selected[idx]
        chosen = sel[sel >= 0]
        counts = np.bincount(chosen, minlength=len(self.arms))
        out += list(counts / n)
        out.append(float(np.mean(sel < 0)))
        err = self.err[idx]
        err = err[np.isfinite(err)]
        if err.size:
            out.append(float(np.sqrt(np.mean(err * err))))
        else:
            out.append(math.nan)
        err_te = self.err_te[idx]
        err_te = err_te[np.isfinite(err_te)]
        out.append(float(np.sqrt(np.mean(err_te * err_te))) if err_te.size else math.nan)
        out.append(float(np.median(np.abs(err))) if err.size else math.nan)
        out.append(float(np.median(np.abs(err_te))) if err_te.size else math.nan)
        if self.truths is None:
            out.append(math.nan)
        else:
            value = idp(counts, self.truths, self.highest_is_best)
            out.append(math.nan if value is None else value)
        return np.array(out)


def _seven_point(x: np.ndarray) -> list[float]:
    sd = float(np.std(x, ddof=1)) if x.size > 1 else math.nan
    p25, p50, p75 = np.percentile(x, [25.0, 50.0, 75.0])
    return [float(np.mean(x)), sd, float(p50), float(p25), float(p75), float(x.min()), float(x.max())]


def summarize_batch(
    results: Sequence[TrialResult],
    strategy: SelectionStrategy | str = "none",
    true_values: Optional[Sequence[float]] = None,
    reference_arm: Optional[str] = None,
    n_boot: int = 0,
    ci_width: float = 0.95,
    boot_rng: Optional[np.random.Generator] = None,
) -> PerformanceSummary:
    """Aggregate a batch into the named performance-metric vector.

    ``true_values`` are the per-arm scenario truths on the natural outcome
    scale; without them the error metrics and IDP are reported absent.
    Treatment-effect errors compare the selected arm against
    ``reference_arm`` (default: the design's original control) and are
    absent when there is no reference or the selected arm is the reference.
    With ``n_boot > 0``, every metric gains bootstrap SD/MAD-SD and a
    percentile interval of width ``ci_width``; resamples on which a metric
    is undefined are excluded from its uncertainty summaries.
    """
    if not results:
        raise ValueError("cannot summarise an empty batch")
    strategy = SelectionStrategy.parse(strategy)
    arrays = _BatchArrays(results, strategy, true_values, reference_arm)
    names = arrays.metric_names()
    n = len(results)
    est = arrays.compute(np.arange(n))

    if n_boot > 0:
        if n < 2:
            raise ValueError("bootstrap needs at least 2 results")
        if boot_rng is None:
            boot_rng = np.random.default_rng()
        samples = np.empty((n_boot, est.shape[0]))
        for b in range(n_boot):
            samples[b] = arrays.compute(boot_rng.integers(0, n, size=n))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            err_sd = np.nanstd(samples, axis=0, ddof=1)
            med = np.nanmedian(samples, axis=0)
            err_mad = _MAD_TO_SD * np.nanmedian(np.abs(samples - med), axis=0)
            tail = 100.0 * (1.0 - ci_width) / 2.0
            lo = np.nanpercentile(samples, tail, axis=0)
            hi = np.nanpercentile(samples, 100.0 - tail, axis=0)
        metrics = {
            name: MetricValue(
                est=float(est[i]),
                err_sd=float(err_sd[i]),
                err_mad=float(err_mad[i]),
                lo=float(lo[i]),
                hi=float(hi[i]),
            )
            for i, name in enumerate(names)
        }
    else:
        metrics = {name: MetricValue(est=float(est[i])) for i, name in enumerate(names)}
    return PerformanceSummary(metrics, arrays.arms, strategy, n)


def bootstrap_ci(
    results: Sequence,
    metric: Callable[[Sequence], Optional[float]],
    n_boot: int = 5000,
    width: float = 0.95,
    rng: Optional[np.random.Generator] = None,
) -> MetricValue:
    """Percentile bootstrap for an arbitrary batch-level metric.

    ``metric`` maps a list of results to a scalar (or None when undefined;
    such resamples are excluded). Deterministic given the same ``rng``
    stream. For the full metric table prefer ``summarize_batch(n_boot=...)``,
    which resamples all metrics jointly and much faster.
    """
    if len(results) < 2:
        raise ValueError("bootstrap needs at least 2 results")
    if rng is None:
        rng = np.random.default_rng()
    n = len(results)
    est = metric(results)
    values = []
    for _ in range(n_boot):
        idx = rng.integers(0, n, size=n)
        v = metric([results[i] for i in idx])
        if v is not None and math.isfinite(v):
            values.append(v)
    if not values:
        return MetricValue(est=math.nan if est is None else float(est))
    arr = np.asarray(values)
    med = float(np.median(arr))
    tail = 100.0 * (1.0 - width) / 2.0
    return MetricValue(
        est=math.nan if est is None else float(est),
        err_sd=float(np.std(arr, ddof=1)),
        err_mad=_MAD_TO_SD * float(np.median(np.abs(arr - med))),
        lo=float(np.percentile(arr, tail)),
        hi=float(np.percentile(arr, 100.0 - tail)),
    )


def remaining_arm_combos(results: Sequence[TrialResult]) -> dict[tuple[str, ...], float]:
    """Frequency of each set of arms available at the last analysis.

    The keys partition the batch (frequencies sum to 1); arm order inside
    each key is canonical.
    """
    counts: dict[tuple[str, ...], int] = {}
    for r in results:
        combo = tuple(a for a, present in zip(r.arms, r.in_final_analysis) if present)
        counts[combo] = counts.get(combo, 0) + 1
    total = len(results)
    return {combo: c / total for combo, c in sorted(counts.items())}
