"""Single-trial simulation: randomisation, lagged analyses, decisions.

``run_trial`` executes one simulated trial end to end. Between analyses,
participants are randomised under the allocation probabilities currently in
force (piecewise constant within a between-look segment). At each look the
first ``data_looks[j]`` participants in randomisation order are analysed;
the remainder are already randomised but lagged, and enter the final
analysis that is run on all randomised participants once the trial stops.

Decision priority within a look is superiority/inferiority first, then
practical equivalence, then futility. All trigger comparisons are strict
(``>`` for superiority/equivalence/futility probabilities, ``<`` for
inferiority), which makes thresholds of exactly 1 or 0 inert sentinels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._simplex import clamp_simplex
from .design import ThresholdSet, ValidatedSpec, sqrt_control_prob, thresholds_at_look
from .errors import EngineError
from .outcomes import ArmStats, PosteriorDraws
from .rng import sample_categorical

__all__ = [
    "ArmState",
    "ComparisonProbs",
    "LookOutcome",
    "TrialResult",
    "evaluate_look_no_control",
    "evaluate_look_with_control",
    "pairwise_vs_control",
    "prob_all_equivalent",
    "prob_best",
    "rescale_limits",
    "run_trial",
    "update_allocation",
]

STATUS_ACTIVE = "active"
STATUS_SUPERIOR = "superior"
STATUS_INFERIOR = "inferior"
STATUS_EQUIVALENCE = "equivalence"
STATUS_FUTILITY = "futility"

STOP_SUPERIORITY = "superiority"
STOP_EQUIVALENCE = "equivalence"
STOP_FUTILITY = "futility"
STOP_MAX = "max"

# MAD scaled to estimate an SD under normality (R's mad() constant).
_MAD_TO_SD = 1.4826


# ---------------------------------------------------------------------------
# posterior probability operations


def _prob_best_cols(cols: Sequence[np.ndarray], highest_is_best: bool) -> np.ndarray:
    """Fraction of draws in which each column is best; ties go to the
    lowest canonical index."""
    n = cols[0].shape[0]
    best = np.zeros(n, dtype=np.intp)
    current = cols[0].copy()
    for i, col in enumerate(cols[1:], start=1):
        mask = col > current if highest_is_best else col < current
        best[mask] = i
        if highest_is_best:
            np.maximum(current, col, out=current)
        else:
            np.minimum(current, col, out=current)
    return np.bincount(best, minlength=len(cols)) / n


def _range_cols(cols: Sequence[np.ndarray]) -> np.ndarray:
    lo = cols[0].copy()
    hi = cols[0].copy()
    for col in cols[1:]:
        np.minimum(lo, col, out=lo)
        np.maximum(hi, col, out=hi)
    return hi - lo


def prob_best(draws: PosteriorDraws, highest_is_best: bool) -> np.ndarray:
    """Per-arm probability of being overall best (a simplex vector)."""
    cols = [draws.values[:, i] for i in range(len(draws.arms))]
    return _prob_best_cols(cols, highest_is_best)


def prob_all_equivalent(draws: PosteriorDraws, equivalence_diff: float) -> float:
    """Probability that the largest absolute pairwise difference between all
    arms is below ``equivalence_diff``."""
    if len(draws.arms) < 2:
        raise ValueError("equivalence needs at least two arms")
    cols = [draws.values[:, i] for i in range(len(draws.arms))]
    return float(np.mean(_range_cols(cols) < equivalence_diff))


@dataclass(frozen=True)
class ComparisonProbs:
    """Pairwise posterior probabilities of one arm against the control."""

    p_superior: float
    p_equivalent: Optional[float] = None
    p_futile: Optional[float] = None


def _pairwise(
    arm_col: np.ndarray,
    control_col: np.ndarray,
    highest_is_best: bool,
    equivalence_diff: Optional[float],
    futility_diff: Optional[float],
) -> ComparisonProbs:
    diff = arm_col - control_col
    p_sup = float(np.mean(diff > 0.0) if highest_is_best else np.mean(diff < 0.0))
    p_eq = None
    if equivalence_diff is not None:
        p_eq = float(np.mean(np.abs(diff) < equivalence_diff))
    p_fut = None
    if futility_diff is not None:
        benefit = diff if highest_is_best else -diff
        p_fut = float(np.mean(benefit < futility_diff))
    return ComparisonProbs(p_sup, p_eq, p_fut)


def pairwise_vs_control(
    draws: PosteriorDraws,
    control: str,
    equivalence_diff: Optional[float] = None,
    futility_diff: Optional[float] = None,
    highest_is_best: bool = False,
) -> dict[str, ComparisonProbs]:
    """Pairwise probabilities of every non-control arm against the control.

    ``p_futile`` is the probability that the arm's beneficial difference
    over the control falls short of ``futility_diff``; draws where the arm
    is outright worse count as futile.
    """
    if control not in draws.arms:
        raise ValueError(f"control column {control!r} missing from draws")
    ctrl = draws.column(control)
    return {
        arm: _pairwise(draws.column(arm), ctrl, highest_is_best, equivalence_diff, futility_diff)
        for arm in draws.arms
        if arm != control
    }


# ---------------------------------------------------------------------------
# per-look decision logic


@dataclass
class ArmState:
    """Mutable per-arm bookkeeping while a trial runs."""

    name: str
    index: int
    active: bool = True
    is_control: bool = False
    n_randomised: int = 0
    sum_outcomes: float = 0.0
    alloc_prob: float = 0.0
    fixed_prob: Optional[float] = None
    min_prob: Optional[float] = None
    max_prob: Optional[float] = None
    status: str = STATUS_ACTIVE
    status_look: int = -1

    def drop(self, status: str, look: int) -> None:
        self.active = False
        self.is_control = False
        self.alloc_prob = 0.0
        self.status = status
        self.status_look = look


@dataclass
class LookOutcome:
    """What one adaptive analysis decided."""

    stopped: Optional[str] = None  # STOP_* value, None if the trial continues
    superior_arm: Optional[int] = None
    dropped: list[tuple[int, str]] = field(default_factory=list)
    promoted_control: Optional[int] = None


def _active_indices(arm_states: Sequence[ArmState]) -> list[int]:
    return [a.index for a in arm_states if a.active]


def evaluate_look_no_control(
    arm_states: Sequence[ArmState],
    cols: Sequence[np.ndarray],
    active: Sequence[int],
    thresholds: ThresholdSet,
    equivalence_diff: Optional[float],
    highest_is_best: bool,
    look: int,
) -> LookOutcome:
    """Decisions at one look of a design without a common control.

    Superiority/inferiority act on each arm's probability of being overall
    best; if drops leave a single arm it is declared superior. Equivalence
    then applies to the arms still active.
    """
    out = LookOutcome()
    pb = _prob_best_cols(cols, highest_is_best)

    top = int(np.argmax(pb))
    if pb[top] > thresholds.superiority:
        winner = active[top]
        arm_states[winner].status = STATUS_SUPERIOR
        arm_states[winner].status_look = look
        out.stopped = STOP_SUPERIORITY
        out.superior_arm = winner
        return out

    losers = [i for i, p in enumerate(pb) if p < thresholds.inferiority]
    if len(losers) == len(active):
        # never drop every arm: the current best survives and wins below
        losers = [i for i in losers if i != top]
    keep = [i for i in range(len(active)) if i not in losers]
    for i in losers:
        arm_states[active[i]].drop(STATUS_INFERIOR, look)
        out.dropped.append((active[i], STATUS_INFERIOR))
    if len(keep) == 1:
        winner = active[keep[0]]
        arm_states[winner].status = STATUS_SUPERIOR
        arm_states[winner].status_look = look
        out.stopped = STOP_SUPERIORITY
        out.superior_arm = winner
        return out

    eq = thresholds.equivalence_prob
    if equivalence_diff is not None and eq is not None and eq < 1.0 and len(keep) >= 2:
        p_eq = float(np.mean(_range_cols([cols[i] for i in keep]) < equivalence_diff))
        if p_eq > eq:
            out.stopped = STOP_EQUIVALENCE
    return out


def evaluate_look_with_control(
    arm_states: Sequence[ArmState],
    cols: Sequence[np.ndarray],
    active: Sequence[int],
    thresholds: ThresholdSet,
    spec: ValidatedSpec,
    control_is_first: bool,
    look: int,
) -> LookOutcome:
    """Decisions at one look of a common-control design.

    All comparisons are pairwise against the current control. A superior
    arm displaces the control and is immediately re-compared (superiority
    and inferiority only) against the remaining arms before any further
    participants are simulated; equivalence and futility are skipped for
    the rest of that look.
    """
    out = LookOutcome()
    col_of = dict(zip(active, cols))
    live = list(active)
    promoted = False

    while True:
        control = next(i for i in live if arm_states[i].is_control)
        non_controls = [i for i in live if i != control]
        if not non_controls:
            break
        ctrl_col = col_of[control]
        p_sup = {
            i: float(
                np.mean(col_of[i] > ctrl_col)
                if spec.highest_is_best
                else np.mean(col_of[i] < ctrl_col)
            )
            for i in non_controls
        }

        winners = [i for i in non_controls if p_sup[i] > thresholds.superiority]
        if winners:
            promoted = True
            pb = _prob_best_cols([col_of[i] for i in live], spec.highest_is_best)
            pb_of = dict(zip(live, pb))
            winner = max(winners, key=lambda i: (pb_of[i], -i))
            arm_states[control].drop(STATUS_INFERIOR, look)
            out.dropped.append((control, STATUS_INFERIOR))
            arm_states[winner].is_control = True
            out.promoted_control = winner
            live.remove(control)
            if len(live) == 1:
                arm_states[winner].status = STATUS_SUPERIOR
                arm_states[winner].status_look = look
                out.stopped = STOP_SUPERIORITY
                out.superior_arm = winner
                return out
            continue  # immediate pairwise re-comparison against the new control

        last_reason = None
        drops = [i for i in non_controls if p_sup[i] < thresholds.inferiority]
        for i in drops:
            arm_states[i].drop(STATUS_INFERIOR, look)
            out.dropped.append((i, STATUS_INFERIOR))
            live.remove(i)
            last_reason = STATUS_INFERIOR

        if not promoted:
            remaining = [i for i in live if i != control]
            eq = thresholds.equivalence_prob
            if (
                spec.equivalence_diff is not None
                and eq is not None
                and eq < 1.0
                and remaining
                and (not spec.equivalence_only_first or control_is_first)
            ):
                for i in remaining:
                    p_eq = float(
                        np.mean(np.abs(col_of[i] - ctrl_col) < spec.equivalence_diff)
                    )
                    if p_eq > eq:
                        arm_states[i].drop(STATUS_EQUIVALENCE, look)
                        out.dropped.append((i, STATUS_EQUIVALENCE))
                        live.remove(i)
                        last_reason = STATUS_EQUIVALENCE

            remaining = [i for i in live if i != control]
            fut = thresholds.futility_prob
            if (
                spec.futility_diff is not None
                and fut is not None
                and fut < 1.0
                and remaining
                and (not spec.futility_only_first or control_is_first)
            ):
                benefit_sign = 1.0 if spec.highest_is_best else -1.0
                for i in remaining:
                    benefit = benefit_sign * (col_of[i] - ctrl_col)
                    if float(np.mean(benefit < spec.futility_diff)) > fut:
                        arm_states[i].drop(STATUS_FUTILITY, look)
                        out.dropped.append((i, STATUS_FUTILITY))
                        live.remove(i)
                        last_reason = STATUS_FUTILITY

        if len(live) == 1:
            # only the control remains; the rule that emptied the field
            # names the overall stop
            if last_reason == STATUS_INFERIOR:
                arm_states[control].status = STATUS_SUPERIOR
                arm_states[control].status_look = look
                out.stopped = STOP_SUPERIORITY
                out.superior_arm = control
            elif last_reason == STATUS_FUTILITY:
                out.stopped = STOP_FUTILITY
            else:
                out.stopped = STOP_EQUIVALENCE
        break
    return out


# ---------------------------------------------------------------------------
# allocation updates


def update_allocation(
    arm_states: Sequence[ArmState],
    prob_best_active: np.ndarray,
    spec: ValidatedSpec,
    look: int,
) -> None:
    """Recompute allocation probabilities for the active arms.

    Pipeline: soften the raw best-arm probabilities with the per-look
    exponent, apply fixed and control allocation rules, then clamp to the
    min/max limits with iterative renormalisation of the unclamped mass.
    Inactive arms keep probability zero.
    """
    active = _active_indices(arm_states)
    if not active:
        raise EngineError("no active arms to allocate to")
    power = spec.soften_power[look]
    with np.errstate(divide="ignore", invalid="ignore"):
        weights = np.power(np.asarray(prob_best_active, dtype=np.float64), power)
    weights[~np.isfinite(weights)] = 0.0

    pinned: dict[int, float] = {}
    control = next((i for i in active if arm_states[i].is_control), None)
    if control is not None and spec.control_prob_fixed == "sqrt-based":
        pinned[control] = sqrt_control_prob(len(active) - 1) if len(active) > 1 else 1.0
    for pos, i in enumerate(active):
        if arm_states[i].fixed_prob is not None and i not in pinned:
            pinned[i] = arm_states[i].fixed_prob
    if control is not None and spec.control_prob_fixed == "match" and len(active) > 1:
        ctrl_pos = active.index(control)
        others = [p for p in range(len(active)) if p != ctrl_pos]
        weights[ctrl_pos] = max(weights[p] for p in others)

    free = [pos for pos, i in enumerate(active) if i not in pinned]
    probs = np.zeros(len(active))
    for pos, i in enumerate(active):
        if i in pinned:
            probs[pos] = pinned[i]
    pinned_mass = probs.sum()
    if not free:
        if pinned_mass <= 0.0:
            raise EngineError("all-arm fixed allocations sum to zero")
        probs /= pinned_mass  # every arm pinned: renormalise the pins
    else:
        if pinned_mass >= 1.0 + 1e-9:
            raise EngineError("fixed allocations exceed the whole simplex")
        lows = np.array(
            [0.0 if arm_states[active[p]].min_prob is None else arm_states[active[p]].min_prob for p in free]
        )
        highs = np.array(
            [1.0 if arm_states[active[p]].max_prob is None else arm_states[active[p]].max_prob for p in free]
        )
        probs[free] = clamp_simplex(weights[free], lows, highs, total=1.0 - pinned_mass)

    for a in arm_states:
        a.alloc_prob = 0.0
    for pos, i in enumerate(active):
        arm_states[i].alloc_prob = float(probs[pos])


def rescale_limits(arm_states: Sequence[ArmState], spec: ValidatedSpec) -> None:
    """Rescale min/max allocation limits after an arm was dropped.

    Limits are always derived from the original specification: each active
    arm's limit is multiplied by (initial arm count / current active count),
    with minima capped just below 1/current_count and maxima capped at 1 so
    the limit system stays feasible.
    """
    if spec.rescale_probs != "limits":
        return
    active = _active_indices(arm_states)
    k = len(active)
    if k == 0:
        return
    factor = spec.n_arms / k
    min_cap = (1.0 - 1e-9) / k
    for i in active:
        orig_min = spec.min_probs[i]
        orig_max = spec.max_probs[i]
        if orig_min is not None:
            arm_states[i].min_prob = min(orig_min * factor, min_cap)
        if orig_max is not None:
            arm_states[i].max_prob = min(orig_max * factor, 1.0)


# ---------------------------------------------------------------------------
# whole-trial execution


@dataclass(frozen=True)
class TrialResult:
    """Everything recorded about one simulated trial."""

    arms: tuple[str, ...]
    control: Optional[str]  # originally configured control
    highest_is_best: bool
    final_status: str  # superiority | equivalence | futility | max
    superior_arm: Optional[str]
    final_look: int  # 0-based index of the last analysis conducted
    n_randomised_total: int
    ns: tuple[int, ...]
    sum_ys: tuple[float, ...]
    raw_estimates: tuple[float, ...]  # events/n or mean; NaN with no data
    posterior_estimates: tuple[float, ...]  # medians of final-analysis draws
    posterior_mad_sds: tuple[float, ...]
    final_prob_best: tuple[float, ...]  # over arms available at end; NaN otherwise
    statuses: tuple[str, ...]
    status_looks: tuple[int, ...]
    available_at_end: tuple[bool, ...]  # never dropped while the trial ran
    in_final_analysis: tuple[bool, ...]  # analysed at the last look conducted
    alloc_trace: Optional[tuple[tuple[float, ...], ...]] = None


def run_trial(
    spec: ValidatedSpec,
    rng: np.random.Generator,
    track_allocations: bool = False,
    check_invariants: bool = False,
) -> TrialResult:
    """Simulate one trial under ``spec`` using the supplied RNG stream."""
    k = spec.n_arms
    model = spec.outcome_model
    arm_states = [
        ArmState(
            name=spec.arms[i],
            index=i,
            is_control=(i == spec.control_index),
            alloc_prob=spec.start_probs[i],
            fixed_prob=spec.fixed_probs[i],
            min_prob=spec.min_probs[i],
            max_prob=spec.max_probs[i],
        )
        for i in range(k)
    ]
    max_n = spec.max_n
    alloc_idx = np.empty(max_n, dtype=np.intp)
    ys = np.empty(max_n, dtype=np.float64)
    stats = ArmStats.empty(k)

    n_randomised = 0
    n_analysed = 0
    probs_now = np.array(spec.start_probs)
    trace = [tuple(probs_now)] if track_allocations else None
    control_is_first = True
    stopped: Optional[str] = None
    superior_idx: Optional[int] = None
    final_look = spec.n_looks - 1
    in_final_analysis = [True] * k

    for look in range(spec.n_looks):
        target = spec.randomised_at_looks[look]
        seg = target - n_randomised
        if seg > 0:
            seg_alloc = sample_categorical(rng, probs_now, size=seg)
            alloc_idx[n_randomised:target] = seg_alloc
            ys[n_randomised:target] = model.generate(seg_alloc, rng)
            n_randomised = target

        n_data = min(spec.data_looks[look], n_randomised)
        if check_invariants and n_data < n_analysed:
            raise EngineError("analysed count decreased between looks")
        stats.add(alloc_idx[n_analysed:n_data], ys[n_analysed:n_data])
        n_analysed = n_data

        active = _active_indices(arm_states)
        in_final_analysis = [arm_states[i].active for i in range(k)]
        cols = model.posterior_columns(stats, active, spec.n_draws, rng)
        thresholds = thresholds_at_look(spec, look)

        if any(a.active and a.is_control for a in arm_states):
            outcome = evaluate_look_with_control(
                arm_states, cols, active, thresholds, spec, control_is_first, look
            )
            if outcome.promoted_control is not None:
                control_is_first = False
        else:
            outcome = evaluate_look_no_control(
                arm_states,
                cols,
                active,
                thresholds,
                spec.equivalence_diff,
                spec.highest_is_best,
                look,
            )

        if outcome.dropped:
            rescale_limits(arm_states, spec)
        if outcome.stopped is not None:
            stopped = outcome.stopped
            superior_idx = outcome.superior_arm
            final_look = look
            break

        if look < spec.n_looks - 1:
            still_active = _active_indices(arm_states)
            live_cols = [cols[active.index(i)] for i in still_active]
            pb = _prob_best_cols(live_cols, spec.highest_is_best)
            update_allocation(arm_states, pb, spec, look)
            probs_now = np.array([a.alloc_prob for a in arm_states])
            if check_invariants:
                _check_allocation(arm_states, probs_now)
            if trace is not None:
                trace.append(tuple(probs_now))

    # final analysis on all randomised participants, lagged outcomes included
    stats.add(alloc_idx[n_analysed:n_randomised], ys[n_analysed:n_randomised])
    final_cols = model.posterior_columns(stats, range(k), spec.n_draws, rng)
    post_est = []
    post_mad = []
    for col in final_cols:
        med = float(np.median(col))
        post_est.append(med)
        post_mad.append(_MAD_TO_SD * float(np.median(np.abs(col - med))))

    ns = np.bincount(alloc_idx[:n_randomised], minlength=k)
    sums = np.bincount(alloc_idx[:n_randomised], weights=ys[:n_randomised], minlength=k)
    with np.errstate(invalid="ignore", divide="ignore"):
        raw = np.where(ns > 0, sums / np.maximum(ns, 1), math.nan)

    available = [a.active or a.status == STATUS_SUPERIOR for a in arm_states]
    avail_idx = [i for i in range(k) if available[i]]
    pb_final = np.full(k, math.nan)
    if avail_idx:
        pb_final[avail_idx] = _prob_best_cols(
            [final_cols[i] for i in avail_idx], spec.highest_is_best
        )

    return TrialResult(
        arms=spec.arms,
        control=spec.control,
        highest_is_best=spec.highest_is_best,
        final_status=stopped if stopped is not None else STOP_MAX,
        superior_arm=spec.arms[superior_idx] if superior_idx is not None else None,
        final_look=final_look,
        n_randomised_total=int(n_randomised),
        ns=tuple(int(x) for x in ns),
        sum_ys=tuple(float(x) for x in sums),
        raw_estimates=tuple(float(x) for x in raw),
        posterior_estimates=tuple(post_est),
        posterior_mad_sds=tuple(post_mad),
        final_prob_best=tuple(float(x) for x in pb_final),
        statuses=tuple(a.status for a in arm_states),
        status_looks=tuple(a.status_look for a in arm_states),
        available_at_end=tuple(available),
        in_final_analysis=tuple(in_final_analysis),
        alloc_trace=tuple(trace) if trace is not None else None,
    )


def _check_allocation(arm_states: Sequence[ArmState], probs: np.ndarray) -> None:
    total = probs.sum()
    if abs(total - 1.0) > 1e-9:
        raise EngineError(f"active allocations sum to {total!r}, not 1")
    for a in arm_states:
        if not a.active:
            if probs[a.index] != 0.0:
                raise EngineError(f"inactive arm {a.name!r} holds probability")
            continue
        p = probs[a.index]
        if a.fixed_prob is not None and abs(p - a.fixed_prob) > 1e-9:
            # an all-pinned simplex may renormalise the fixed values
            if any(s.active and s.fixed_prob is None for s in arm_states):
                raise EngineError(f"arm {a.name!r} departed from its fixed allocation")
        if a.min_prob is not None and p < a.min_prob - 1e-9:
            raise EngineError(f"arm {a.name!r} fell below its minimum allocation")
        if a.max_prob is not None and p > a.max_prob + 1e-9:
            raise EngineError(f"arm {a.name!r} exceeded its maximum allocation")
