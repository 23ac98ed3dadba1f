"""Declarative trial-design specification and its validation.

A ``TrialSpec`` collects everything a simulated trial needs: arms, outcome
model with scenario truths, look schedule, allocation rules and stopping
rules. ``validate_spec`` checks every invariant and returns a normalized,
immutable ``ValidatedSpec`` (auto allocation resolved, scalar thresholds
broadcast per look) that the engine, metrics and calibration consume.

Stopping thresholds of exactly 1 (or 0 for inferiority) combined with the
engine's strict-inequality triggers act as disabled sentinels, which is how
burn-in periods switch rules off at early analyses.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, fields
from typing import Optional, Sequence, Union

import numpy as np

from ._simplex import clamp_simplex
from .errors import ValidationError
from .outcomes import OutcomeModel

__all__ = [
    "ThresholdSet",
    "TrialSpec",
    "ValidatedSpec",
    "sqrt_control_prob",
    "thresholds_at_look",
    "validate_spec",
]

RESCALE_CHOICES = ("none", "limits")
CONTROL_RULE_CHOICES = ("none", "sqrt-based", "match")

PerLook = Union[float, Sequence[float]]


def sqrt_control_prob(n_noncontrol_active: int) -> float:
    """Fixed control-arm allocation for ``k`` active non-control arms.

    Allocates sqrt(k) : 1 : ... : 1 between control and the k non-control
    arms, i.e. the control receives ``sqrt(k) / (sqrt(k) + k)``. Strictly
    decreasing in k, equal to 0.5 for a single comparator.
    """
    k = int(n_noncontrol_active)
    if k < 1:
        raise ValueError(f"need at least one non-control arm, got {k}")
    root = math.sqrt(k)
    return root / (root + k)


@dataclass(frozen=True)
class ThresholdSet:
    """Probability thresholds in force at one analysis."""

    superiority: float
    inferiority: float
    equivalence_prob: Optional[float] = None
    futility_prob: Optional[float] = None


@dataclass(frozen=True)
class TrialSpec:
    """User-facing trial design description (pre-validation).

    ``outcome_model`` carries the per-arm scenario truths. Thresholds may be
    scalars (applied at every look) or per-look sequences matching
    ``data_looks``. ``start_probs="auto"`` resolves to equal allocation, or
    to the sqrt-based split when ``control_prob_fixed="sqrt-based"``.
    """

    arms: Sequence[str]
    outcome_model: OutcomeModel
    data_looks: Sequence[int]
    randomised_at_looks: Optional[Sequence[int]] = None
    control: Optional[str] = None
    highest_is_best: bool = False
    start_probs: Union[str, Sequence[float]] = "auto"
    fixed_probs: Optional[Sequence[Optional[float]]] = None
    min_probs: Optional[Sequence[Optional[float]]] = None
    max_probs: Optional[Sequence[Optional[float]]] = None
    rescale_probs: str = "none"
    soften_power: PerLook = 1.0
    control_prob_fixed: str = "none"
    superiority: PerLook = 0.99
    inferiority: PerLook = 0.01
    equivalence_prob: Optional[PerLook] = None
    equivalence_diff: Optional[float] = None
    equivalence_only_first: bool = False
    futility_prob: Optional[PerLook] = None
    futility_diff: Optional[float] = None
    futility_only_first: bool = False
    n_draws: int = 10000


@dataclass(frozen=True)
class ValidatedSpec:
    """Normalized, immutable trial design.

    Construct via :func:`validate_spec`. All per-look quantities are tuples
    of length ``n_looks``; per-arm limit entries are floats or None. The
    object is safe to share across concurrent simulation workers.
    """

    arms: tuple[str, ...]
    control: Optional[str]
    control_index: Optional[int]
    outcome_model: OutcomeModel
    highest_is_best: bool
    start_probs: tuple[float, ...]
    fixed_probs: tuple[Optional[float], ...]
    min_probs: tuple[Optional[float], ...]
    max_probs: tuple[Optional[float], ...]
    rescale_probs: str
    control_prob_fixed: str
    soften_power: tuple[float, ...]
    data_looks: tuple[int, ...]
    randomised_at_looks: tuple[int, ...]
    superiority: tuple[float, ...]
    inferiority: tuple[float, ...]
    equivalence_prob: Optional[tuple[float, ...]]
    equivalence_diff: Optional[float]
    equivalence_only_first: bool
    futility_prob: Optional[tuple[float, ...]]
    futility_diff: Optional[float]
    futility_only_first: bool
    n_draws: int

    @property
    def n_arms(self) -> int:
        return len(self.arms)

    @property
    def n_looks(self) -> int:
        return len(self.data_looks)

    @property
    def max_n(self) -> int:
        return self.randomised_at_looks[-1]

    def truth_values(self) -> tuple[float, ...]:
        return self.outcome_model.truth_values()

    def thresholds_at_look(self, look_index: int) -> ThresholdSet:
        return thresholds_at_look(self, look_index)

    def _as_trial_spec(self, **overrides) -> "TrialSpec":
        kwargs = {
            f.name: getattr(self, f.name)
            for f in fields(TrialSpec)
            if f.name not in overrides
        }
        kwargs.update(overrides)
        return TrialSpec(**kwargs)

    def with_outcome_params(self, params) -> "ValidatedSpec":
        """Same design under different scenario truths (revalidated)."""
        return validate_spec(
            self._as_trial_spec(outcome_model=self.outcome_model.with_params(params))
        )

    def with_thresholds(self, superiority: PerLook, inferiority: PerLook) -> "ValidatedSpec":
        return validate_spec(
            self._as_trial_spec(superiority=superiority, inferiority=inferiority)
        )

    def fingerprint(self) -> str:
        """Content hash identifying this design (and its scenario truths)."""
        payload = {"schema": "adaptsim-spec-v1"}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "outcome_model":
                value = {
                    "variant": value.variant,
                    **{k: _plain(v) for k, v in vars(value).items()},
                }
            payload[f.name] = _plain(value)
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def thresholds_at_look(spec: ValidatedSpec, look_index: int) -> ThresholdSet:
    """Thresholds in force at ``look_index`` (0-based index into the schedule)."""
    if not 0 <= look_index < spec.n_looks:
        raise IndexError(f"look {look_index} outside schedule of {spec.n_looks} looks")
    return ThresholdSet(
        superiority=spec.superiority[look_index],
        inferiority=spec.inferiority[look_index],
        equivalence_prob=(
            spec.equivalence_prob[look_index] if spec.equivalence_prob is not None else None
        ),
        futility_prob=(
            spec.futility_prob[look_index] if spec.futility_prob is not None else None
        ),
    )


def validate_spec(spec: Union[TrialSpec, ValidatedSpec]) -> ValidatedSpec:
    """Validate and normalize a trial design.

    Idempotent: validating a ``ValidatedSpec`` returns it unchanged. Raises
    :class:`ValidationError` listing every violated invariant by name.
    """
    if isinstance(spec, ValidatedSpec):
        return spec
    v = _Validator(spec)
    return v.run()


class _Validator:
    def __init__(self, spec: TrialSpec):
        self.spec = spec
        self.problems: list[tuple[str, str]] = []

    def err(self, code: str, msg: str) -> None:
        self.problems.append((code, msg))

    def run(self) -> ValidatedSpec:
        s = self.spec
        arms = tuple(str(a) for a in s.arms)
        if len(arms) < 2:
            self.err("too-few-arms", f"need at least 2 arms, got {len(arms)}")
        if len(set(arms)) != len(arms):
            self.err("arms-not-unique", "arm names must be unique")

        control_index = None
        if s.control is not None:
            if s.control in arms:
                control_index = arms.index(s.control)
            else:
                self.err("control-unknown", f"control {s.control!r} is not an arm")

        for code, msg in s.outcome_model.param_violations(len(arms)):
            self.err(code, msg)

        data_looks, randomised = self._looks()
        n_looks = len(data_looks)

        superiority = self._per_look("superiority", s.superiority, n_looks)
        inferiority = self._per_look("inferiority", s.inferiority, n_looks)
        if superiority and inferiority:
            for j, (inf, sup) in enumerate(zip(inferiority, superiority)):
                if inf >= sup:
                    self.err(
                        "thresholds-overlap",
                        f"inferiority {inf} >= superiority {sup} at look {j}",
                    )
                    break

        equivalence_prob, equivalence_diff = self._paired_rule(
            "equivalence", s.equivalence_prob, s.equivalence_diff, n_looks
        )
        futility_prob, futility_diff = self._paired_rule(
            "futility", s.futility_prob, s.futility_diff, n_looks
        )
        if s.futility_prob is not None and s.control is None:
            self.err("futility-without-control", "futility rules need a common control arm")
        if s.equivalence_only_first and s.control is None:
            self.err("only-first-without-control", "equivalence_only_first needs a control")
        if s.futility_only_first and s.control is None:
            self.err("only-first-without-control", "futility_only_first needs a control")

        soften = self._per_look("soften_power", s.soften_power, n_looks, lo=0.0, hi=1.0)

        if s.rescale_probs not in RESCALE_CHOICES:
            self.err("rescale-probs-unknown", f"rescale_probs must be one of {RESCALE_CHOICES}")
        if s.control_prob_fixed not in CONTROL_RULE_CHOICES:
            self.err(
                "control-rule-unknown",
                f"control_prob_fixed must be one of {CONTROL_RULE_CHOICES}",
            )
        if s.control_prob_fixed != "none" and s.control is None:
            self.err("control-rule-without-control", "control_prob_fixed needs a control arm")

        fixed = self._limit_vector("fixed_probs", s.fixed_probs, len(arms))
        mins = self._limit_vector("min_probs", s.min_probs, len(arms))
        maxs = self._limit_vector("max_probs", s.max_probs, len(arms))
        self._check_limits(arms, control_index, fixed, mins, maxs)

        if int(s.n_draws) < 1:
            self.err("n-draws-positive", f"n_draws must be positive, got {s.n_draws}")

        start = self._start_probs(arms, control_index, fixed, mins, maxs)

        if self.problems:
            raise ValidationError(self.problems)

        return ValidatedSpec(
            arms=arms,
            control=s.control,
            control_index=control_index,
            outcome_model=s.outcome_model,
            highest_is_best=bool(s.highest_is_best),
            start_probs=start,
            fixed_probs=fixed,
            min_probs=mins,
            max_probs=maxs,
            rescale_probs=s.rescale_probs,
            control_prob_fixed=s.control_prob_fixed,
            soften_power=soften,
            data_looks=data_looks,
            randomised_at_looks=randomised,
            superiority=superiority,
            inferiority=inferiority,
            equivalence_prob=equivalence_prob,
            equivalence_diff=equivalence_diff,
            equivalence_only_first=bool(s.equivalence_only_first),
            futility_prob=futility_prob,
            futility_diff=futility_diff,
            futility_only_first=bool(s.futility_only_first),
            n_draws=int(s.n_draws),
        )

    def _looks(self):
        s = self.spec
        data = tuple(int(x) for x in s.data_looks)
        if not data or data[0] < 1 or any(b <= a for a, b in zip(data, data[1:])):
            self.err("data-looks-invalid", "data_looks must be strictly increasing positive integers")
        if s.randomised_at_looks is None:
            rand = data
        else:
            rand = tuple(int(x) for x in s.randomised_at_looks)
            if len(rand) != len(data):
                self.err("look-length-mismatch", "randomised_at_looks must match data_looks in length")
                return data, data
            if any(b < a for a, b in zip(rand, rand[1:])):
                self.err("randomised-not-monotone", "randomised_at_looks must be non-decreasing")
            if any(r < d for d, r in zip(data, rand)):
                self.err("randomised-below-data", "randomised_at_looks must be >= data_looks elementwise")
            if data and rand and rand[-1] != data[-1]:
                self.err(
                    "final-look-mismatch",
                    "the final entries of data_looks and randomised_at_looks must be equal",
                )
        return data, rand

    def _per_look(self, name, value, n_looks, lo=0.0, hi=1.0):
        if np.isscalar(value):
            vals = (float(value),) * max(n_looks, 1)
        else:
            vals = tuple(float(x) for x in value)
            if len(vals) != n_looks:
                self.err(f"{name}-length", f"{name} must be scalar or have one value per look")
                vals = (vals + (vals[-1] if vals else lo,) * n_looks)[:n_looks]
        if any(not lo <= x <= hi for x in vals):
            self.err(f"{name}-range", f"{name} values must lie in [{lo}, {hi}]")
        return vals

    def _paired_rule(self, name, prob, diff, n_looks):
        if prob is None and diff is None:
            return None, None
        if prob is None or diff is None:
            self.err(f"{name}-incomplete", f"{name}_prob and {name}_diff must be given together")
            return None, None
        probs = self._per_look(f"{name}_prob", prob, n_looks)
        if np.isscalar(diff):
            d = float(diff)
        else:
            ds = {float(x) for x in diff}
            if len(ds) != 1:
                self.err(f"{name}-diff-not-constant", f"{name}_diff must be constant across looks")
                return probs, None
            d = ds.pop()
        if d <= 0.0:
            self.err(f"{name}-diff-positive", f"{name}_diff must be > 0, got {d}")
        return probs, d

    def _limit_vector(self, name, value, n_arms):
        if value is None:
            return (None,) * n_arms
        vals = tuple(None if x is None else float(x) for x in value)
        if len(vals) != n_arms:
            self.err(f"{name}-length", f"{name} must have one entry per arm")
            return (None,) * n_arms
        if any(x is not None and not 0.0 <= x <= 1.0 for x in vals):
            self.err("prob-out-of-range", f"{name} entries must lie in [0, 1]")
        return vals

    def _check_limits(self, arms, control_index, fixed, mins, maxs):
        for i, arm in enumerate(arms):
            if fixed[i] is not None and (mins[i] is not None or maxs[i] is not None):
                self.err(
                    "fixed-and-limit-conflict",
                    f"arm {arm!r} cannot combine fixed_probs with min/max_probs",
                )
            if mins[i] is not None and maxs[i] is not None and mins[i] > maxs[i]:
                self.err("limits-crossed", f"arm {arm!r} has min_prob > max_prob")
        if self.spec.control_prob_fixed != "none" and control_index is not None:
            if any(v[control_index] is not None for v in (fixed, mins, maxs)):
                self.err(
                    "control-rule-limit-conflict",
                    "a fixed control-allocation rule excludes fixed/min/max for the control arm",
                )
        fixed_total = sum(f for f in fixed if f is not None)
        free = [i for i, f in enumerate(fixed) if f is None]
        if not free:
            if abs(fixed_total - 1.0) > 1e-9:
                self.err("fixed-probs-sum", "fixed allocations of every arm must sum to 1")
            return
        total_min = fixed_total + sum(0.0 if mins[i] is None else mins[i] for i in free)
        if total_min >= 1.0 - 1e-12:
            self.err("min-probs-infeasible", "minimum allocations must sum below 1")
        total_max = fixed_total + sum(1.0 if maxs[i] is None else maxs[i] for i in free)
        if total_max <= 1.0 - 1e-9:
            self.err("max-probs-infeasible", "maximum allocations must sum above 1")

    def _start_probs(self, arms, control_index, fixed, mins, maxs):
        s = self.spec
        k = len(arms)
        if isinstance(s.start_probs, str):
            if s.start_probs != "auto":
                self.err("start-probs-invalid", "start_probs must be 'auto' or per-arm values")
                return (1.0 / k,) * k
            weights = np.ones(k)
            pinned: dict[int, float] = {
                i: f for i, f in enumerate(fixed) if f is not None
            }
            if (
                s.control_prob_fixed == "sqrt-based"
                and control_index is not None
                and k >= 2
            ):
                pinned[control_index] = sqrt_control_prob(k - 1)
            try:
                probs = _distribute(weights, pinned, mins, maxs)
            except Exception as exc:
                self.err("start-probs-infeasible", str(exc))
                return (1.0 / k,) * k
            return tuple(float(p) for p in probs)
        vals = tuple(float(x) for x in s.start_probs)
        if len(vals) != k:
            self.err("start-probs-length", "start_probs must have one entry per arm")
            return (1.0 / k,) * k
        if any(not 0.0 <= x <= 1.0 for x in vals):
            self.err("prob-out-of-range", "start_probs entries must lie in [0, 1]")
        if abs(sum(vals) - 1.0) > 1e-9:
            self.err("start-probs-sum", f"start_probs must sum to 1, got {sum(vals)!r}")
        for i, p in enumerate(vals):
            lo = 0.0 if mins[i] is None else mins[i]
            hi = 1.0 if maxs[i] is None else maxs[i]
            if fixed[i] is not None and abs(p - fixed[i]) > 1e-9:
                self.err(
                    "start-probs-outside-limits",
                    f"start prob of arm {arms[i]!r} conflicts with its fixed_prob",
                )
            elif not lo - 1e-9 <= p <= hi + 1e-9:
                self.err(
                    "start-probs-outside-limits",
                    f"start prob of arm {arms[i]!r} violates its allocation limits",
                )
        return vals


def _distribute(weights, pinned, mins, maxs) -> np.ndarray:
    """Spread non-pinned mass proportionally to weights, respecting limits."""
    k = len(weights)
    out = np.zeros(k)
    free = [i for i in range(k) if i not in pinned]
    for i, p in pinned.items():
        out[i] = p
    if not free:
        if abs(out.sum() - 1.0) > 1e-9:
            raise ValueError("fixed allocations of all arms must sum to 1")
        return out
    mass = 1.0 - sum(pinned.values())
    if mass < -1e-12:
        raise ValueError("fixed allocations must sum to at most 1")
    lows = np.array([0.0 if mins[i] is None else mins[i] for i in free])
    highs = np.array([1.0 if maxs[i] is None else maxs[i] for i in free])
    out[free] = clamp_simplex(np.asarray(weights, dtype=float)[free], lows, highs, total=mass)
    return out
