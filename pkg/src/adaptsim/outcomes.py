"""Outcome generation under scenario truths and posterior sampling per arm.

Each outcome model binds a variant (binomial, normal, hurdle-beta count,
binomial with a pooled prior) to its per-arm truth parameters and knows how
to do two things: generate participant outcomes during simulation, and turn
accumulated sufficient statistics into posterior draws on the natural
outcome scale (event probabilities, or means in outcome units).

Posterior samplers consume sufficient statistics (``ArmStats``) rather than
raw outcome vectors; the raw-vector entry points below compute the
statistics and share the same kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .rng import sample_beta, sample_binomial, sample_normal

__all__ = [
    "ArmStats",
    "BinomialOutcome",
    "BinomialPooledPriorOutcome",
    "HurdleBetaDaysOutcome",
    "NormalOutcome",
    "OutcomeModel",
    "PosteriorDraws",
    "beta_params_from_mean_var",
    "generate_outcomes",
    "pooled_prior_effective_n",
    "posterior_beta_binomial",
    "posterior_beta_pooled_prior",
    "posterior_normal_approx",
]

# Smallest admissible Beta shape. Degenerate pools (all events or none) can
# drive a pooled-prior pseudo-count to zero; clamping keeps the sampler
# defined while the posterior collapses toward the boundary, mirroring the
# degenerate limit.
_MIN_SHAPE = 1e-12


def beta_params_from_mean_var(mean: float, var: float) -> tuple[float, float]:
    """Convert a mean/variance Beta parameterisation to (alpha, beta).

    Requires ``0 < mean < 1`` and ``0 < var < mean * (1 - mean)``; outside
    that region no Beta distribution has these moments.
    """
    if not 0.0 < mean < 1.0:
        raise ValueError(f"mean must be in (0, 1), got {mean}")
    if not 0.0 < var < mean * (1.0 - mean):
        raise ValueError(
            f"variance must be in (0, mean * (1 - mean)) = (0, {mean * (1 - mean)}), got {var}"
        )
    common = var + mean**2 - mean
    alpha = abs(mean * common / var)
    beta = abs(common * (mean - 1.0) / var)
    return alpha, beta


def pooled_prior_effective_n(prior_sd: float, pooled_rate: float) -> float:
    """Participants carrying the same information as a log-odds-scale prior.

    Evaluates ``(1 / prior_sd**2) * (4 / r + 4 / (1 - r))`` at the pooled
    event rate ``r``. A degenerate rate (0 or 1) makes the expression
    non-finite, in which case the effective size falls back to 1 so callers
    never abort on an all-events or no-events interim pool.
    """
    if prior_sd <= 0.0:
        raise ValueError(f"prior_sd must be positive, got {prior_sd}")
    with np.errstate(divide="ignore"):
        r = float(pooled_rate)
        if r <= 0.0 or r >= 1.0:
            return 1.0
        n = (1.0 / prior_sd**2) * (4.0 / r + 4.0 / (1.0 - r))
    return n if math.isfinite(n) else 1.0


@dataclass(frozen=True)
class PosteriorDraws:
    """Matrix of posterior samples, one named column per active arm."""

    arms: tuple[str, ...]
    values: np.ndarray  # shape (n_draws, len(arms)), natural outcome scale

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != len(self.arms):
            raise ValueError("values must be (n_draws, n_arms) matching arms")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("posterior draws must be finite")

    @property
    def n_draws(self) -> int:
        return self.values.shape[0]

    def column(self, arm: str) -> np.ndarray:
        return self.values[:, self.arms.index(arm)]


@dataclass
class ArmStats:
    """Sufficient statistics of the analysed participants, all arms.

    ``n``, ``total`` and ``total_sq`` are per-arm counts, outcome sums and
    squared-outcome sums in canonical arm order; ``y_min``/``y_max`` are the
    extremes pooled over every analysed outcome. Dropped arms keep
    accumulating here so pooled quantities retain their data.
    """

    n: np.ndarray
    total: np.ndarray
    total_sq: np.ndarray
    y_min: float
    y_max: float

    @classmethod
    def empty(cls, n_arms: int) -> "ArmStats":
        return cls(
            n=np.zeros(n_arms),
            total=np.zeros(n_arms),
            total_sq=np.zeros(n_arms),
            y_min=math.inf,
            y_max=-math.inf,
        )

    def add(self, alloc_idx: np.ndarray, ys: np.ndarray) -> None:
        """Fold one slice of (arm index, outcome) pairs into the totals."""
        if alloc_idx.size == 0:
            return
        k = self.n.shape[0]
        self.n += np.bincount(alloc_idx, minlength=k)
        self.total += np.bincount(alloc_idx, weights=ys, minlength=k)
        self.total_sq += np.bincount(alloc_idx, weights=ys * ys, minlength=k)
        self.y_min = min(self.y_min, float(ys.min()))
        self.y_max = max(self.y_max, float(ys.max()))

    @classmethod
    def from_outcomes(cls, n_arms: int, alloc_idx, ys) -> "ArmStats":
        stats = cls.empty(n_arms)
        stats.add(np.asarray(alloc_idx, dtype=np.intp), np.asarray(ys, dtype=np.float64))
        return stats


class OutcomeModel:
    """Base class binding an outcome variant to per-arm truth parameters."""

    variant: str = ""
    percent_scale: bool = False  # truths print as percentages (labels, tables)

    @property
    def n_arms(self) -> int:
        raise NotImplementedError

    def with_params(self, params) -> "OutcomeModel":
        """Same model configuration with replaced per-arm truths."""
        raise NotImplementedError

    def param_violations(self, n_arms: int) -> list[tuple[str, str]]:
        """(code, message) pairs for every violated truth-parameter rule."""
        raise NotImplementedError

    def truth_values(self) -> tuple[float, ...]:
        """Per-arm scenario truth on the natural outcome scale."""
        raise NotImplementedError

    def generate(self, alloc_idx: np.ndarray, rng) -> np.ndarray:
        """Outcomes positionally aligned with the given arm indices."""
        out = np.empty(alloc_idx.shape[0], dtype=np.float64)
        for i in range(self.n_arms):
            ii = np.nonzero(alloc_idx == i)[0]
            if ii.size:
                out[ii] = self._draw_arm(i, ii.size, rng)
        return out

    def _draw_arm(self, arm: int, count: int, rng) -> np.ndarray:
        raise NotImplementedError

    def posterior_columns(self, stats: ArmStats, active: Sequence[int], n_draws: int, rng):
        """Posterior sample columns for the requested (active) arms."""
        raise NotImplementedError


@dataclass(frozen=True)
class BinomialOutcome(OutcomeModel):
    """Binary outcomes with conjugate beta-binomial posteriors.

    The default flat Beta(1, 1) prior corresponds to two pseudo-participants,
    one with the event and one without.
    """

    probs: tuple[float, ...]
    prior: tuple[float, float] = (1.0, 1.0)

    variant = "binomial"
    percent_scale = True

    @property
    def n_arms(self) -> int:
        return len(self.probs)

    def with_params(self, params) -> "BinomialOutcome":
        return replace(self, probs=tuple(float(p) for p in params))

    def param_violations(self, n_arms):
        out = []
        if len(self.probs) != n_arms:
            out.append(("true-params-length", f"expected {n_arms} event probabilities"))
        if any(not 0.0 <= p <= 1.0 for p in self.probs):
            out.append(("true-params-range", "event probabilities must be in [0, 1]"))
        if self.prior[0] <= 0.0 or self.prior[1] <= 0.0:
            out.append(("prior-shape-positive", "beta prior shapes must be positive"))
        return out

    def truth_values(self):
        return self.probs

    def _draw_arm(self, arm, count, rng):
        return sample_binomial(rng, 1, self.probs[arm], size=count).astype(np.float64)

    def posterior_columns(self, stats, active, n_draws, rng):
        a0, b0 = self.prior
        cols = []
        for i in active:
            events = stats.total[i]
            cols.append(
                sample_beta(rng, a0 + events, b0 + stats.n[i] - events, size=n_draws)
            )
        return cols


@dataclass(frozen=True)
class NormalOutcome(OutcomeModel):
    """Continuous outcomes; posteriors approximate the sampling distribution
    of each arm's mean with no prior information."""

    params: tuple[tuple[float, float], ...]  # per arm (true mean, true sd)

    variant = "normal"

    @property
    def n_arms(self) -> int:
        return len(self.params)

    def with_params(self, params) -> "NormalOutcome":
        return replace(self, params=tuple((float(m), float(s)) for m, s in params))

    def param_violations(self, n_arms):
        out = []
        if len(self.params) != n_arms:
            out.append(("true-params-length", f"expected {n_arms} (mean, sd) pairs"))
        if any(s < 0.0 for _, s in self.params):
            out.append(("true-params-range", "true sds must be non-negative"))
        return out

    def truth_values(self):
        return tuple(m for m, _ in self.params)

    def _draw_arm(self, arm, count, rng):
        mean, sd = self.params[arm]
        return sample_normal(rng, mean, sd, size=count)

    def posterior_columns(self, stats, active, n_draws, rng):
        return _normal_approx_columns(stats, active, n_draws, rng)


@dataclass(frozen=True)
class HurdleBetaDaysOutcome(OutcomeModel):
    """Zero-inflated count outcome on 0..max_days (e.g. days alive without
    life support).

    A Bernoulli hurdle produces the zeroes; positive counts come from a Beta
    draw scaled to ``max_days`` and rounded up, so the beta branch can never
    emit 0 but can emit the maximum. The beta variance is a model-level
    constant: scenario differences are expressed through the zero proportion
    and the positive-part mean only. Analysis uses the normal approximation
    of the arm means on the day scale.
    """

    params: tuple[tuple[float, float], ...]  # per arm (prop_zero, mean prop if > 0)
    variance: float = 0.05
    max_days: int = 29

    variant = "hurdle_beta_days"

    @property
    def n_arms(self) -> int:
        return len(self.params)

    def with_params(self, params) -> "HurdleBetaDaysOutcome":
        return replace(self, params=tuple((float(a), float(b)) for a, b in params))

    def param_violations(self, n_arms):
        out = []
        if len(self.params) != n_arms:
            out.append(
                ("true-params-length", f"expected {n_arms} (prop_zero, mean_prop) pairs")
            )
        for p0, mu in self.params:
            if not 0.0 <= p0 <= 1.0:
                out.append(("true-params-range", f"prop_zero must be in [0, 1], got {p0}"))
            if not 0.0 < mu < 1.0:
                out.append(("true-params-range", f"mean_prop must be in (0, 1), got {mu}"))
            elif self.variance >= mu * (1.0 - mu) or self.variance <= 0.0:
                out.append(
                    (
                        "hurdle-variance-infeasible",
                        f"variance must be in (0, mean*(1-mean)) for mean {mu}",
                    )
                )
        if self.max_days < 1:
            out.append(("max-days-positive", "max_days must be >= 1"))
        return out

    def truth_values(self):
        # The ceiling shifts the mean above prop * max_days, so the truth is
        # the exact mean of the rounded mixture, not the unrounded target.
        return tuple(
            (1.0 - p0) * _ceil_beta_mean(mu, self.variance, self.max_days)
            for p0, mu in self.params
        )

    def _draw_arm(self, arm, count, rng):
        p0, mu = self.params[arm]
        alpha, beta = beta_params_from_mean_var(mu, self.variance)
        zero = sample_binomial(rng, 1, p0, size=count)
        frac = sample_beta(rng, alpha, beta, size=count)
        return np.ceil((1.0 - zero) * frac * self.max_days)

    def posterior_columns(self, stats, active, n_draws, rng):
        return _normal_approx_columns(stats, active, n_draws, rng)


@dataclass(frozen=True)
class BinomialPooledPriorOutcome(OutcomeModel):
    """Binary outcomes analysed with a neutral informative prior.

    The prior is specified as a normal SD on the log odds ratio scale and
    translated, at each analysis, into beta pseudo-counts shared equally
    between arms at the current pooled event rate. The pooled rate uses
    every analysed outcome, including data from arms dropped earlier.
    """

    probs: tuple[float, ...]
    prior_sd: float = 0.5

    variant = "binomial_pooled_prior"
    percent_scale = True

    @property
    def n_arms(self) -> int:
        return len(self.probs)

    def with_params(self, params) -> "BinomialPooledPriorOutcome":
        return replace(self, probs=tuple(float(p) for p in params))

    def param_violations(self, n_arms):
        out = []
        if len(self.probs) != n_arms:
            out.append(("true-params-length", f"expected {n_arms} event probabilities"))
        if any(not 0.0 <= p <= 1.0 for p in self.probs):
            out.append(("true-params-range", "event probabilities must be in [0, 1]"))
        if self.prior_sd <= 0.0:
            out.append(("prior-sd-positive", "prior_sd must be positive"))
        return out

    def truth_values(self):
        return self.probs

    def _draw_arm(self, arm, count, rng):
        return sample_binomial(rng, 1, self.probs[arm], size=count).astype(np.float64)

    def posterior_columns(self, stats, active, n_draws, rng):
        pooled_n = float(stats.n.sum())
        r = float(stats.total.sum()) / pooled_n if pooled_n > 0 else 0.5
        eff_n = pooled_prior_effective_n(self.prior_sd, r)
        cols = []
        for i in active:
            events = stats.total[i]
            a = max(eff_n * r / 2.0 + events, _MIN_SHAPE)
            b = max(eff_n * (1.0 - r) / 2.0 + stats.n[i] - events, _MIN_SHAPE)
            cols.append(sample_beta(rng, a, b, size=n_draws))
        return cols


def _ceil_beta_mean(mean: float, var: float, max_days: int) -> float:
    """Exact mean of ceil(B * max_days) for B ~ Beta with given moments."""
    from scipy.stats import beta as beta_dist

    alpha, b = beta_params_from_mean_var(mean, var)
    grid = np.arange(0, max_days + 1) / max_days
    cdf = beta_dist.cdf(grid, alpha, b)
    pmf = np.diff(cdf)
    return float(np.arange(1, max_days + 1) @ pmf)


def _normal_approx_columns(stats: ArmStats, active, n_draws, rng):
    """Normal posterior approximation of each arm mean.

    Arms with more than one analysed participant get
    ``Normal(mean, pop_sd / sqrt(n - 1))``. Arms with 0 or 1 participants
    fall back to extreme uncertainty spanned by the pooled data:
    ``Normal(pooled mean, 1000 * (max - min))``.
    """
    pooled_n = float(stats.n.sum())
    if pooled_n <= 0:
        raise ValueError("normal approximation needs at least one outcome overall")
    pooled_mean = float(stats.total.sum()) / pooled_n
    fallback_sd = 1000.0 * (stats.y_max - stats.y_min)
    cols = []
    for i in active:
        n = stats.n[i]
        if n > 1:
            mean = stats.total[i] / n
            var_pop = max(stats.total_sq[i] / n - mean * mean, 0.0)
            cols.append(sample_normal(rng, mean, math.sqrt(var_pop) / math.sqrt(n - 1.0), size=n_draws))
        else:
            cols.append(sample_normal(rng, pooled_mean, fallback_sd, size=n_draws))
    return cols


def generate_outcomes(model: OutcomeModel, allocs: Sequence[str], arms: Sequence[str], rng) -> np.ndarray:
    """Generate outcomes for named allocations, aligned positionally.

    ``arms`` fixes the canonical arm order; every element of ``allocs`` must
    be one of them.
    """
    index = {a: i for i, a in enumerate(arms)}
    try:
        alloc_idx = np.array([index[a] for a in allocs], dtype=np.intp)
    except KeyError as err:
        raise ValueError(f"unknown arm name {err.args[0]!r}") from None
    return model.generate(alloc_idx, rng)


def _wrap_draws(cols, arms, n_arms) -> PosteriorDraws:
    names = tuple(arms) if arms is not None else tuple(f"arm_{i}" for i in range(n_arms))
    return PosteriorDraws(names, np.column_stack(cols))


def posterior_beta_binomial(events, n, prior=(1.0, 1.0), n_draws=10000, rng=None, arms=None) -> PosteriorDraws:
    """Beta-binomial posterior draws per arm, one column per arm."""
    events = np.asarray(events, dtype=np.float64)
    counts = np.asarray(n, dtype=np.float64)
    if np.any(events < 0) or np.any(counts < 0) or np.any(events > counts):
        raise ValueError("need 0 <= events <= n in every arm")
    model = BinomialOutcome(probs=tuple(0.0 for _ in events), prior=(float(prior[0]), float(prior[1])))
    stats = ArmStats(
        n=counts, total=events, total_sq=events.copy(), y_min=0.0, y_max=1.0
    )
    cols = model.posterior_columns(stats, range(len(events)), n_draws, rng)
    return _wrap_draws(cols, arms, len(events))


def posterior_normal_approx(ys_by_arm, n_draws=10000, rng=None, arms=None) -> PosteriorDraws:
    """Normal-approximation posterior draws from raw per-arm outcome lists."""
    k = len(ys_by_arm)
    stats = ArmStats.empty(k)
    for i, ys in enumerate(ys_by_arm):
        ys = np.asarray(ys, dtype=np.float64)
        stats.add(np.full(ys.shape[0], i, dtype=np.intp), ys)
    cols = _normal_approx_columns(stats, range(k), n_draws, rng)
    return _wrap_draws(cols, arms, k)


def posterior_beta_pooled_prior(events, n, prior_sd, n_draws=10000, rng=None, arms=None) -> PosteriorDraws:
    """Pooled-prior beta posterior draws per arm."""
    events = np.asarray(events, dtype=np.float64)
    counts = np.asarray(n, dtype=np.float64)
    if len(events) < 2:
        raise ValueError("pooled prior needs two or more arms")
    if np.any(events < 0) or np.any(counts < 0) or np.any(events > counts):
        raise ValueError("need 0 <= events <= n in every arm")
    model = BinomialPooledPriorOutcome(probs=tuple(0.0 for _ in events), prior_sd=float(prior_sd))
    stats = ArmStats(n=counts, total=events, total_sq=events.copy(), y_min=0.0, y_max=1.0)
    cols = model.posterior_columns(stats, range(len(events)), n_draws, rng)
    return _wrap_draws(cols, arms, len(events))
