"""Bayesian adaptive trial simulation.

Design multi-arm trials with adaptive stopping, arm dropping and
response-adaptive randomisation; simulate them at scale with reproducible
counter-based RNG streams; summarise operating characteristics; and
calibrate stopping thresholds to a target type 1 error with a
Gaussian-process search.
"""

from ._version import __version__
from .calibration import (
    CalibrationResult,
    GPControls,
    GPModel,
    calibrate,
    evaluate_threshold,
    gp_fit,
    propose_next,
)
from .config import SpecSet, parse_config, parse_config_text
from .design import (
    ThresholdSet,
    TrialSpec,
    ValidatedSpec,
    sqrt_control_prob,
    thresholds_at_look,
    validate_spec,
)
from .engine import (
    ArmState,
    ComparisonProbs,
    LookOutcome,
    TrialResult,
    evaluate_look_no_control,
    evaluate_look_with_control,
    pairwise_vs_control,
    prob_all_equivalent,
    prob_best,
    rescale_limits,
    run_trial,
    update_allocation,
)
from .errors import (
    AdaptsimError,
    CalibrationError,
    ConfigError,
    EngineError,
    StoreError,
    ValidationError,
)
from .metrics import (
    MetricValue,
    PerformanceSummary,
    SelectionStrategy,
    bootstrap_ci,
    idp,
    remaining_arm_combos,
    select_arm,
    summarize_batch,
)
from .outcomes import (
    ArmStats,
    BinomialOutcome,
    BinomialPooledPriorOutcome,
    HurdleBetaDaysOutcome,
    NormalOutcome,
    OutcomeModel,
    PosteriorDraws,
    beta_params_from_mean_var,
    generate_outcomes,
    pooled_prior_effective_n,
    posterior_beta_binomial,
    posterior_beta_pooled_prior,
    posterior_normal_approx,
)
from .reporting import SessionLog, calibration_report, export_metrics_csv
from .rng import (
    BOOTSTRAP_STREAM_BASE,
    ORACLE_STREAM_BASE,
    derive_stream,
    sample_beta,
    sample_binomial,
    sample_categorical,
    sample_normal,
)
from .runner import Batch, run_batch
from .scenarios import scenario_grid, scenario_label
from .store import RunManifest, load_batch_file, save_batch_file

__all__ = [
    "AdaptsimError",
    "ArmState",
    "ArmStats",
    "BOOTSTRAP_STREAM_BASE",
    "Batch",
    "BinomialOutcome",
    "BinomialPooledPriorOutcome",
    "CalibrationError",
    "CalibrationResult",
    "ComparisonProbs",
    "ConfigError",
    "EngineError",
    "GPControls",
    "GPModel",
    "HurdleBetaDaysOutcome",
    "LookOutcome",
    "MetricValue",
    "NormalOutcome",
    "ORACLE_STREAM_BASE",
    "OutcomeModel",
    "PerformanceSummary",
    "PosteriorDraws",
    "RunManifest",
    "SelectionStrategy",
    "SessionLog",
    "SpecSet",
    "StoreError",
    "ThresholdSet",
    "TrialResult",
    "TrialSpec",
    "ValidatedSpec",
    "ValidationError",
    "__version__",
    "beta_params_from_mean_var",
    "bootstrap_ci",
    "calibrate",
    "calibration_report",
    "derive_stream",
    "evaluate_look_no_control",
    "evaluate_look_with_control",
    "evaluate_threshold",
    "export_metrics_csv",
    "generate_outcomes",
    "gp_fit",
    "idp",
    "load_batch_file",
    "pairwise_vs_control",
    "parse_config",
    "parse_config_text",
    "pooled_prior_effective_n",
    "posterior_beta_binomial",
    "posterior_beta_pooled_prior",
    "posterior_normal_approx",
    "prob_all_equivalent",
    "prob_best",
    "propose_next",
    "remaining_arm_combos",
    "rescale_limits",
    "run_batch",
    "run_trial",
    "sample_beta",
    "sample_binomial",
    "sample_categorical",
    "sample_normal",
    "save_batch_file",
    "scenario_grid",
    "scenario_label",
    "select_arm",
    "sqrt_control_prob",
    "summarize_batch",
    "thresholds_at_look",
    "update_allocation",
    "validate_spec",
]
