"""Round-tripping of validated specs and outcome models to plain dicts.

Used by the batch store (so a stored batch is self-describing) and by the
config parser (to build outcome models from config mappings).
"""

from __future__ import annotations

from .design import TrialSpec, ValidatedSpec, validate_spec
from .errors import StoreError
from .outcomes import (
    BinomialOutcome,
    BinomialPooledPriorOutcome,
    HurdleBetaDaysOutcome,
    NormalOutcome,
    OutcomeModel,
)

_MODEL_CLASSES = {
    "binomial": BinomialOutcome,
    "normal": NormalOutcome,
    "hurdle_beta_days": HurdleBetaDaysOutcome,
    "binomial_pooled_prior": BinomialPooledPriorOutcome,
}


def model_to_dict(model: OutcomeModel) -> dict:
    out = {"variant": model.variant}
    for key, value in vars(model).items():
        out[key] = _plain(value)
    return out


def model_from_dict(data: dict) -> OutcomeModel:
    data = dict(data)
    variant = data.pop("variant", None)
    cls = _MODEL_CLASSES.get(variant)
    if cls is None:
        raise StoreError(f"unknown outcome model variant {variant!r}")
    kwargs = {}
    for key, value in data.items():
        kwargs[key] = _tupled(value)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise StoreError(f"bad outcome model payload: {exc}") from None


def spec_to_dict(spec: ValidatedSpec) -> dict:
    return {
        "arms": list(spec.arms),
        "control": spec.control,
        "outcome_model": model_to_dict(spec.outcome_model),
        "highest_is_best": spec.highest_is_best,
        "start_probs": list(spec.start_probs),
        "fixed_probs": list(spec.fixed_probs),
        "min_probs": list(spec.min_probs),
        "max_probs": list(spec.max_probs),
        "rescale_probs": spec.rescale_probs,
        "control_prob_fixed": spec.control_prob_fixed,
        "soften_power": list(spec.soften_power),
        "data_looks": list(spec.data_looks),
        "randomised_at_looks": list(spec.randomised_at_looks),
        "superiority": list(spec.superiority),
        "inferiority": list(spec.inferiority),
        "equivalence_prob": None if spec.equivalence_prob is None else list(spec.equivalence_prob),
        "equivalence_diff": spec.equivalence_diff,
        "equivalence_only_first": spec.equivalence_only_first,
        "futility_prob": None if spec.futility_prob is None else list(spec.futility_prob),
        "futility_diff": spec.futility_diff,
        "futility_only_first": spec.futility_only_first,
        "n_draws": spec.n_draws,
    }


def spec_from_dict(data: dict) -> ValidatedSpec:
    data = dict(data)
    model = model_from_dict(data.pop("outcome_model"))
    return validate_spec(TrialSpec(outcome_model=model, **data))


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def _tupled(value):
    if isinstance(value, list):
        return tuple(_tupled(v) for v in value)
    return value
