"""Human-writable YAML design configs.

One document describes one design; optional scenario blocks override the
truth parameters only, and a ``scenario_grid`` block expands effect
offsets into labelled scenarios. Unknown keys are errors. Diagnostics cite
the config line where the offending value starts whenever YAML provides
one.

Schema sketch (see README for the full reference)::

    name: primary-null
    arms: [Arm A, Arm B, Arm C]
    control: null
    outcome: {model: binomial}
    true_params: [0.25, 0.25, 0.25]
    highest_is_best: false
    start_probs: auto
    min_probs: [0.25, 0.25, 0.25]
    rescale_probs: limits
    soften_power: 0.5
    data_looks: {from: 500, to: 10000, by: 250}
    randomised_at_looks: {lag: 200}
    superiority: 0.99
    inferiority: 0.01
    equivalence_prob: {value: 0.9, burn_in_data: 1500}
    equivalence_diff: 0.025
    n_draws: 10000
    scenario_grid:
      effects:
        Arm B: [0, 0.025, -0.025, 0.05, -0.05]
        Arm C: [0, 0.025, -0.025, 0.05, -0.05]
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import yaml

from .design import TrialSpec, ValidatedSpec, validate_spec
from .errors import ConfigError, ValidationError
from .outcomes import (
    BinomialOutcome,
    BinomialPooledPriorOutcome,
    HurdleBetaDaysOutcome,
    NormalOutcome,
)
from .scenarios import scenario_grid, scenario_label

__all__ = ["SpecSet", "parse_config", "parse_config_text"]

_TOP_KEYS = {
    "name",
    "arms",
    "control",
    "outcome",
    "true_params",
    "highest_is_best",
    "start_probs",
    "fixed_probs",
    "min_probs",
    "max_probs",
    "rescale_probs",
    "soften_power",
    "control_prob_fixed",
    "data_looks",
    "randomised_at_looks",
    "superiority",
    "inferiority",
    "equivalence_prob",
    "equivalence_diff",
    "equivalence_only_first",
    "futility_prob",
    "futility_diff",
    "futility_only_first",
    "n_draws",
    "scenarios",
    "scenario_grid",
}

_OUTCOME_KEYS = {
    "binomial": {"model", "prior"},
    "normal": {"model"},
    "hurdle_beta_days": {"model", "variance", "max_days"},
    "binomial_pooled_prior": {"model", "prior_sd"},
}


@dataclass(frozen=True)
class SpecSet:
    """A parsed config: the base design plus labelled scenario variants."""

    name: str
    base: ValidatedSpec
    scenarios: tuple[tuple[str, ValidatedSpec], ...]


def parse_config(path) -> SpecSet:
    with open(path) as fh:
        text = fh.read()
    return parse_config_text(text, source=str(path))


def parse_config_text(text: str, source: str = "<config>") -> SpecSet:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: not valid YAML: {exc}") from None
    lines = _line_index(text)
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    ctx = _Ctx(source, lines)

    unknown = sorted(set(data) - _TOP_KEYS)
    if unknown:
        spots = ", ".join(f"{k!r}{ctx.at((k,))}" for k in unknown)
        raise ConfigError(f"{source}: unknown keys: {spots}")

    name = str(data.get("name", "design"))
    raw_scenarios = data.get("scenarios")
    grid = data.get("scenario_grid")
    if raw_scenarios is not None and grid is not None:
        raise ConfigError(f"{source}: give either 'scenarios' or 'scenario_grid', not both")

    base = _build_spec(data, ctx)
    scenarios: list[tuple[str, ValidatedSpec]] = []
    if raw_scenarios is not None:
        ctx.expect(isinstance(raw_scenarios, list), ("scenarios",), "must be a list")
        for i, block in enumerate(raw_scenarios):
            path = ("scenarios", i)
            ctx.expect(isinstance(block, dict), path, "must be a mapping")
            unknown = sorted(set(block) - {"label", "true_params"})
            if unknown:
                raise ConfigError(
                    f"{source}: scenario blocks may only override true_params; "
                    f"unknown keys {unknown}{ctx.at(path)}"
                )
            ctx.expect("true_params" in block, path, "needs true_params")
            try:
                spec = base.with_outcome_params(
                    _coerce_true_params(block["true_params"], base.outcome_model, ctx, path)
                )
            except ValidationError as exc:
                raise ConfigError(f"{source}: scenario {i}{ctx.at(path)}: {exc}") from None
            label = str(block.get("label", scenario_label(spec)))
            scenarios.append((label, spec))
    elif grid is not None:
        path = ("scenario_grid",)
        ctx.expect(isinstance(grid, dict), path, "must be a mapping")
        unknown = sorted(set(grid) - {"effects"})
        if unknown:
            raise ConfigError(f"{source}: unknown scenario_grid keys {unknown}{ctx.at(path)}")
        effects = grid.get("effects")
        ctx.expect(isinstance(effects, dict) and effects, path + ("effects",), "must map arms to offset lists")
        try:
            scenarios = scenario_grid(base, effects)
        except (ValueError, ValidationError) as exc:
            raise ConfigError(f"{source}: scenario_grid{ctx.at(path)}: {exc}") from None

    return SpecSet(name=name, base=base, scenarios=tuple(scenarios))


class _Ctx:
    def __init__(self, source, lines):
        self.source = source
        self.lines = lines

    def at(self, path) -> str:
        line = self.lines.get(tuple(path))
        return f" (line {line})" if line else ""

    def fail(self, path, msg) -> None:
        raise ConfigError(f"{self.source}: {'.'.join(map(str, path))}{self.at(path)}: {msg}")

    def expect(self, ok, path, msg) -> None:
        if not ok:
            self.fail(path, msg)


def _line_index(text: str) -> dict[tuple, int]:
    """Map config paths (nested key/index tuples) to 1-based line numbers."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return {}
    lines: dict[tuple, int] = {}

    def walk(node, path):
        if node is None:
            return
        lines.setdefault(tuple(path), node.start_mark.line + 1)
        if isinstance(node, yaml.MappingNode):
            for key_node, value_node in node.value:
                walk(value_node, path + [key_node.value])
                lines.setdefault(tuple(path + [key_node.value]), key_node.start_mark.line + 1)
        elif isinstance(node, yaml.SequenceNode):
            for i, item in enumerate(node.value):
                walk(item, path + [i])

    walk(root, [])
    return lines


def _build_spec(data: dict, ctx: _Ctx) -> ValidatedSpec:
    for key in ("arms", "outcome", "true_params", "data_looks"):
        ctx.expect(key in data, (key,), "is required")
    arms = data["arms"]
    ctx.expect(
        isinstance(arms, list) and all(isinstance(a, str) for a in arms),
        ("arms",),
        "must be a list of arm names",
    )
    model = _build_model(data["outcome"], data["true_params"], ctx)

    data_looks = _looks_vector(data["data_looks"], ctx, ("data_looks",))
    randomised = data.get("randomised_at_looks")
    if isinstance(randomised, dict):
        path = ("randomised_at_looks",)
        unknown = sorted(set(randomised) - {"lag"})
        if unknown:
            ctx.fail(path, f"unknown keys {unknown}")
        lag = randomised.get("lag")
        ctx.expect(isinstance(lag, int) and lag >= 0, path + ("lag",), "must be a non-negative integer")
        cap = data_looks[-1]
        randomised = [min(d + lag, cap) for d in data_looks]
    elif randomised is not None:
        ctx.expect(
            isinstance(randomised, list) and all(isinstance(x, int) for x in randomised),
            ("randomised_at_looks",),
            "must be a list of integers or {lag: N}",
        )

    spec = TrialSpec(
        arms=arms,
        outcome_model=model,
        data_looks=data_looks,
        randomised_at_looks=randomised,
        control=data.get("control"),
        highest_is_best=_bool(data, "highest_is_best", False, ctx),
        start_probs=data.get("start_probs", "auto"),
        fixed_probs=data.get("fixed_probs"),
        min_probs=data.get("min_probs"),
        max_probs=data.get("max_probs"),
        rescale_probs=data.get("rescale_probs", "none"),
        soften_power=_threshold(data, "soften_power", 1.0, data_looks, ctx, sentinel=None),
        control_prob_fixed=data.get("control_prob_fixed", "none"),
        superiority=_threshold(data, "superiority", 0.99, data_looks, ctx, sentinel=1.0),
        inferiority=_threshold(data, "inferiority", 0.01, data_looks, ctx, sentinel=0.0),
        equivalence_prob=_threshold(data, "equivalence_prob", None, data_looks, ctx, sentinel=1.0),
        equivalence_diff=data.get("equivalence_diff"),
        equivalence_only_first=_bool(data, "equivalence_only_first", False, ctx),
        futility_prob=_threshold(data, "futility_prob", None, data_looks, ctx, sentinel=1.0),
        futility_diff=data.get("futility_diff"),
        futility_only_first=_bool(data, "futility_only_first", False, ctx),
        n_draws=data.get("n_draws", 10000),
    )
    try:
        return validate_spec(spec)
    except ValidationError as exc:
        raise ConfigError(f"{ctx.source}: {exc}") from None


def _build_model(outcome, true_params, ctx: _Ctx):
    path = ("outcome",)
    ctx.expect(isinstance(outcome, dict), path, "must be a mapping")
    variant = outcome.get("model")
    ctx.expect(
        variant in _OUTCOME_KEYS,
        path + ("model",),
        f"must be one of {sorted(_OUTCOME_KEYS)}",
    )
    unknown = sorted(set(outcome) - _OUTCOME_KEYS[variant])
    if unknown:
        ctx.fail(path, f"unknown keys for {variant}: {unknown}")
    params = _coerce_true_params(true_params, _prototype(variant, outcome, ctx), ctx, ("true_params",))
    return _prototype(variant, outcome, ctx).with_params(params)


def _prototype(variant, outcome, ctx):
    if variant == "binomial":
        prior = outcome.get("prior", [1.0, 1.0])
        ctx.expect(
            isinstance(prior, list) and len(prior) == 2,
            ("outcome", "prior"),
            "must be [alpha, beta]",
        )
        return BinomialOutcome(probs=(), prior=(float(prior[0]), float(prior[1])))
    if variant == "normal":
        return NormalOutcome(params=())
    if variant == "hurdle_beta_days":
        return HurdleBetaDaysOutcome(
            params=(),
            variance=float(outcome.get("variance", 0.05)),
            max_days=int(outcome.get("max_days", 29)),
        )
    return BinomialPooledPriorOutcome(probs=(), prior_sd=float(outcome.get("prior_sd", 0.5)))


def _coerce_true_params(raw, model, ctx, path):
    ctx.expect(isinstance(raw, list) and raw, path, "must be a non-empty list")
    if isinstance(model, (NormalOutcome, HurdleBetaDaysOutcome)):
        ctx.expect(
            all(isinstance(p, list) and len(p) == 2 for p in raw),
            path,
            "must be a list of [a, b] pairs for this outcome model",
        )
        return tuple((float(a), float(b)) for a, b in raw)
    ctx.expect(
        all(isinstance(p, (int, float)) for p in raw),
        path,
        "must be a list of numbers",
    )
    return tuple(float(p) for p in raw)


def _looks_vector(raw, ctx, path):
    if isinstance(raw, dict):
        unknown = sorted(set(raw) - {"from", "to", "by"})
        if unknown:
            ctx.fail(path, f"unknown keys {unknown}")
        for key in ("from", "to", "by"):
            ctx.expect(isinstance(raw.get(key), int), path + (key,), "must be an integer")
        frm, to, by = raw["from"], raw["to"], raw["by"]
        ctx.expect(by > 0 and to >= frm, path, "needs by > 0 and to >= from")
        return list(range(frm, to + 1, by))
    ctx.expect(
        isinstance(raw, list) and all(isinstance(x, int) for x in raw),
        path,
        "must be a list of integers or {from, to, by}",
    )
    return list(raw)


def _bool(data, key, default, ctx):
    value = data.get(key, default)
    ctx.expect(isinstance(value, bool), (key,), "must be true or false")
    return value


def _threshold(data, key, default, data_looks, ctx, sentinel: Optional[float]):
    """Scalar, per-look list, or {value, burn_in_data} burn-in shorthand."""
    raw = data.get(key, default)
    if raw is None or isinstance(raw, (int, float)):
        return raw
    if isinstance(raw, list):
        ctx.expect(
            all(isinstance(x, (int, float)) for x in raw),
            (key,),
            "list entries must be numbers",
        )
        return [float(x) for x in raw]
    if isinstance(raw, dict):
        ctx.expect(sentinel is not None, (key,), "burn-in form not supported here")
        unknown = sorted(set(raw) - {"value", "burn_in_data"})
        if unknown:
            ctx.fail((key,), f"unknown keys {unknown}")
        value = raw.get("value")
        burn = raw.get("burn_in_data", 0)
        ctx.expect(isinstance(value, (int, float)), (key, "value"), "must be a number")
        ctx.expect(isinstance(burn, int), (key, "burn_in_data"), "must be an integer")
        return [sentinel if d < burn else float(value) for d in data_looks]
    ctx.fail((key,), "must be a number, list, or {value, burn_in_data}")
