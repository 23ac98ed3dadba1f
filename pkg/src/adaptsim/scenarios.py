"""Scenario-grid expansion over per-arm effect offsets.

A grid applies additive offsets to the truth parameters of selected arms
and expands the cross product, cycling the first varied arm fastest. For
designs without a common control the free arms are exchangeable, so
scenarios whose free-arm truths are permutations of one another are
collapsed to the first occurrence; with a control every arm is
distinguishable and nothing is removed.
"""

from __future__ import annotations

from itertools import product
from typing import Mapping, Sequence

from .design import ValidatedSpec
from .outcomes import BinomialOutcome, BinomialPooledPriorOutcome, NormalOutcome

__all__ = ["scenario_grid", "scenario_label"]


def _display_name(arm: str) -> str:
    return arm[4:] if arm.startswith("Arm ") else arm


def scenario_label(spec: ValidatedSpec) -> str:
    """Label of the form "A 25.0 - B 27.5 - C 25.0" from the truths."""
    parts = []
    for arm, value in zip(spec.arms, spec.truth_values()):
        shown = value * 100.0 if spec.outcome_model.percent_scale else value
        parts.append(f"{_display_name(arm)} {shown:.1f}")
    return " - ".join(parts)


def _shift_param(model, param, offset: float):
    if isinstance(model, (BinomialOutcome, BinomialPooledPriorOutcome)):
        return param + offset
    if isinstance(model, NormalOutcome):
        mean, sd = param
        return (mean + offset, sd)
    raise ValueError(
        f"effect offsets are not defined for outcome model {model.variant!r}"
    )


def _raw_params(model):
    if isinstance(model, (BinomialOutcome, BinomialPooledPriorOutcome)):
        return model.probs
    if isinstance(model, NormalOutcome):
        return model.params
    raise ValueError(
        f"effect offsets are not defined for outcome model {model.variant!r}"
    )


def scenario_grid(
    spec: ValidatedSpec, effects: Mapping[str, Sequence[float]]
) -> list[tuple[str, ValidatedSpec]]:
    """Expand labelled scenario specs from per-arm effect offsets.

    ``effects`` maps arm names to the offsets applied to that arm's truth
    parameter; arms not named keep their base truth in every scenario.
    """
    model = spec.outcome_model
    base = list(_raw_params(model))
    free = [arm for arm in spec.arms if arm in effects]
    unknown = set(effects) - set(spec.arms)
    if unknown:
        raise ValueError(f"effects name unknown arms: {sorted(unknown)}")
    if not free:
        return [(scenario_label(spec), spec)]
    offset_lists = [list(effects[arm]) for arm in free]
    free_idx = [spec.arms.index(arm) for arm in free]

    out: list[tuple[str, ValidatedSpec]] = []
    seen: set[tuple] = set()
    # product cycles its last factor fastest; reverse so the first varied
    # arm cycles fastest, matching the usual grid ordering
    for combo in product(*reversed(offset_lists)):
        offsets = tuple(reversed(combo))
        params = list(base)
        for i, off in zip(free_idx, offsets):
            params[i] = _shift_param(model, base[i], off)
        scenario = spec.with_outcome_params(params)
        if spec.control is None:
            truths = scenario.truth_values()
            key = tuple(sorted(round(truths[i], 12) for i in free_idx))
            if key in seen:
                continue
            seen.add(key)
        out.append((scenario_label(scenario), scenario))
    return out
