"""Config parsing, schema diagnostics, and scenario expansion."""

from pathlib import Path

import pytest

import adaptsim as a
from adaptsim import ConfigError, parse_config, parse_config_text
from adaptsim.scenarios import scenario_grid, scenario_label

from util import primary_null_spec

DATA = Path(__file__).parent / "data"


def test_primary_config_matches_programmatic_spec():
    spec_set = parse_config(DATA / "primary_null.yaml")
    assert spec_set.name == "primary-null"
    spec = spec_set.base
    expected = primary_null_spec()
    assert spec == expected
    assert spec.fingerprint() == expected.fingerprint()
    assert spec.n_looks == 39
    assert spec.randomised_at_looks[0] == 700
    assert spec.randomised_at_looks[-1] == 10000
    assert spec.equivalence_prob[:5] == (1.0, 1.0, 1.0, 1.0, 0.9)


def test_primary_config_grid_has_15_scenarios():
    spec_set = parse_config(DATA / "primary_null.yaml")
    assert len(spec_set.scenarios) == 15
    labels = [label for label, _ in spec_set.scenarios]
    assert labels[0] == "A 25.0 - B 25.0 - C 25.0"
    assert "A 25.0 - B 27.5 - C 25.0" in labels
    assert "A 25.0 - B 20.0 - C 20.0" in labels
    # no two scenarios are permutations of each other over the varied arms
    seen = set()
    for _, spec in spec_set.scenarios:
        key = tuple(sorted(spec.truth_values()[1:]))
        assert key not in seen
        seen.add(key)


def test_single_arm_config_rejected():
    text = """
arms: [Only]
outcome: {model: binomial}
true_params: [0.2]
data_looks: [100]
"""
    with pytest.raises(ConfigError, match="too-few-arms"):
        parse_config_text(text)


def test_unknown_top_level_key_reports_line():
    text = "\n".join(
        [
            "arms: [A, B]",
            "outcome: {model: binomial}",
            "true_params: [0.2, 0.2]",
            "data_looks: [100, 200]",
            "n_draw: 100",  # typo on line 5
        ]
    )
    with pytest.raises(ConfigError, match=r"n_draw.*line 5"):
        parse_config_text(text)


def test_unknown_outcome_key_rejected():
    text = """
arms: [A, B]
outcome: {model: binomial, prior_sd: 0.5}
true_params: [0.2, 0.2]
data_looks: [100, 200]
"""
    with pytest.raises(ConfigError, match="unknown keys for binomial"):
        parse_config_text(text)


def test_scenario_block_overrides_truths_only():
    text = """
arms: [A, B]
outcome: {model: binomial}
true_params: [0.25, 0.25]
data_looks: [100, 200]
scenarios:
  - true_params: [0.25, 0.20]
  - label: big
    true_params: [0.25, 0.15]
"""
    spec_set = parse_config_text(text)
    assert len(spec_set.scenarios) == 2
    label, spec = spec_set.scenarios[0]
    assert spec.truth_values() == (0.25, 0.20)
    assert label == "A 25.0 - B 20.0"
    assert spec_set.scenarios[1][0] == "big"
    # identical design apart from the truths
    assert spec.superiority == spec_set.base.superiority
    assert spec.data_looks == spec_set.base.data_looks


def test_scenario_block_rejects_other_overrides():
    text = """
arms: [A, B]
outcome: {model: binomial}
true_params: [0.25, 0.25]
data_looks: [100, 200]
scenarios:
  - true_params: [0.25, 0.20]
    superiority: 0.95
"""
    with pytest.raises(ConfigError, match="only override true_params"):
        parse_config_text(text)


def test_scenarios_and_grid_are_mutually_exclusive():
    text = """
arms: [A, B]
outcome: {model: binomial}
true_params: [0.25, 0.25]
data_looks: [100, 200]
scenarios:
  - true_params: [0.25, 0.20]
scenario_grid:
  effects: {B: [0, 0.05]}
"""
    with pytest.raises(ConfigError, match="not both"):
        parse_config_text(text)


def test_invalid_design_surfaces_validation_codes():
    text = """
arms: [A, B]
outcome: {model: binomial}
true_params: [0.25, 0.25]
data_looks: [100, 200]
superiority: 0.4
inferiority: 0.6
"""
    with pytest.raises(ConfigError, match="thresholds-overlap"):
        parse_config_text(text)


def test_other_outcome_models_parse():
    text = """
arms: [A, B]
outcome: {model: hurdle_beta_days, variance: 0.05, max_days: 29}
true_params: [[0.35, 0.743], [0.35, 0.743]]
data_looks: [100, 200]
highest_is_best: true
"""
    spec = parse_config_text(text).base
    assert spec.outcome_model.variant == "hurdle_beta_days"
    assert spec.outcome_model.max_days == 29
    text = """
arms: [A, B]
outcome: {model: binomial_pooled_prior, prior_sd: 0.5}
true_params: [0.25, 0.25]
data_looks: [100, 200]
"""
    spec = parse_config_text(text).base
    assert spec.outcome_model.prior_sd == 0.5


def test_not_yaml_and_not_mapping():
    with pytest.raises(ConfigError, match="not valid YAML"):
        parse_config_text("arms: [A, B\n  bad")
    with pytest.raises(ConfigError, match="must be a mapping"):
        parse_config_text("- just\n- a\n- list\n")


# ---------------------------------------------------------------------------
# grid expansion semantics


def test_grid_counts_for_single_and_double_free_arms():
    spec = primary_null_spec()
    effects = [0.0, 0.025, -0.025, 0.05, -0.05]
    single = scenario_grid(spec, {"Arm B": effects})
    assert len(single) == 5
    double = scenario_grid(spec, {"Arm B": effects, "Arm C": effects})
    assert len(double) == 15


def test_grid_order_matches_first_arm_fastest():
    spec = primary_null_spec()
    effects = [0.0, 0.025, -0.025, 0.05, -0.05]
    labels = [label for label, _ in scenario_grid(spec, {"Arm B": effects, "Arm C": effects})]
    assert labels[:6] == [
        "A 25.0 - B 25.0 - C 25.0",
        "A 25.0 - B 27.5 - C 25.0",
        "A 25.0 - B 22.5 - C 25.0",
        "A 25.0 - B 30.0 - C 25.0",
        "A 25.0 - B 20.0 - C 25.0",
        "A 25.0 - B 27.5 - C 27.5",
    ]
    assert labels[-1] == "A 25.0 - B 20.0 - C 20.0"


def test_grid_with_control_keeps_permutations():
    spec = a.validate_spec(
        a.TrialSpec(
            arms=("Control", "Arm B", "Arm C"),
            control="Control",
            outcome_model=a.BinomialOutcome(probs=(0.25, 0.25, 0.25)),
            data_looks=[100, 200],
        )
    )
    effects = [0.0, 0.025, -0.025]
    grid = scenario_grid(spec, {"Arm B": effects, "Arm C": effects})
    assert len(grid) == 9  # arms are distinguishable: no dedup


def test_grid_rejects_unknown_arm():
    with pytest.raises(ValueError, match="unknown arms"):
        scenario_grid(primary_null_spec(), {"Arm Z": [0.0]})


def test_scenario_label_formats():
    assert scenario_label(primary_null_spec()) == "A 25.0 - B 25.0 - C 25.0"
    norm = a.validate_spec(
        a.TrialSpec(
            arms=("Arm A", "Arm B"),
            outcome_model=a.NormalOutcome(params=((14.2, 5.0), (14.2, 5.0))),
            data_looks=[100, 200],
            highest_is_best=True,
        )
    )
    assert scenario_label(norm) == "A 14.2 - B 14.2"
