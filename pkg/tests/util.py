"""Shared spec builders for the test suite."""

import adaptsim as a

PRIMARY_DATA_LOOKS = list(range(500, 10001, 250))


def primary_null_spec(superiority=0.99, inferiority=0.01, true_probs=(0.25, 0.25, 0.25)):
    """The 3-arm, no-control design with restricted RAR used throughout:
    39 looks from 500 to 10000 by 250, a 200-participant outcome lag,
    equivalence (diff 0.025, prob 0.9) active once 1500 are analysed."""
    return a.validate_spec(
        a.TrialSpec(
            arms=("Arm A", "Arm B", "Arm C"),
            outcome_model=a.BinomialOutcome(probs=tuple(true_probs)),
            data_looks=PRIMARY_DATA_LOOKS,
            randomised_at_looks=[min(d + 200, 10000) for d in PRIMARY_DATA_LOOKS],
            start_probs=(1 / 3, 1 / 3, 1 / 3),
            min_probs=(0.25, 0.25, 0.25),
            rescale_probs="limits",
            soften_power=0.5,
            superiority=superiority,
            inferiority=inferiority,
            equivalence_prob=[1.0 if d < 1500 else 0.9 for d in PRIMARY_DATA_LOOKS],
            equivalence_diff=0.025,
            n_draws=10000,
        )
    )


def common_control_spec(true_probs=(0.25, 0.25, 0.25, 0.25), data_looks=None, lag=200, n_draws=10000):
    """Four arms with a sqrt-based fixed control allocation, equivalence and
    futility versus the first control only."""
    if data_looks is None:
        data_looks = PRIMARY_DATA_LOOKS
    return a.validate_spec(
        a.TrialSpec(
            arms=("Standard", "Intervention A", "Intervention B", "Intervention C"),
            control="Standard",
            outcome_model=a.BinomialOutcome(probs=tuple(true_probs)),
            data_looks=data_looks,
            randomised_at_looks=[min(d + lag, data_looks[-1]) for d in data_looks],
            min_probs=(None, 0.15, 0.15, 0.15),
            control_prob_fixed="sqrt-based",
            rescale_probs="limits",
            soften_power=0.5,
            superiority=0.99,
            inferiority=0.01,
            equivalence_prob=0.9,
            equivalence_diff=0.025,
            equivalence_only_first=True,
            futility_prob=0.9,
            futility_diff=0.025,
            futility_only_first=True,
            n_draws=n_draws,
        )
    )


def tiny_spec(
    arms=("A", "B"),
    true_probs=(0.25, 0.25),
    n_looks=4,
    step=60,
    lag=20,
    n_draws=1000,
    **overrides,
):
    """A fast-to-simulate binomial design for unit tests."""
    data_looks = [step * (i + 1) for i in range(n_looks)]
    kwargs = dict(
        arms=arms,
        outcome_model=a.BinomialOutcome(probs=tuple(true_probs)),
        data_looks=data_looks,
        randomised_at_looks=[min(d + lag, data_looks[-1]) for d in data_looks],
        soften_power=0.5,
        superiority=0.99,
        inferiority=0.01,
        n_draws=n_draws,
    )
    kwargs.update(overrides)
    return a.validate_spec(a.TrialSpec(**kwargs))
