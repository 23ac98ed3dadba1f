"""Acceptance criteria, one test per criterion, at stated tolerances.

These are the long-running end-to-end checks (a few hours on one core the
first time). Heavy simulation batches persist under ``.acceptance_cache/``
via the package's own batch store, so repeated runs reload instead of
recomputing. Run with ``pytest tests/test_acceptance.py -s`` to see one
PASS/FAIL line per criterion as it completes.
"""

import itertools
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

import adaptsim as a

from util import primary_null_spec, tiny_spec

pytestmark = pytest.mark.acceptance

CACHE = Path(__file__).parent.parent / ".acceptance_cache"
SEED = 4131
N_REP = 10_000


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} - {detail}")


def _check(name: str, checks: list[tuple[str, bool]]) -> None:
    for label, ok in checks:
        print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} - {label}")
    assert all(ok for _, ok in checks), [label for label, ok in checks if not ok]


@pytest.fixture(scope="session")
def uncalibrated_batch():
    CACHE.mkdir(exist_ok=True)
    spec = primary_null_spec(superiority=0.99, inferiority=0.01)
    return a.run_batch(spec, N_REP, SEED, workers=1, store_path=CACHE / "null_099.atb")


@pytest.fixture(scope="session")
def calibrated_batch():
    CACHE.mkdir(exist_ok=True)
    spec = primary_null_spec(superiority=0.9904, inferiority=0.0096)
    return a.run_batch(spec, N_REP, SEED, workers=1, store_path=CACHE / "null_09904.atb")


def test_criterion_1_deterministic_formulas():
    checks = []
    for k, expected in ((3, 0.366), (2, 0.414), (1, 0.5)):
        got = round(a.sqrt_control_prob(k), 3)
        checks.append((f"sqrt_control_prob({k})={got} vs {expected}", got == expected))
    alpha, beta = a.beta_params_from_mean_var(0.743, 0.05)
    checks.append(
        (f"beta params ({alpha:.6f}, {beta:.7f})",
         abs(alpha - 2.094532) < 1e-6 and abs(beta - 0.7244881) < 1e-6)
    )
    eff = a.pooled_prior_effective_n(0.5, 0.25)
    checks.append((f"pooled effective n {eff:.4f} vs 85.33", abs(eff - 85.33) < 0.01))
    idp1 = a.idp([0.026, 0.946, 0.028], [0.25, 0.225, 0.25], highest_is_best=False)
    idp2 = a.idp([0.503, 0.006, 0.491], [0.25, 0.275, 0.25], highest_is_best=False)
    checks.append((f"idp case B22.5 {idp1:.4f} vs 94.6", abs(idp1 - 94.6) < 1e-9))
    checks.append((f"idp case B27.5 {idp2:.4f} vs 99.4", abs(idp2 - 99.4) < 1e-9))
    _check("criterion-1", checks)


def test_criterion_2_uncalibrated_null(uncalibrated_batch):
    s = uncalibrated_batch.summarize("best")
    p_sup = s["prob_superior"].est
    size = s["size_mean"].est
    checks = [
        (f"prob_superior {p_sup:.4f} in [0.045, 0.061]", 0.045 <= p_sup <= 0.061),
        (f"size_mean {size:.1f} in 7881 +/- 250", abs(size - 7881) <= 250),
    ]
    _check("criterion-2", checks)


def test_criterion_3_calibrated_null(calibrated_batch):
    s = calibrated_batch.summarize("best")
    checks = [
        (
            f"prob_superior {s['prob_superior'].est:.4f} in [0.041, 0.056]",
            0.041 <= s["prob_superior"].est <= 0.056,
        ),
        (
            f"prob_equivalence {s['prob_equivalence'].est:.4f} in [0.60, 0.635]",
            0.60 <= s["prob_equivalence"].est <= 0.635,
        ),
        (
            f"size_mean {s['size_mean'].est:.1f} in 7932 +/- 250",
            abs(s["size_mean"].est - 7932) <= 250,
        ),
        (
            f"rmse {s['rmse'].est:.5f} in 0.0103 +/- 0.0015",
            abs(s["rmse"].est - 0.0103) <= 0.0015,
        ),
        (
            f"mae {s['mae'].est:.5f} in 0.0057 +/- 0.0010",
            abs(s["mae"].est - 0.0057) <= 0.0010,
        ),
    ]
    _check("criterion-3", checks)


def test_criterion_4_calibration_end_to_end():
    CACHE.mkdir(exist_ok=True)
    spec = primary_null_spec()
    result = a.calibrate(
        spec,
        target=0.05,
        search_range=(0.9, 1.0),
        tol=0.001,
        dir=-1,
        iter_max=25,
        n_rep=N_REP,
        base_seed=SEED,
        store_path=CACHE / "calibration.json",
        batch_store_dir=CACHE / "calibration_batches",
    )
    checks = [
        (f"success={result.success}", result.success),
        (f"best_x {result.best_x:.6f} in [0.985, 0.995]", 0.985 <= result.best_x <= 0.995),
        (
            f"best_y {result.best_y:.4f} in [0.049, 0.050]",
            0.049 <= result.best_y <= 0.050,
        ),
        (
            f"evaluations {result.n_evaluations} <= 25",
            result.n_evaluations <= 25,
        ),
    ]
    _check("criterion-4", checks)


def test_criterion_5_scenario_grid_spot_checks():
    CACHE.mkdir(exist_ok=True)
    base = primary_null_spec(superiority=0.9904, inferiority=0.0096)
    effects = [0.0, 0.025, -0.025, 0.05, -0.05]
    grid = a.scenario_grid(base, {"Arm B": effects, "Arm C": effects})
    checks = [(f"grid expands to {len(grid)} scenarios (want 15)", len(grid) == 15)]

    wanted = {
        "A 25.0 - B 20.0 - C 25.0": dict(sup_min=0.985, size=(2871, 200)),
        "A 25.0 - B 22.5 - C 27.5": dict(sup=(0.743, 0.05), concl=(0.952, 0.03)),
        "A 25.0 - B 20.0 - C 20.0": dict(eq=(0.851, 0.04), sup=(0.138, 0.04)),
    }
    labels = [label for label, _ in grid]
    for label, bands in wanted.items():
        row = labels.index(label) + 1  # scenario seeds follow 1-based grid order
        spec = dict(grid)[label]
        batch = a.run_batch(
            spec, 1000, SEED + row, workers=1,
            store_path=CACHE / f"scenario_{row}.atb", label=label,
        )
        s = batch.summarize("best")
        sup = s["prob_superior"].est
        if "sup_min" in bands:
            checks.append(
                (f"{label}: prob_superior {sup:.3f} >= {bands['sup_min']}", sup >= bands["sup_min"])
            )
        if "sup" in bands:
            mid, tol = bands["sup"]
            checks.append(
                (f"{label}: prob_superior {sup:.3f} in {mid} +/- {tol}", abs(sup - mid) <= tol)
            )
        if "concl" in bands:
            mid, tol = bands["concl"]
            concl = s["prob_conclusive"].est
            checks.append(
                (f"{label}: prob_conclusive {concl:.3f} in {mid} +/- {tol}", abs(concl - mid) <= tol)
            )
        if "eq" in bands:
            mid, tol = bands["eq"]
            eq = s["prob_equivalence"].est
            checks.append(
                (f"{label}: prob_equivalence {eq:.3f} in {mid} +/- {tol}", abs(eq - mid) <= tol)
            )
        if "size" in bands:
            mid, tol = bands["size"]
            size = s["size_mean"].est
            checks.append(
                (f"{label}: size_mean {size:.0f} in {mid} +/- {tol}", abs(size - mid) <= tol)
            )
    _check("criterion-5", checks)


def test_criterion_6_null_selection_symmetry(calibrated_batch):
    s = calibrated_batch.summarize("best")
    checks = []
    for arm in calibrated_batch.spec.arms:
        p = s[f"prob_select_arm_{arm}"].est
        checks.append((f"select {arm} {p:.4f} in 0.333 +/- 0.02", abs(p - 1 / 3) <= 0.02))
    _check("criterion-6", checks)


def test_criterion_7a_allocation_invariants_fuzzed():
    rng = np.random.default_rng(424242)
    failures = 0
    for trial in range(1000):
        k = int(rng.integers(2, 6))
        n_looks = int(rng.integers(2, 6))
        step = int(rng.integers(25, 70))
        use_min = rng.random() < 0.5
        use_max = rng.random() < 0.3
        use_control = rng.random() < 0.4
        control = f"arm{int(rng.integers(k))}" if use_control else None
        control_rule = "none"
        if use_control and rng.random() < 0.5:
            control_rule = "sqrt-based" if rng.random() < 0.5 else "match"
        rescale = "limits" if rng.random() < 0.5 else "none"
        min_probs = None
        if use_min:
            # stay feasible for every reachable active set: a sqrt-pinned
            # control leaves only 1 - s mass for the non-control floors
            ceiling = 0.9 / k
            if control_rule == "sqrt-based":
                ceiling = min(ceiling, 0.9 * (1 - a.sqrt_control_prob(k - 1)) / (k - 1))
            floor = float(rng.uniform(0.02, ceiling))
            min_probs = tuple(
                None if (control_rule != "none" and f"arm{i}" == control) else floor
                for i in range(k)
            )
        max_probs = None
        if use_max and not use_min and control_rule == "none":
            # without rescaling, two surviving arms must still cover the simplex
            cap_lo = 1.2 / k if rescale == "limits" else 0.55
            cap = float(rng.uniform(cap_lo, 1.0))
            max_probs = tuple(
                None if (control_rule != "none" and f"arm{i}" == control) else cap
                for i in range(k)
            )
        use_equivalence = rng.random() < 0.5
        spec = tiny_spec(
            arms=tuple(f"arm{i}" for i in range(k)),
            true_probs=tuple(rng.uniform(0.05, 0.7, k)),
            n_looks=n_looks,
            step=step,
            lag=int(rng.integers(0, step)),
            n_draws=300,
            soften_power=float(rng.uniform(0, 1)),
            min_probs=min_probs,
            max_probs=max_probs,
            rescale_probs=rescale,
            control=control,
            control_prob_fixed=control_rule,
            superiority=float(rng.uniform(0.9, 1.0)),
            inferiority=float(rng.uniform(0.0, 0.1)),
            equivalence_prob=0.9 if use_equivalence else None,
            equivalence_diff=0.05 if use_equivalence else None,
            highest_is_best=bool(rng.random() < 0.5),
        )
        try:
            a.run_trial(spec, a.derive_stream(99, trial), check_invariants=True)
        except a.EngineError:
            failures += 1
    ok = failures == 0
    _report("criterion-7a", ok, f"{1000 - failures}/1000 fuzzed specs hold allocation invariants")
    assert ok


def test_criterion_7b_posterior_sampler_distributions():
    rng = a.derive_stream(SEED, a.ORACLE_STREAM_BASE)
    draws = a.posterior_beta_binomial([25], [100], n_draws=100_000, rng=rng)
    ks_beta = stats.kstest(draws.values[:, 0], stats.beta(26, 76).cdf).statistic
    norm = a.posterior_normal_approx([list(np.arange(50.0))], n_draws=100_000, rng=rng)
    col = norm.values[:, 0]
    mean = np.arange(50.0).mean()
    sd = np.arange(50.0).std() / math.sqrt(49)
    ks_norm = stats.kstest(col, stats.norm(mean, sd).cdf).statistic
    checks = [
        (f"beta-binomial KS {ks_beta:.4f} < 0.01", ks_beta < 0.01),
        (f"normal-approx KS {ks_norm:.4f} < 0.01", ks_norm < 0.01),
    ]
    _check("criterion-7b", checks)


def test_criterion_7c_decision_ops_match_brute_force():
    rng = a.derive_stream(SEED, a.ORACLE_STREAM_BASE + 1)
    ok = True
    for _ in range(20):
        n_rows = int(rng.integers(5, 101))
        k = int(rng.integers(2, 5))
        values = rng.random((n_rows, k)) * 0.2 + 0.1
        draws = a.PosteriorDraws(tuple(f"arm{i}" for i in range(k)), values)
        for highest in (False, True):
            pb = a.prob_best(draws, highest)
            expected = np.zeros(k)
            for row in values:
                expected[np.argmax(row) if highest else np.argmin(row)] += 1
            ok &= np.array_equal(pb, expected / n_rows)
        eq = a.prob_all_equivalent(draws, 0.025)
        brute = np.mean(
            [
                all(
                    abs(row[i] - row[j]) < 0.025
                    for i, j in itertools.combinations(range(k), 2)
                )
                for row in values
            ]
        )
        ok &= eq == brute
        probs = a.pairwise_vs_control(
            draws, "arm0", equivalence_diff=0.03, futility_diff=0.02
        )
        for pos in range(1, k):
            d = values[:, pos] - values[:, 0]
            got = probs[f"arm{pos}"]
            ok &= got.p_superior == np.mean(d < 0)
            ok &= got.p_equivalent == np.mean(np.abs(d) < 0.03)
            ok &= got.p_futile == np.mean(-d < 0.02)
    _report("criterion-7c", ok, "prob_best/pairwise/equivalence equal brute-force tallies")
    assert ok


def test_criterion_7d_bootstrap_matches_analytic_se():
    rng = np.random.default_rng(2718)
    data = list(rng.normal(10.0, 3.0, 500))
    est = a.bootstrap_ci(
        data,
        lambda xs: float(np.mean(xs)),
        n_boot=3000,
        rng=a.derive_stream(SEED, a.BOOTSTRAP_STREAM_BASE + 1),
    )
    analytic = np.std(data, ddof=1) / math.sqrt(len(data))
    rel = abs(est.err_sd - analytic) / analytic
    ok = rel < 0.10
    _report(
        "criterion-7d",
        ok,
        f"bootstrap SE {est.err_sd:.5f} vs analytic {analytic:.5f} (rel err {rel:.3f} < 0.10)",
    )
    assert ok


def test_criterion_7e_bit_determinism_of_simulate(tmp_path):
    config = tmp_path / "design.yaml"
    config.write_text(
        """
name: determinism
arms: [A, B, C]
outcome: {model: binomial}
true_params: [0.25, 0.25, 0.25]
data_looks: [100, 200, 300]
randomised_at_looks: {lag: 30}
min_probs: [0.2, 0.2, 0.2]
rescale_probs: limits
soften_power: 0.5
equivalence_prob: 0.9
equivalence_diff: 0.05
n_draws: 1000
"""
    )
    blobs = []
    for name in ("run1", "run2"):
        out = tmp_path / name
        res = subprocess.run(
            [
                sys.executable, "-m", "adaptsim.cli", "simulate",
                "--config", str(config), "--n-rep", "200", "--seed", str(SEED),
                "--workers", "1", "--out", str(out),
            ],
            capture_output=True,
            text=True,
        )
        assert res.returncode == 0, res.stderr
        blobs.append(next(out.glob("sims_*.atb")).read_bytes())
    ok = blobs[0] == blobs[1]
    _report("criterion-7e", ok, f"identical batch files across fresh runs ({len(blobs[0])} bytes)")
    assert ok


def test_criterion_8_calibration_on_synthetic_oracle():
    result = a.calibrate(
        None,
        target=0.05,
        search_range=(0.9, 1.0),
        tol=0.001,
        dir=0,
        iter_max=25,
        evaluate=lambda x: 1.0 - x,
    )
    ok = (
        result.success
        and abs(result.best_x - 0.95) <= 0.001
        and result.n_evaluations <= 10
    )
    _report(
        "criterion-8",
        ok,
        f"converged to x={result.best_x:.5f} (target 0.95 +/- 0.001) in "
        f"{result.n_evaluations} evaluations (<= 10)",
    )
    assert ok
