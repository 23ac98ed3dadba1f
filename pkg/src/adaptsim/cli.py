"""Batch command-line front door.

Subcommands: ``validate`` (config schema check), ``simulate`` (run one
design, summarise, export metrics), ``calibrate`` (threshold calibration
with resume), ``scenarios`` (run every scenario of a config and export the
key-results table), ``metrics`` (re-summarise a stored batch under a chosen
selection strategy) and ``combos`` (remaining-arm combinations of a stored
batch). Every run appends versions, seeds and timings to
``<out>/session.log``. Exit codes: 0 success, 1 error, 2 usage,
3 calibration completed without reaching its tolerance band.
"""

from __future__ import annotations

import argparse
import csv
import os
import re
import sys
import time
from pathlib import Path

from .calibration import GPControls, calibrate
from .config import parse_config
from .errors import AdaptsimError
from .metrics import SelectionStrategy, remaining_arm_combos, summarize_batch
from .reporting import SessionLog, calibration_report, export_metrics_csv
from .rng import BOOTSTRAP_STREAM_BASE, derive_stream
from .runner import Batch, run_batch
from .scenarios import scenario_label
from .store import load_batch_file

__all__ = ["main"]


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "-", text).strip("-") or "design"


def _add_run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="design config (YAML)")
    p.add_argument("--n-rep", type=int, default=1000, help="simulations per batch")
    p.add_argument("--seed", type=int, default=0, help="base random seed")
    p.add_argument("--workers", type=int, default=None, help="worker processes")
    p.add_argument("--out", default="out", help="output directory")


def _add_summary_args(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--select-strategy",
        default="none",
        help="none | best | control_if_available | list:Arm A,Arm B",
    )
    p.add_argument("--boot", type=int, default=0, help="bootstrap resamples (0 = off)")
    p.add_argument("--ci-width", type=float, default=0.95, help="bootstrap interval width")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adaptsim",
        description="Simulate, evaluate and calibrate Bayesian adaptive trial designs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a design config")
    p.add_argument("--config", required=True)

    p = sub.add_parser("simulate", help="simulate one design and export metrics")
    _add_run_args(p)
    _add_summary_args(p)
    p.add_argument("--scenario", default=None, help="run this scenario label instead of the base design")

    p = sub.add_parser("calibrate", help="calibrate the superiority threshold")
    _add_run_args(p)
    p.add_argument("--target", type=float, default=0.05)
    p.add_argument("--tol", type=float, default=0.001)
    p.add_argument("--dir", type=int, default=-1, choices=(-1, 0, 1))
    p.add_argument("--search-lo", type=float, default=0.9)
    p.add_argument("--search-hi", type=float, default=1.0)
    p.add_argument("--iter-max", type=int, default=25)

    p = sub.add_parser("scenarios", help="simulate every scenario and export key results")
    _add_run_args(p)
    _add_summary_args(p)

    p = sub.add_parser("metrics", help="re-summarise a stored batch")
    p.add_argument("--store", required=True, help="batch file (.atb)")
    p.add_argument("--out", default="out")
    _add_summary_args(p)

    p = sub.add_parser("combos", help="remaining-arm combinations of a stored batch")
    p.add_argument("--store", required=True, help="batch file (.atb)")
    p.add_argument("--out", default="out")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except AdaptsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    if args.command == "validate":
        spec_set = parse_config(args.config)
        print(f"OK: {spec_set.name}: base design valid, {len(spec_set.scenarios)} scenario(s)")
        return 0
    if args.command == "simulate":
        return _cmd_simulate(args)
    if args.command == "calibrate":
        return _cmd_calibrate(args)
    if args.command == "scenarios":
        return _cmd_scenarios(args)
    if args.command == "metrics":
        return _cmd_metrics(args)
    if args.command == "combos":
        return _cmd_combos(args)
    raise AssertionError(f"unhandled command {args.command}")


def _summarize(batch: Batch, args):
    strategy = SelectionStrategy.parse(args.select_strategy)
    boot_rng = derive_stream(args.seed, BOOTSTRAP_STREAM_BASE) if args.boot > 0 else None
    return batch.summarize(
        strategy, n_boot=args.boot, ci_width=args.ci_width, boot_rng=boot_rng
    )


def _cmd_simulate(args) -> int:
    out = Path(args.out)
    log = SessionLog(out)
    log.header(f"simulate --config {args.config} --n-rep {args.n_rep} --seed {args.seed}")
    spec_set = parse_config(args.config)
    if args.scenario is None:
        label = scenario_label(spec_set.base)
        spec = spec_set.base
    else:
        match = {lbl: sp for lbl, sp in spec_set.scenarios}.get(args.scenario)
        if match is None:
            raise AdaptsimError(
                f"scenario {args.scenario!r} not found; known: "
                f"{[lbl for lbl, _ in spec_set.scenarios]}"
            )
        label, spec = args.scenario, match
    store = out / f"sims_{_slug(label)}_{spec.fingerprint()[:8]}_{args.seed}.atb"
    t0 = time.perf_counter()
    batch = run_batch(
        spec, args.n_rep, args.seed, workers=args.workers, store_path=store, label=label
    )
    dt = time.perf_counter() - t0
    log.write(
        f"simulate[{label}]: {batch.n_rep} sims ({batch.n_loaded} loaded) in {dt:.1f}s -> {store}"
    )
    summary = _summarize(batch, args)
    csv_path = out / f"metrics_{_slug(label)}.csv"
    export_metrics_csv(summary, csv_path)
    log.write(f"simulate[{label}]: metrics -> {csv_path}")
    print(f"scenario: {label}")
    print(f"simulations: {batch.n_rep} (loaded from store: {batch.n_loaded})")
    for name in ("size_mean", "prob_conclusive", "prob_superior", "prob_equivalence", "prob_max"):
        print(f"{name}: {summary[name].est:.6g}")
    print(f"metrics written to {csv_path}")
    return 0


def _cmd_calibrate(args) -> int:
    out = Path(args.out)
    log = SessionLog(out)
    log.header(
        f"calibrate --config {args.config} --n-rep {args.n_rep} --seed {args.seed} "
        f"--target {args.target} --tol {args.tol} --dir {args.dir}"
    )
    spec = parse_config(args.config).base
    fp = spec.fingerprint()[:8]
    store = out / f"calibration_{fp}_{args.seed}.json"
    batches_dir = out / f"calibration_{fp}_{args.seed}_batches"
    t0 = time.perf_counter()
    result = calibrate(
        spec,
        target=args.target,
        search_range=(args.search_lo, args.search_hi),
        tol=args.tol,
        dir=args.dir,
        iter_max=args.iter_max,
        n_rep=args.n_rep,
        base_seed=args.seed,
        workers=args.workers,
        controls=GPControls(),
        store_path=store,
        batch_store_dir=batches_dir,
        progress=lambda msg: log.write(f"calibrate: {msg}"),
    )
    dt = time.perf_counter() - t0
    log.write(
        f"calibrate: {'success' if result.success else 'unsuccessful'} with "
        f"best_x={result.best_x:.7g} best_y={result.best_y:.6g} after "
        f"{result.n_evaluations} evaluations in {dt:.1f}s"
    )
    print(calibration_report(result))
    return 0 if result.success else 3


def _cmd_scenarios(args) -> int:
    out = Path(args.out)
    log = SessionLog(out)
    log.header(f"scenarios --config {args.config} --n-rep {args.n_rep} --seed {args.seed}")
    spec_set = parse_config(args.config)
    runs = list(spec_set.scenarios)
    if not runs:
        raise AdaptsimError("config defines no scenarios or scenario_grid")
    rows = []
    for i, (label, spec) in enumerate(runs, start=1):
        seed = args.seed + i  # one reproducible seed per scenario
        store = out / f"sims_{_slug(label)}_{spec.fingerprint()[:8]}_{seed}.atb"
        t0 = time.perf_counter()
        batch = run_batch(
            spec, args.n_rep, seed, workers=args.workers, store_path=store, label=label
        )
        dt = time.perf_counter() - t0
        summary = _summarize(batch, args)
        export_metrics_csv(summary, out / f"metrics_{_slug(label)}.csv")
        rows.append((label, spec.truth_values(), summary))
        log.write(f"scenario[{label}]: {batch.n_rep} sims ({batch.n_loaded} loaded) in {dt:.1f}s")
        print(
            f"{label}: size_mean={summary['size_mean'].est:.0f} "
            f"pr_concl={summary['prob_conclusive'].est:.3f} "
            f"pr_sup={summary['prob_superior'].est:.3f} "
            f"pr_equi={summary['prob_equivalence'].est:.3f}"
        )
    key_path = out / "key_results.csv"
    export_metrics_csv(rows, key_path)
    log.write(f"scenarios: key results -> {key_path}")
    print(f"key results written to {key_path}")
    return 0


def _cmd_metrics(args) -> int:
    out = Path(args.out)
    log = SessionLog(out)
    log.header(f"metrics --store {args.store}")
    spec, results, manifest = load_batch_file(args.store)
    strategy = SelectionStrategy.parse(args.select_strategy)
    boot_rng = (
        derive_stream(manifest.base_seed, BOOTSTRAP_STREAM_BASE) if args.boot > 0 else None
    )
    summary = summarize_batch(
        results,
        strategy,
        true_values=spec.truth_values(),
        n_boot=args.boot,
        ci_width=args.ci_width,
        boot_rng=boot_rng,
    )
    name = _slug(manifest.label or Path(args.store).stem)
    csv_path = out / f"metrics_{name}.csv"
    export_metrics_csv(summary, csv_path)
    log.write(f"metrics: {len(results)} sims from {args.store} -> {csv_path}")
    for row_name, value in summary.rows():
        print(f"{row_name}: {value.est:.6g}")
    print(f"metrics written to {csv_path}")
    return 0


def _cmd_combos(args) -> int:
    out = Path(args.out)
    log = SessionLog(out)
    log.header(f"combos --store {args.store}")
    _, results, manifest = load_batch_file(args.store)
    combos = remaining_arm_combos(results)
    name = _slug(manifest.label or Path(args.store).stem)
    csv_path = out / f"combos_{name}.csv"
    os.makedirs(out, exist_ok=True)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["arms", "frequency"])
        for combo, freq in combos.items():
            writer.writerow([" + ".join(combo), repr(freq)])
    log.write(f"combos: {len(combos)} combination(s) -> {csv_path}")
    for combo, freq in combos.items():
        print(f"{' + '.join(combo)}: {freq:.4f}")
    print(f"combinations written to {csv_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
