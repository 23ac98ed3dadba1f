"""CSV exports, calibration reports, and the session log."""

from __future__ import annotations

import csv
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np

from ._version import __version__
from .calibration import CalibrationResult
from .metrics import PerformanceSummary

__all__ = ["SessionLog", "calibration_report", "export_metrics_csv"]


def _fmt(value) -> str:
    """Full-precision numeric text; NA for absent values, blank for None."""
    if value is None:
        return ""
    value = float(value)
    if math.isnan(value):
        return "NA"
    return repr(value)


def export_metrics_csv(summary, path) -> None:
    """Write metrics to CSV.

    A single summary produces one row per metric with columns
    ``metric, est, err_sd, err_mad, lo, hi`` (uncertainty columns blank when
    not computed). A list of ``(label, truths, summary)`` triples produces
    the multi-scenario key-results table: per-arm truths plus mean size and
    the conclusiveness/superiority/equivalence probabilities per scenario.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(summary, PerformanceSummary):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "est", "err_sd", "err_mad", "lo", "hi"])
            for name, value in summary.rows():
                writer.writerow(
                    [
                        name,
                        _fmt(value.est),
                        _fmt(value.err_sd),
                        _fmt(value.err_mad),
                        _fmt(value.lo),
                        _fmt(value.hi),
                    ]
                )
        return

    rows = list(summary)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if not rows:
            writer.writerow(["scenario", "size_mean", "pr_concl", "pr_sup", "pr_equi"])
            return
        arms = rows[0][2].arms
        writer.writerow(
            ["scenario", *arms, "size_mean", "pr_concl", "pr_sup", "pr_equi"]
        )
        for label, truths, summ in rows:
            writer.writerow(
                [
                    label,
                    *[_fmt(t) for t in truths],
                    _fmt(summ["size_mean"].est),
                    _fmt(summ["prob_conclusive"].est),
                    _fmt(summ["prob_superior"].est),
                    _fmt(summ["prob_equivalence"].est),
                ]
            )


def calibration_report(result: CalibrationResult) -> str:
    """Human-readable calibration summary block."""
    s = result.settings
    controls = s["controls"]
    direction = {
        -1: "at or below target",
        0: "either side of target",
        1: "at or above target",
    }[s["dir"]]
    if s["dir"] < 0:
        band = (s["target"] - s["tol"], s["target"])
    elif s["dir"] > 0:
        band = (s["target"], s["target"] + s["tol"])
    else:
        band = (s["target"] - s["tol"], s["target"] + s["tol"])
    lines = [
        "Trial calibration:",
        f"* Result: calibration {'successful' if result.success else 'unsuccessful'}",
        f"* Best x: {result.best_x:.7g}",
        f"* Best y: {result.best_y:.6g}",
        "",
        "Central settings:",
        f"* Target: {s['target']:g}",
        f"* Tolerance: {s['tol']:g} ({direction}, range: {band[0]:g} to {band[1]:g})",
        f"* Search range: {s['search_range'][0]:g} to {s['search_range'][1]:g}",
        "* Gaussian process controls:",
        f"* - resolution: {controls['resolution']}",
        f"* - kappa: {controls['kappa']:g}",
        f"* - pow: {controls['pow']:g}",
        f"* - lengthscale: {controls['lengthscale']:g} (constant)",
        f"* - x scaled: {'yes' if controls['x_scaled'] else 'no'}",
        f"* Noisy: {'yes' if controls['noisy'] else 'no'}",
        f"* Narrowing: {'yes' if controls['narrowing'] else 'no'}",
        "",
        "Calibration/simulation details:",
        f"* Total evaluations: {result.n_evaluations} (previous + grid + iterations)",
        f"* Repetitions: {s['n_rep']}",
        f"* Base random seed: {s['base_seed']}",
    ]
    return "\n".join(lines)


class SessionLog:
    """Append-only run log: versions, seeds, timings, outputs."""

    def __init__(self, out_dir):
        self.path = Path(out_dir) / "session.log"
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def write(self, message: str) -> None:
        stamp = time.strftime("%Y-%m-%d %H:%M:%S")
        with open(self.path, "a") as fh:
            fh.write(f"[{stamp}] {message}\n")

    def header(self, command: str) -> None:
        self.write(
            f"{command} | adaptsim {__version__} | python {sys.version.split()[0]} | "
            f"numpy {np.__version__} | {platform.platform()}"
        )
