"""Persistence of simulation batches with manifest-guarded reloads.

Batches are stored in a self-describing binary container: a magic tag, a
JSON header (format version, run manifest, full spec payload, array index)
and the raw little-endian array bytes. The bytes written for a given
(spec, n_rep, base_seed) are fully deterministic; wall-clock timestamps are
deliberately kept out of the container (they live in the session log) so
repeated identical runs produce identical files.

A stored batch loads only when its fingerprint and base seed match the
request and the format version is supported; any mismatch is an error,
never a silent recompute.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._version import __version__
from .design import ValidatedSpec
from .engine import TrialResult
from .errors import StoreError
from .specio import spec_from_dict, spec_to_dict

__all__ = ["RunManifest", "load_batch_file", "save_batch_file"]

_MAGIC = b"ADSIMB01"
_FORMAT_VERSION = 1

_STOPS = ("superiority", "equivalence", "futility", "max")
_ARM_STATUSES = ("active", "superior", "inferior", "equivalence", "futility")


@dataclass
class RunManifest:
    """Identity of a stored batch.

    ``timestamp`` records creation time in memory and in the session log
    only; it is not part of the stored bytes.
    """

    fingerprint: str
    n_rep: int
    base_seed: int
    engine_version: str = __version__
    label: str = ""
    timestamp: str = ""


def save_batch_file(
    path, spec: ValidatedSpec, results: list[TrialResult], manifest: RunManifest
) -> None:
    n = len(results)
    k = spec.n_arms
    status = np.array([_STOPS.index(r.final_status) for r in results], dtype="<i1")
    superior = np.array(
        [-1 if r.superior_arm is None else spec.arms.index(r.superior_arm) for r in results],
        dtype="<i4",
    )
    final_look = np.array([r.final_look for r in results], dtype="<i4")
    n_total = np.array([r.n_randomised_total for r in results], dtype="<i8")
    ns = np.array([r.ns for r in results], dtype="<i8").reshape(n, k)
    sum_ys = np.array([r.sum_ys for r in results], dtype="<f8").reshape(n, k)
    raw = np.array([r.raw_estimates for r in results], dtype="<f8").reshape(n, k)
    post = np.array([r.posterior_estimates for r in results], dtype="<f8").reshape(n, k)
    mad = np.array([r.posterior_mad_sds for r in results], dtype="<f8").reshape(n, k)
    pb = np.array([r.final_prob_best for r in results], dtype="<f8").reshape(n, k)
    avail = np.array([r.available_at_end for r in results], dtype="<u1").reshape(n, k)
    in_final = np.array([r.in_final_analysis for r in results], dtype="<u1").reshape(n, k)
    arm_status = np.array(
        [[_ARM_STATUSES.index(s) for s in r.statuses] for r in results], dtype="<i1"
    ).reshape(n, k)
    status_look = np.array([r.status_looks for r in results], dtype="<i4").reshape(n, k)

    arrays = {
        "status": status,
        "superior": superior,
        "final_look": final_look,
        "n_total": n_total,
        "ns": ns,
        "sum_ys": sum_ys,
        "raw": raw,
        "post": post,
        "mad": mad,
        "pb": pb,
        "avail": avail,
        "in_final": in_final,
        "arm_status": arm_status,
        "status_look": status_look,
    }
    header = {
        "format_version": _FORMAT_VERSION,
        "manifest": {
            "fingerprint": manifest.fingerprint,
            "n_rep": n,
            "base_seed": manifest.base_seed,
            "engine_version": manifest.engine_version,
            "label": manifest.label,
        },
        "spec": spec_to_dict(spec),
        "arrays": [[name, str(a.dtype), list(a.shape)] for name, a in arrays.items()],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    tmp = str(path) + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        for a in arrays.values():
            fh.write(np.ascontiguousarray(a).tobytes())
    os.replace(tmp, path)


def load_batch_file(path) -> tuple[ValidatedSpec, list[TrialResult], RunManifest]:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise StoreError(f"{path}: not an adaptsim batch file")
        header_len = int.from_bytes(fh.read(8), "little")
        header = json.loads(fh.read(header_len).decode())
        if header.get("format_version") != _FORMAT_VERSION:
            raise StoreError(
                f"{path}: unsupported batch format {header.get('format_version')!r}"
            )
        arrays = {}
        for name, dtype, shape in header["arrays"]:
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * np.dtype(dtype).itemsize)
            arrays[name] = np.frombuffer(buf, dtype=dtype).reshape(shape)

    spec = spec_from_dict(header["spec"])
    m = header["manifest"]
    manifest = RunManifest(
        fingerprint=m["fingerprint"],
        n_rep=m["n_rep"],
        base_seed=m["base_seed"],
        engine_version=m["engine_version"],
        label=m.get("label", ""),
    )
    results = _unpack_results(spec, arrays)
    return spec, results, manifest


def _unpack_results(spec: ValidatedSpec, arrays) -> list[TrialResult]:
    n = arrays["status"].shape[0]
    results = []
    for i in range(n):
        superior = int(arrays["superior"][i])
        results.append(
            TrialResult(
                arms=spec.arms,
                control=spec.control,
                highest_is_best=spec.highest_is_best,
                final_status=_STOPS[arrays["status"][i]],
                superior_arm=None if superior < 0 else spec.arms[superior],
                final_look=int(arrays["final_look"][i]),
                n_randomised_total=int(arrays["n_total"][i]),
                ns=tuple(int(x) for x in arrays["ns"][i]),
                sum_ys=tuple(float(x) for x in arrays["sum_ys"][i]),
                raw_estimates=tuple(float(x) for x in arrays["raw"][i]),
                posterior_estimates=tuple(float(x) for x in arrays["post"][i]),
                posterior_mad_sds=tuple(float(x) for x in arrays["mad"][i]),
                final_prob_best=tuple(float(x) for x in arrays["pb"][i]),
                statuses=tuple(_ARM_STATUSES[s] for s in arrays["arm_status"][i]),
                status_looks=tuple(int(x) for x in arrays["status_look"][i]),
                available_at_end=tuple(bool(x) for x in arrays["avail"][i]),
                in_final_analysis=tuple(bool(x) for x in arrays["in_final"][i]),
            )
        )
    return results
