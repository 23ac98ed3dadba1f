"""Batch persistence: exact round trips, manifest guards, prefix reuse."""

import pytest

import adaptsim as a
from adaptsim.store import RunManifest, load_batch_file, save_batch_file

from util import tiny_spec


def _batch(spec, n, seed=9, **kwargs):
    return a.run_batch(spec, n, seed, workers=1, **kwargs)


def test_round_trip_reproduces_results_exactly(tmp_path):
    spec = tiny_spec(n_looks=3, equivalence_prob=0.9, equivalence_diff=0.05)
    batch = _batch(spec, 12)
    path = tmp_path / "batch.atb"
    save_batch_file(
        path, spec, batch.results,
        RunManifest(fingerprint=spec.fingerprint(), n_rep=12, base_seed=9),
    )
    loaded_spec, loaded, manifest = load_batch_file(path)
    assert loaded_spec == spec
    assert manifest.n_rep == 12 and manifest.base_seed == 9
    assert loaded == batch.results  # field-level dataclass equality


def test_rerun_loads_instead_of_recomputing(tmp_path):
    spec = tiny_spec()
    path = tmp_path / "batch.atb"
    first = _batch(spec, 10, store_path=path)
    assert first.n_loaded == 0
    again = _batch(spec, 10, store_path=path)
    assert again.n_loaded == 10  # zero simulations executed
    assert again.results == first.results


def test_extension_runs_only_the_missing_tail(tmp_path):
    spec = tiny_spec()
    path = tmp_path / "batch.atb"
    small = _batch(spec, 10, store_path=path)
    big = _batch(spec, 100, store_path=path)
    assert big.n_loaded == 10
    assert big.n_rep == 100
    assert big.results[:10] == small.results
    # the extension equals a from-scratch run of the same size
    fresh = _batch(spec, 100)
    assert fresh.results == big.results
    # a shorter request returns the stored prefix without recomputing
    prefix = _batch(spec, 25, store_path=path)
    assert prefix.n_loaded == 25
    assert prefix.results == big.results[:25]


def test_seed_mismatch_is_an_error(tmp_path):
    spec = tiny_spec()
    path = tmp_path / "batch.atb"
    _batch(spec, 5, seed=9, store_path=path)
    with pytest.raises(a.StoreError, match="base_seed"):
        _batch(spec, 5, seed=10, store_path=path)


def test_fingerprint_mismatch_is_an_error(tmp_path):
    path = tmp_path / "batch.atb"
    _batch(tiny_spec(), 5, store_path=path)
    other = tiny_spec(true_probs=(0.25, 0.30))
    with pytest.raises(a.StoreError, match="different design"):
        _batch(other, 5, store_path=path)


def test_not_a_batch_file(tmp_path):
    path = tmp_path / "junk.atb"
    path.write_bytes(b"definitely not a batch")
    with pytest.raises(a.StoreError, match="not an adaptsim batch"):
        load_batch_file(path)


def test_stored_bytes_are_deterministic(tmp_path):
    spec = tiny_spec()
    p1, p2 = tmp_path / "one.atb", tmp_path / "two.atb"
    _batch(spec, 8, store_path=p1)
    _batch(spec, 8, store_path=p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_worker_count_does_not_change_results():
    spec = tiny_spec(n_looks=3)
    serial = a.run_batch(spec, 16, 4131, workers=1)
    parallel = a.run_batch(spec, 16, 4131, workers=3)
    assert serial.results == parallel.results


def test_batch_summarize_uses_spec_truths():
    spec = tiny_spec()
    batch = _batch(spec, 10)
    summary = batch.summarize("best")
    assert summary["n_summarised"].est == 10
    assert 0.0 <= summary["prob_superior"].est <= 1.0
