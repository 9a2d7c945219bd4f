import csv
import io
import json

import numpy as np
import pytest

from torrent import bench
from torrent.bench import ExperimentSpec, cell_seed, run_phase, run_race, write_csv
from torrent.exceptions import BadSpec

TIME_FIELDS = ("median_wall_time",)


def strip_time(rows):
    out = []
    for r in rows:
        d = dict(r.__dict__) if not isinstance(r, dict) else dict(r)
        for f in TIME_FIELDS + ("time", "total_time"):
            d.pop(f, None)
        out.append(d)
    return out


def test_trial_defaults():
    assert ExperimentSpec(kind="Phase", seed=1).trials_per_cell == 100
    assert ExperimentSpec(kind="Sweep", seed=1).trials_per_cell == 20
    assert ExperimentSpec(kind="race", seed=1).kind == "Race"


@pytest.mark.parametrize("kw", [dict(alphas=[]), dict(trials_per_cell=0), dict(seed=None),
                                dict(solvers=["XYZ"]), dict(kind="Other")])
def test_spec_validation(kw):
    base = dict(kind="Phase", seed=1)
    base.update(kw)
    with pytest.raises(BadSpec):
        ExperimentSpec(**base)


def test_clean_column_all_succeed():
    spec = ExperimentSpec(kind="Phase", alphas=[0.0], ns=[100], ps=[5], trials_per_cell=5,
                          solvers=["FC", "GD", "HYB", {"variant": "L1", "params": {"lambda_grid": [1.0, 10.0]}}],
                          seed=3)
    rows = run_phase(spec)
    assert [r.solver for r in rows] == ["FC", "GD", "HYB", "L1"]
    assert all(r.success_rate == 1.0 for r in rows)


def test_success_rate_is_exact_ratio():
    spec = ExperimentSpec(kind="Phase", alphas=[0.45], ns=[60], ps=[5], trials_per_cell=7,
                          solvers=["GD"], seed=4)
    for r in run_phase(spec):
        assert r.success_rate == r.successes / r.trials
        assert 0.0 <= r.success_rate <= 1.0


def test_adaptive_cell_near_chance():
    spec = ExperimentSpec(kind="Phase", alphas=[0.49], ns=[400], ps=[10], trials_per_cell=30,
                          solvers=["FC", "GD", "HYB"], adversary="AdaptiveModelShift", seed=5)
    for r in run_phase(spec):
        assert r.success_rate <= 0.8, r


def test_fc_cell_high_success():
    spec = ExperimentSpec(kind="Phase", alphas=[0.3], ns=[1000], ps=[20], solvers=["FC"], seed=6)
    (row,) = run_phase(spec)
    assert row.trials == 100
    assert row.success_rate >= 0.95


def test_single_cell_rerun_reproduces_row():
    full = ExperimentSpec(kind="Sweep", alphas=[0.1, 0.3], ns=[80, 120], ps=[4], trials_per_cell=3,
                          solvers=["FC", "HYB"], seed=7)
    rows = run_phase(full)
    single = ExperimentSpec(kind="Sweep", alphas=[0.3], ns=[120], ps=[4], trials_per_cell=3,
                            solvers=["FC", "HYB"], seed=7)
    again = run_phase(single)
    picked = [r for r in rows if r.alpha == 0.3 and r.n == 120]
    assert strip_time(picked) == strip_time(again)
    assert picked[0].cell_seed == cell_seed(7, (0.3, 120, 4, 0.0, 5.0))


def test_pool_size_does_not_change_results():
    spec = ExperimentSpec(kind="Sweep", alphas=[0.0, 0.2], ns=[60], ps=[3], trials_per_cell=4,
                          solvers=["FC", "GD"], seed=8)
    serial = run_phase(spec, workers=1)
    pooled = run_phase(spec, workers=2)
    assert strip_time(serial) == strip_time(pooled)


def test_workers_env(monkeypatch):
    monkeypatch.setenv(bench.WORKERS_ENV, "3")
    assert bench._workers(None) == 3
    assert bench._workers(1) == 1


def test_distinct_cells_distinct_seeds():
    seeds = {cell_seed(1, (a, 100, 5, 0.0, 5.0)) for a in np.linspace(0, 0.45, 10)}
    assert len(seeds) == 10


def test_race_shared_instances():
    spec = ExperimentSpec(kind="Race", alphas=[0.2], ns=[200], ps=[5], trials_per_cell=2,
                          solvers=["FC", "GD", "HYB", {"variant": "L1", "params": {"lam": 5.0}}],
                          seed=9)
    rows = run_race(spec)
    for trial in (0, 1):
        digests = {r["instance_digest"] for r in rows if r["trial"] == trial}
        solvers = {r["solver"] for r in rows if r["trial"] == trial}
        assert len(digests) == 1
        assert solvers == {"FC", "GD", "HYB", "L1"}


def test_race_gd_monotone_after_burn_in():
    spec = ExperimentSpec(kind="Race", alphas=[0.1], ns=[1000], ps=[10], trials_per_cell=3,
                          solvers=["GD"], beta=0.15, seed=10)
    rows = run_race(spec)
    for trial in range(3):
        err = [r["error"] for r in rows if r["trial"] == trial]
        tail = err[5:]
        assert all(b <= a * (1 + 1e-9) + 1e-15 for a, b in zip(tail, tail[1:]))
        assert err[-1] < 1e-6


def test_csv_format(tmp_path):
    spec = ExperimentSpec(kind="Sweep", alphas=[0.1], ns=[50], ps=[3], trials_per_cell=2,
                          solvers=["FC"], seed=11)
    path = tmp_path / "out.csv"
    text = write_csv(run_phase(spec), path)
    raw = path.read_bytes()
    assert raw.decode("utf-8") == text
    assert raw.count(b"\r\n") == 2
    header, row = list(csv.reader(io.StringIO(text)))
    assert header[:6] == ["alpha", "n", "p", "sigma", "scale", "solver"]
    assert "cell_seed" in header
    assert row[header.index("alpha")] == format(0.1, ".17g")


def test_metadata_records_l1_solver(tmp_path):
    spec = ExperimentSpec(kind="Phase", solvers=["FC", "L1"], seed=12)
    bench.write_metadata(spec, tmp_path / "meta.json")
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert meta["l1_solver"] == "admm-basis-pursuit"
    assert len(meta["l1_lambda_grid"]) == 20
    assert meta["experiment"]["seed"] == 12


def test_success_rule():
    w = np.array([3.0, 4.0])
    assert bench.is_success(w + [0, 4.9e-4], w, 1e-4)
    assert not bench.is_success(w + [0, 5.1e-4], w, 1e-4)
