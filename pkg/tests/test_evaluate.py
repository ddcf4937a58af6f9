import logging
import math

import numpy as np
import pytest

from hazboost import (BoostConfig, Dataset, SimConfig, TrueHazard, TuneGrid, build_grid, fit,
                      kfold_tune, preprocess, rmse, simulate_dataset)
from hazboost.boosting import BoostedModel, compute_F0, likelihood_risk
from hazboost.evaluate import _heldout_trace, evaluation_points, fold_assignment

from conftest import random_dataset


@pytest.fixture(scope="module")
def lam1():
    ds, oracle = simulate_dataset(SimConfig(hazard_id=1, num_subjects=600, seed=13))
    return ds, oracle


def _constant_model(grid, F0):
    return BoostedModel(F0, 0.1, (), grid, np.zeros(len(grid.axes)), BoostConfig())


def test_rmse_constant_cases(lam1):
    ds, _ = lam1
    g = build_grid(ds)
    m = _constant_model(g, math.log(2.0))
    assert math.isclose(rmse(m, ds, TrueHazard(0, rate=1.0)), 1.0, rel_tol=1e-12)
    c = math.exp(0.3)
    assert rmse(_constant_model(g, 0.3), ds, TrueHazard(0, rate=c)) == 0.0


def test_rmse_matches_manual(lam1):
    ds, oracle = lam1
    m = fit(preprocess(ds, build_grid(ds)), BoostConfig(max_depth=2, num_rounds=20))
    from hazboost import predict_hazard
    t = 0.5 * (ds.t_start + ds.t_end)
    est = predict_hazard(m, t, ds.X)
    truth = oracle(t, ds.X)
    assert math.isclose(rmse(m, ds, oracle), math.sqrt(np.mean((est - truth) ** 2)))
    ts, _ = evaluation_points(ds, "start")
    assert np.array_equal(ts, ds.t_start)
    with pytest.raises(ValueError):
        rmse(m, ds.take(np.array([], dtype=int)), oracle)


def test_fold_assignment_partition():
    subjects = [f"s{i}" for i in range(23)] * 2
    folds = fold_assignment(subjects, 5, seed=1)
    assert set(folds) == set(subjects)
    sizes = np.bincount(list(folds.values()), minlength=5)
    assert sizes.sum() == 23 and sizes.max() - sizes.min() <= 1
    assert folds == fold_assignment(list(reversed(subjects)), 5, seed=1)
    with pytest.raises(ValueError):
        fold_assignment(["a", "b"], 3, 0)


def test_single_config(lam1):
    ds, _ = lam1
    res = kfold_tune(ds, TuneGrid(depths=(2,), rounds=(10,), folds=3))
    assert (res.best.max_depth, res.best.num_rounds, res.best.learning_rate) == (2, 10, 0.1)
    assert len(res.table) == 1 and len(res.table[0]["fold_risks"]) == 3


def test_duplicate_configs_identical(lam1):
    ds, _ = lam1
    res = kfold_tune(ds, TuneGrid(depths=(1, 1), rounds=(20, 20), folds=3))
    risks = {r["mean_risk"] for r in res.table}
    assert len(risks) == 1


def test_deterministic(lam1):
    ds, _ = lam1
    grid = TuneGrid(depths=(1, 2), rounds=(5, 15), folds=3, seed=4)
    a, b = kfold_tune(ds, grid), kfold_tune(ds, grid)
    assert a.table == b.table and a.best == b.best


def test_beats_constant_baseline(lam1):
    ds, _ = lam1
    res = kfold_tune(ds, TuneGrid(depths=(0, 1, 2, 3), rounds=(1, 50, 100), folds=4))
    base = [r for r in res.table if r["depth"] == 0 and r["rounds"] == 1][0]
    best = min(r["mean_risk"] for r in res.table)
    assert best <= base["mean_risk"]
    assert res.best.max_depth > 0


def test_rounds_read_from_prefix(lam1):
    ds, _ = lam1
    pp = preprocess(ds, build_grid(ds))
    folds = fold_assignment(pp.subject, 3, 0)
    k = np.array([folds[s] for s in pp.subject])
    tr, te = pp.take(k != 0), pp.take(k == 0)
    cfg = BoostConfig(max_depth=2, num_rounds=12, max_bins=pp.grid.max_bins)
    trace = _heldout_trace(tr, te, cfg)
    for M in (0, 5, 12):
        model = fit(tr, cfg, num_rounds=M)
        F = model.log_hazard_codes(te.codes)
        assert math.isclose(trace[M], likelihood_risk(te, F), rel_tol=1e-12)


def test_heldout_constant_model_uses_training_F0(lam1):
    ds, _ = lam1
    pp = preprocess(ds, build_grid(ds))
    folds = fold_assignment(pp.subject, 4, 0)
    k = np.array([folds[s] for s in pp.subject])
    tr, te = pp.take(k != 1), pp.take(k == 1)
    F0 = compute_F0(tr)
    trace = _heldout_trace(tr, te, BoostConfig(max_depth=1, num_rounds=1))
    n_h = te.num_subjects
    expect = (te.total_weight * math.exp(F0) - te.total_events * F0) / n_h
    assert math.isclose(trace[0], expect, rel_tol=1e-12)
    # with the held-out fold's own F0 the two forms coincide
    F0h = compute_F0(te)
    assert math.isclose((te.total_weight * math.exp(F0h) - te.total_events * F0h) / n_h,
                        te.total_events * (1 - F0h) / n_h, rel_tol=1e-12)


def test_eventless_fold_excluded(caplog):
    # six subjects, only two with events: some fold sees none
    ds = Dataset([f"s{i}" for i in range(6)], np.zeros(6), np.ones(6),
                 np.linspace(0.1, 0.6, 6)[:, None], [1, 1, 0, 0, 0, 0])
    with caplog.at_level(logging.WARNING, logger="hazboost.evaluate"):
        res = kfold_tune(ds, TuneGrid(depths=(1,), rounds=(2,), folds=3))
    assert "no events" in caplog.text
    assert any(math.isnan(v) for v in res.table[0]["fold_risks"])
    assert math.isfinite(res.table[0]["mean_risk"])


def test_cv_table_csv(tmp_path, lam1):
    ds, _ = lam1
    res = kfold_tune(ds, TuneGrid(depths=(1,), rounds=(5, 10), folds=2))
    path = tmp_path / "cv.csv"
    res.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "depth,rounds,learning_rate,fold0,fold1,mean_risk"
    assert len(lines) == 3


def test_grid_validation():
    with pytest.raises(ValueError):
        TuneGrid(depths=())
    with pytest.raises(ValueError):
        TuneGrid(folds=1)
