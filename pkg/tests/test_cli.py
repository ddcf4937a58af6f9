import json
import subprocess
import sys

import numpy as np
import pytest

from hazboost import load_model, load_preprocessed, predict_hazard
from hazboost.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from hazboost.evaluate import rmse
from hazboost.data import load_csv
from hazboost.simulate import TrueHazard


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["simulate", "--hazard", "1", "--subjects", "300", "--seed", "3",
                 "--out", str(d / "train.csv")]) == 0
    assert main(["simulate", "--hazard", "1", "--subjects", "200", "--seed", "4",
                 "--out", str(d / "test.csv")]) == 0
    assert main(["preprocess", str(d / "train.csv"), "--max-bins", "32",
                 "--out", str(d / "train.hzb")]) == 0
    assert main(["train", str(d / "train.hzb"), "--depth", "2", "--rounds", "30",
                 "--out", str(d / "model.txt")]) == 0
    return d


def test_manifests_written(pipeline):
    for name in ("train.csv", "train.hzb", "model.txt"):
        doc = json.loads((pipeline / f"{name}.manifest.json").read_text())
        assert {"command", "tool_version", "args", "timings"} <= set(doc)
    truth = json.loads((pipeline / "train.csv.truth.json").read_text())
    assert truth["hazard_id"] == 1 and truth["seed"] == 3


def test_train_manifest_trace_nonincreasing(pipeline):
    doc = json.loads((pipeline / "model.txt.manifest.json").read_text())
    tr = doc["risk_trace"]
    assert len(tr) == 31
    assert all(b <= a for a, b in zip(tr, tr[1:]))
    assert doc["config"]["max_depth"] == 2


def test_train_reproducible_and_thread_independent(pipeline):
    out1, out8 = pipeline / "m1.txt", pipeline / "m8.txt"
    args = ["train", str(pipeline / "train.hzb"), "--depth", "2", "--rounds", "30"]
    assert main(args + ["--threads", "1", "--out", str(out1)]) == 0
    assert main(args + ["--threads", "8", "--out", str(out8)]) == 0
    assert out1.read_bytes() == out8.read_bytes() == (pipeline / "model.txt").read_bytes()


def test_zero_rounds_constant_model(pipeline):
    out = pipeline / "m0.txt"
    assert main(["train", str(pipeline / "train.hzb"), "--rounds", "0", "--out", str(out)]) == 0
    m = load_model(out)
    assert m.trees == ()
    pp = load_preprocessed(pipeline / "train.hzb")
    h = predict_hazard(m, [0.5], [[0.5]])
    assert np.isclose(h[0], pp.total_events / pp.total_weight, rtol=1e-12)


def test_preprocess_idempotent(pipeline):
    again = pipeline / "again.hzb"
    assert main(["preprocess", str(pipeline / "train.csv"), "--max-bins", "32",
                 "--out", str(again)]) == 0
    assert again.read_bytes() == (pipeline / "train.hzb").read_bytes()


def test_preprocess_toy_golden(tmp_path, toy_csv):
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"time_splits": [0.01, 0.10, 0.15], "cov_splits": [[0.51, 0.81]]}))
    dump = tmp_path / "pp.csv"
    assert main(["preprocess", str(toy_csv), "--grid", str(grid), "--csv", str(dump),
                 "--out", str(tmp_path / "pp.hzb")]) == 0
    rows = [ln.split(",") for ln in dump.read_text().splitlines()[1:]]
    assert [r[0] for r in rows] == ["1", "1", "1", "2", "2", "2"]
    assert [float(r[1]) for r in rows] == [0.01, 0.10, 0.15, 0.01, 0.10, 0.15]
    np.testing.assert_allclose([float(r[2]) for r in rows], [0.09, 0.03, 0.10, 0.04, 0.02, 0.10],
                               rtol=1e-12)
    assert [r[3] for r in rows] == ["-inf", "-inf", "-inf", "0.51", "0.81", "0.81"]
    assert [r[4] for r in rows] == ["0", "1", "0", "1", "0", "0"]


def test_bad_column_is_data_error(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("id,t_start,t_end,x1,delta\na,0,1,0.5,1\n")
    assert main(["preprocess", str(bad), "--out", str(tmp_path / "x.hzb")]) == EXIT_DATA
    assert "missing column" in capsys.readouterr().err


def test_usage_errors(tmp_path, pipeline):
    with pytest.raises(SystemExit) as exc:
        main(["train"])
    assert exc.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == EXIT_USAGE
    assert main(["train", str(pipeline / "train.hzb"), "--depth", "-1",
                 "--out", str(tmp_path / "x.txt")]) == EXIT_USAGE


def test_missing_input_is_data_error(tmp_path):
    assert main(["train", str(tmp_path / "nope.hzb"), "--out", str(tmp_path / "m")]) == EXIT_DATA


def test_simulate_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert main(["simulate", "--hazard", "1", "--subjects", "10", "--seed", "7",
                     "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_evaluate_matches_library(pipeline, capsys):
    out = pipeline / "ev.json"
    assert main(["evaluate", str(pipeline / "model.txt"), str(pipeline / "test.csv"),
                 "--truth", str(pipeline / "test.csv.truth.json"), "--out", str(out)]) == 0
    value = json.loads(out.read_text())["rmse"]
    lib = rmse(load_model(pipeline / "model.txt"), load_csv(pipeline / "test.csv"), TrueHazard(1))
    assert value == lib
    assert f"RMSE {lib!r}" in capsys.readouterr().out


def test_predict_and_importance(pipeline):
    q = pipeline / "q.csv"
    q.write_text("t,x1\n0.5,0.5\n0.2,\n")
    out = pipeline / "pred.csv"
    assert main(["predict", str(pipeline / "model.txt"), str(q), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "t,x1,hazard"
    m = load_model(pipeline / "model.txt")
    expect = predict_hazard(m, [0.5, 0.2], [[0.5], [np.nan]])
    assert [float(ln.split(",")[-1]) for ln in lines[1:]] == expect.tolist()

    imp = pipeline / "imp.csv"
    assert main(["importance", str(pipeline / "model.txt"), "--out", str(imp)]) == 0
    rows = [ln.split(",") for ln in imp.read_text().splitlines()]
    assert rows[0] == ["variable", "raw", "relative"]
    assert [r[0] for r in rows[1:]] == ["time", "x1"]
    assert max(float(r[2]) for r in rows[1:]) == 1.0


def test_predict_missing_column(pipeline):
    q = pipeline / "q2.csv"
    q.write_text("t,age\n0.5,0.5\n")
    assert main(["predict", str(pipeline / "model.txt"), str(q),
                 "--out", str(pipeline / "p2.csv")]) == EXIT_DATA


def test_importance_time_only(tmp_path):
    data = tmp_path / "d.csv"
    # single covariate value, so every split is on time
    data.write_text("subject,t_start,t_end,x1,delta\n"
                    "a,0,1,0.5,1\nb,0,2,0.5,1\nc,0,3,0.5,0\nd,0,0.5,0.5,1\n")
    assert main(["preprocess", str(data), "--out", str(tmp_path / "d.hzb")]) == 0
    assert main(["train", str(tmp_path / "d.hzb"), "--depth", "1", "--rounds", "3",
                 "--out", str(tmp_path / "m.txt")]) == 0
    assert main(["importance", str(tmp_path / "m.txt"), "--out", str(tmp_path / "i.csv")]) == 0
    rows = [ln.split(",") for ln in (tmp_path / "i.csv").read_text().splitlines()[1:]]
    assert rows[0][0] == "time" and float(rows[0][2]) == 1.0
    assert float(rows[1][2]) == 0.0


def test_tune_writes_config_consumable_by_train(pipeline):
    best = pipeline / "best.json"
    assert main(["tune", str(pipeline / "train.hzb"), "--depths", "1,2", "--rounds", "5,10",
                 "--folds", "3", "--best-config", str(best), "--out",
                 str(pipeline / "cv.csv")]) == 0
    cfg = json.loads(best.read_text())
    assert cfg["max_depth"] in (1, 2) and cfg["num_rounds"] in (5, 10)
    assert main(["train", str(pipeline / "train.hzb"), "--config", str(best),
                 "--out", str(pipeline / "tuned.txt")]) == 0
    assert load_model(pipeline / "tuned.txt").config.num_rounds == cfg["num_rounds"]


def test_help_lists_all_commands():
    out = subprocess.run([sys.executable, "-m", "hazboost.cli", "--help"], capture_output=True,
                         text=True, check=True).stdout
    for cmd in ("simulate", "preprocess", "tune", "train", "predict", "importance", "evaluate"):
        assert cmd in out
