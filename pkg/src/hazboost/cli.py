"""Command-line pipelines: simulate, preprocess, tune, train, predict, importance, evaluate.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error. Every
command writes ``<output>.manifest.json`` next to its main output.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .boosting import BoostConfig, FitError, fit, variable_importance
from .data import DataError, load_csv, write_csv
from .evaluate import TuneGrid, kfold_tune, rmse
from .predict import ModelFormatError, load_model, predict_hazard, save_model
from .preprocess import (grid_from_dict, load_preprocessed, preprocess, save_preprocessed,
                         to_csv)
from .quantiles import CandidateGrid, build_grid
from .simulate import SimConfig, TrueHazard, simulate_dataset

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

log = logging.getLogger("hazboost")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class Manifest:
    def __init__(self, command: str, args: argparse.Namespace):
        self.doc = {"command": command, "tool_version": __version__,
                    "args": {k: v for k, v in vars(args).items() if k != "func"},
                    "inputs": {}, "outputs": {}, "config": {}, "seeds": {}, "timings": {}}

    @contextmanager
    def phase(self, name):
        t0 = time.perf_counter()
        yield
        self.doc["timings"][name] = time.perf_counter() - t0

    def write(self, out_path):
        path = Path(str(out_path) + ".manifest.json")
        path.write_text(json.dumps(self.doc, indent=2, sort_keys=True, default=str) + "\n")
        return path


def _int_list(s):
    try:
        return tuple(int(v) for v in s.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}")


def _float_list(s):
    try:
        return tuple(float(v) for v in s.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}")


# ----------------------------------------------------------------------------

def cmd_simulate(args):
    m = Manifest("simulate", args)
    cfg = SimConfig(hazard_id=args.hazard, num_subjects=args.subjects,
                    num_irrelevant=args.irrelevant, p_drop=args.p_drop,
                    recurring=args.recurring, n_max=args.n_max, num_epochs=args.epochs,
                    seed=args.seed, rate=args.rate)
    with m.phase("simulate"):
        ds, _ = simulate_dataset(cfg)
    with m.phase("write"):
        write_csv(ds, args.out)
    truth = {"hazard_id": cfg.hazard_id, "seed": cfg.seed, "config": cfg.to_dict()}
    truth_path = Path(str(args.out) + ".truth.json")
    truth_path.write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n")
    m.doc.update(config=cfg.to_dict(), seeds={"simulate": cfg.seed},
                 outputs={"data": str(args.out), "truth": str(truth_path)})
    m.write(args.out)
    print(f"wrote {len(ds)} rows for {ds.num_subjects} subjects to {args.out}")


def _explicit_grid(path, p):
    d = json.loads(Path(path).read_text())
    if "time_splits" in d and isinstance(d["time_splits"][0] if d["time_splits"] else 0.0, str):
        return grid_from_dict(d)
    cov = d.get("cov_splits", [[] for _ in range(p)])
    if len(cov) != p:
        raise UsageError(f"grid file has {len(cov)} covariate axes, data has {p}")
    return CandidateGrid(np.array(d["time_splits"], dtype=float),
                         tuple(np.array(c, dtype=float) for c in cov),
                         d.get("mode", "raw"), int(d.get("max_bins", 256)))


def cmd_preprocess(args):
    m = Manifest("preprocess", args)
    with m.phase("load"):
        ds = load_csv(args.input)
    with m.phase("grid"):
        grid = (_explicit_grid(args.grid, ds.num_covariates) if args.grid
                else build_grid(ds, args.max_bins, args.quantile_mode))
    with m.phase("preprocess"):
        pp = preprocess(ds, grid)
    with m.phase("write"):
        save_preprocessed(pp, args.out)
        if args.csv:
            to_csv(pp, args.csv)
    m.doc.update(inputs={"data": str(args.input)},
                 outputs={"preprocessed": str(args.out), "csv": args.csv},
                 config={"max_bins": grid.max_bins, "mode": grid.mode, "rows_in": len(ds),
                         "rows_out": len(pp)})
    m.write(args.out)
    print(f"preprocessed {len(ds)} epochs into {len(pp)} rows -> {args.out}")


def _train_config(args) -> BoostConfig:
    cfg = BoostConfig()
    if args.config:
        try:
            cfg = BoostConfig(**json.loads(Path(args.config).read_text()))
        except (TypeError, ValueError) as exc:
            raise UsageError(f"{args.config}: {exc}") from None
    over = {k: v for k, v in (("max_depth", args.depth), ("num_rounds", args.rounds),
                              ("learning_rate", args.learning_rate),
                              ("min_child_events", args.min_child_events),
                              ("min_child_weight", args.min_child_weight),
                              ("seed", args.seed)) if v is not None}
    try:
        return replace(cfg, **over)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def cmd_train(args):
    m = Manifest("train", args)
    with m.phase("load"):
        pp = load_preprocessed(args.input)
    cfg = _train_config(args)
    with m.phase("fit"):
        model = fit(pp, cfg, threads=args.threads)
    with m.phase("write"):
        save_model(model, args.out)
    m.doc.update(inputs={"preprocessed": str(args.input)}, outputs={"model": str(args.out)},
                 config=model.config.to_dict(), seeds={"train": model.config.seed},
                 risk_trace=list(model.risk_trace), trees=len(model.trees),
                 stopped_early_at=model.stopped_early_at)
    m.write(args.out)
    print(f"trained {len(model.trees)} trees; final training risk {model.risk_trace[-1]:.6g}")


def cmd_tune(args):
    m = Manifest("tune", args)
    with m.phase("load"):
        pp = load_preprocessed(args.input)
    grid = TuneGrid(depths=args.depths, rounds=args.rounds, learning_rates=args.learning_rates,
                    folds=args.folds, seed=args.seed, min_child_events=args.min_child_events)
    with m.phase("tune"):
        res = kfold_tune(pp, grid, threads=args.threads)
    res.to_csv(args.out)
    best = res.best.to_dict()
    if args.best_config:
        Path(args.best_config).write_text(json.dumps(best, indent=2, sort_keys=True) + "\n")
    m.doc.update(inputs={"preprocessed": str(args.input)},
                 outputs={"cv_table": str(args.out), "best_config": args.best_config},
                 config=best, seeds={"folds": args.seed})
    m.write(args.out)
    print(json.dumps(best, sort_keys=True))


def _read_queries(path, names):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        tcol = "t" if "t" in header else ("time" if "time" in header else None)
        if tcol is None:
            raise DataError(f"{path}: query file needs a 't' column")
        lacking = [n for n in names if n not in header]
        if lacking:
            raise DataError(f"{path}: missing covariate column(s) {lacking}")
        rows = list(reader)
    t = np.array([float(r[tcol]) for r in rows], dtype=float)
    X = np.array([[float(r[n]) if r[n].strip() else np.nan for n in names] for r in rows],
                 dtype=float).reshape(len(rows), len(names))
    return header, rows, t, X


def cmd_predict(args):
    m = Manifest("predict", args)
    model = load_model(args.model)
    names = model.meta.get("covariate_names") or [f"x{k + 1}" for k in range(model.num_covariates)]
    header, rows, t, X = _read_queries(args.queries, names)
    with m.phase("predict"):
        haz = predict_hazard(model, t, X) if len(rows) else np.zeros(0)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*header, "hazard"])
        for r, h in zip(rows, haz):
            w.writerow([*(r[c] for c in header), repr(float(h))])
    m.doc.update(inputs={"model": str(args.model), "queries": str(args.queries)},
                 outputs={"predictions": str(args.out)})
    m.write(args.out)
    print(f"wrote {len(rows)} predictions to {args.out}")


def cmd_importance(args):
    model = load_model(args.model)
    names = ["time", *(model.meta.get("covariate_names")
                       or [f"x{k + 1}" for k in range(model.num_covariates)])]
    rel = variable_importance(model)
    lines = ["variable,raw,relative"] + [f"{n},{r!r},{v!r}" for n, r, v in
                                          zip(names, model.importance_raw.tolist(), rel.tolist())]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        m = Manifest("importance", args)
        m.doc.update(inputs={"model": str(args.model)}, outputs={"importance": str(args.out)})
        m.write(args.out)
    sys.stdout.write(text)


def cmd_evaluate(args):
    m = Manifest("evaluate", args)
    model = load_model(args.model)
    test = load_csv(args.test)
    truth = json.loads(Path(args.truth).read_text())
    cfg = truth.get("config", {})
    oracle = TrueHazard(int(truth["hazard_id"]), float(cfg.get("rate", 1.0)))
    with m.phase("evaluate"):
        value = rmse(model, test, oracle, args.scheme)
    m.doc.update(inputs={"model": str(args.model), "test": str(args.test),
                         "truth": str(args.truth)}, rmse=value)
    if args.out:
        Path(args.out).write_text(json.dumps({"rmse": value}) + "\n")
        m.write(args.out)
    print(f"RMSE {value!r}")


# ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hazboost", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"hazboost {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="simulate a dataset from a known hazard")
    s.add_argument("--hazard", type=int, required=True, choices=[0, 1, 2, 3, 4],
                   help="hazard id; 0 is a constant hazard of --rate")
    s.add_argument("--subjects", type=int, default=5000)
    s.add_argument("--irrelevant", type=int, default=0, help="extra U(0,1] noise covariates")
    s.add_argument("--p-drop", type=float, default=0.0, help="per-epoch dropout probability")
    s.add_argument("--recurring", action="store_true", help="allow recurring events")
    s.add_argument("--n-max", type=int, default=None, help="max events per subject")
    s.add_argument("--epochs", type=int, default=20, help="covariate updates per horizon")
    s.add_argument("--rate", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("preprocess", help="build the candidate grid and boosting rows")
    s.add_argument("input", help="epoch CSV")
    s.add_argument("--max-bins", type=int, default=256)
    s.add_argument("--quantile-mode", choices=["raw", "weighted"], default="raw")
    s.add_argument("--grid", help="JSON with explicit time_splits / cov_splits")
    s.add_argument("--csv", help="also dump the rows as CSV")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_preprocess)

    def train_args(s):
        s.add_argument("--min-child-events", type=int, default=None)
        s.add_argument("--seed", type=int, default=None)

    s = sub.add_parser("train", help="fit a boosted hazard model")
    s.add_argument("input", help="preprocessed file")
    s.add_argument("--config", help="JSON config, e.g. from `tune --best-config`")
    s.add_argument("--depth", type=int, default=None)
    s.add_argument("--rounds", type=int, default=None)
    s.add_argument("--learning-rate", type=float, default=None)
    s.add_argument("--min-child-weight", type=float, default=None)
    train_args(s)
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("tune", help="K-fold cross-validation over a config grid")
    s.add_argument("input", help="preprocessed file")
    s.add_argument("--depths", type=_int_list, default=(1, 2, 3, 4, 5))
    s.add_argument("--rounds", type=_int_list, default=(50, 100, 150, 200, 250, 300))
    s.add_argument("--learning-rates", type=_float_list, default=(0.1,))
    s.add_argument("--folds", type=int, default=5)
    s.add_argument("--min-child-events", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--best-config", help="write the chosen config as JSON")
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--out", required=True, help="CV table CSV")
    s.set_defaults(func=cmd_tune)

    s = sub.add_parser("predict", help="hazard at query points")
    s.add_argument("model")
    s.add_argument("queries", help="CSV with a t column and the covariate columns")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("importance", help="relative variable importance")
    s.add_argument("model")
    s.add_argument("--out")
    s.set_defaults(func=cmd_importance)

    s = sub.add_parser("evaluate", help="RMSE against the generating hazard")
    s.add_argument("model")
    s.add_argument("test", help="test epoch CSV")
    s.add_argument("--truth", required=True, help="ground-truth manifest from simulate")
    s.add_argument("--scheme", choices=["midpoint", "start"], default="midpoint")
    s.add_argument("--out")
    s.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"hazboost: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FitError, ModelFormatError, FileNotFoundError, ValueError) as exc:
        print(f"hazboost: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"hazboost: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
