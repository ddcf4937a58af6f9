"""Accuracy against a known hazard and subject-grouped K-fold tuning."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .boosting import BoostConfig, FitError, _risk, compact_rows, compute_F0, fit
from .data import Dataset
from .predict import predict_hazard
from .preprocess import PreprocessedData, preprocess
from .quantiles import MAX_BINS, RAW, build_grid

logger = logging.getLogger(__name__)


def evaluation_points(test: Dataset, scheme: str = "midpoint"):
    """Query points for RMSE: one per test epoch, at its midpoint or start."""
    if scheme == "midpoint":
        t = 0.5 * (test.t_start + test.t_end)
    elif scheme == "start":
        t = test.t_start
    else:
        raise ValueError(f"unknown evaluation scheme {scheme!r}")
    return t, test.X


def rmse(model, test: Dataset, oracle, scheme: str = "midpoint") -> float:
    """Root mean squared difference between estimated and true hazard."""
    if len(test) == 0:
        raise ValueError("empty test set")
    t, X = evaluation_points(test, scheme)
    est = predict_hazard(model, t, X)
    truth = np.asarray(oracle(t, X), dtype=np.float64)
    return float(np.sqrt(np.mean((est - truth) ** 2)))


@dataclass(frozen=True)
class TuneGrid:
    depths: tuple = (1, 2, 3, 4, 5)
    rounds: tuple = (50, 100, 150, 200, 250, 300)
    learning_rates: tuple = (0.1,)
    folds: int = 5
    seed: int = 0
    min_child_events: int = 1
    min_child_weight: float = 0.0

    def __post_init__(self):
        if not (self.depths and self.rounds and self.learning_rates):
            raise ValueError("tuning grid lists must be nonempty")
        if self.folds < 2:
            raise ValueError("need at least 2 folds")

    def configs(self) -> list:
        return [(d, m, lr) for d in self.depths for m in self.rounds for lr in self.learning_rates]


@dataclass
class TuneResult:
    best: BoostConfig
    table: list = field(default_factory=list)  # dicts: depth, rounds, lr, fold_risks, mean_risk

    def to_csv(self, path) -> None:
        K = max((len(r["fold_risks"]) for r in self.table), default=0)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(["depth", "rounds", "learning_rate",
                               *[f"fold{k}" for k in range(K)], "mean_risk"]) + "\n")
            for r in self.table:
                folds = ["" if math.isnan(v) else repr(v) for v in r["fold_risks"]]
                fh.write(",".join([str(r["depth"]), str(r["rounds"]), repr(r["learning_rate"]),
                                   *folds, repr(r["mean_risk"])]) + "\n")


def fold_assignment(subjects, K: int, seed: int) -> dict:
    """Map each subject to a fold in ``0..K-1`` via a seeded permutation of sorted ids."""
    uniq = np.unique(np.asarray(subjects, dtype=str))
    if uniq.size < K:
        raise ValueError(f"{uniq.size} subjects cannot fill {K} folds")
    perm = np.random.default_rng(seed).permutation(uniq.size)
    return {str(uniq[p]): i % K for i, p in enumerate(perm)}


def _heldout_trace(train: PreprocessedData, test: PreprocessedData, cfg: BoostConfig,
                   threads: int = 1):
    """Held-out risk after 0..cfg.num_rounds trees of a single fit."""
    F0 = compute_F0(train)
    n_te = test.num_subjects
    tcodes, tw, tdl, _ = compact_rows(test.codes, test.w, test.delta)
    Ft = np.full(tcodes.shape[0], F0)
    risks = [_risk(tw, tdl, Ft, n_te)]

    def track(m, tree, _train_risk):
        nonlocal Ft
        Ft = Ft - cfg.learning_rate * tree.predict(tcodes)
        risks.append(_risk(tw, tdl, Ft, n_te))

    fit(train, cfg, callback=track, threads=threads)
    # early stop: later trees would not change anything
    risks += [risks[-1]] * (cfg.num_rounds + 1 - len(risks))
    return risks


def kfold_tune(data: Union[Dataset, PreprocessedData], grid: Optional[TuneGrid] = None,
               max_bins: int = MAX_BINS, mode: str = RAW, threads: int = 1) -> TuneResult:
    """Pick (depth, rounds, learning rate) by mean held-out likelihood risk.

    Folds partition subjects, never rows. Preprocessing runs once on the
    full data. Each (depth, learning rate, fold) is fit once with the
    largest round count; smaller round counts read off the same trace.
    Ties go to smaller depth, then fewer rounds, then smaller learning rate.
    """
    grid = grid or TuneGrid()
    if isinstance(data, Dataset):
        data = preprocess(data, build_grid(data, max_bins, mode))
    base = BoostConfig(min_child_events=grid.min_child_events,
                       min_child_weight=grid.min_child_weight,
                       max_bins=data.grid.max_bins, mode=data.grid.mode, seed=grid.seed)
    folds = fold_assignment(data.subject, grid.folds, grid.seed)
    row_fold = np.array([folds[str(s)] for s in data.subject], dtype=np.int64) \
        if len(data) else np.zeros(0, dtype=np.int64)
    max_m = max(grid.rounds)
    # (depth, lr) -> per-fold list of risk traces
    traces = {}
    for depth in sorted(set(grid.depths)):
        for lr in sorted(set(grid.learning_rates)):
            per_fold = []
            for k in range(grid.folds):
                tr, te = data.take(row_fold != k), data.take(row_fold == k)
                if tr.total_events == 0 or te.total_events == 0:
                    logger.warning("fold %d has no events on one side; excluded", k)
                    per_fold.append(None)
                    continue
                try:
                    per_fold.append(_heldout_trace(
                        tr, te, replace(base, max_depth=depth, learning_rate=lr, num_rounds=max_m),
                        threads))
                except FitError as exc:
                    logger.warning("fold %d excluded: %s", k, exc)
                    per_fold.append(None)
            traces[(depth, lr)] = per_fold

    table = []
    for depth, m, lr in grid.configs():
        risks = [tr[m] if tr is not None else math.nan for tr in traces[(depth, lr)]]
        valid = [r for r in risks if not math.isnan(r)]
        mean = float(np.mean(valid)) if valid else math.inf
        table.append({"depth": depth, "rounds": m, "learning_rate": lr,
                      "fold_risks": risks, "mean_risk": mean})
    if all(math.isinf(r["mean_risk"]) for r in table):
        raise FitError("no valid fold for any configuration")
    best = min(table, key=lambda r: (r["mean_risk"], r["depth"], r["rounds"], r["learning_rate"]))
    cfg = replace(base, max_depth=best["depth"], num_rounds=best["rounds"],
                  learning_rate=best["learning_rate"])
    return TuneResult(cfg, table)
