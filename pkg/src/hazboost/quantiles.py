"""Candidate split points per axis (time plus each covariate).

Two flavours are supported. ``raw`` takes evenly spaced order statistics
of the unique observed values. ``weighted`` weights each observed value by
the time it was held, so that long epochs pull candidates toward their
covariate values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset

RAW = "raw"
WEIGHTED = "weighted"
MAX_BINS = 256


@dataclass(frozen=True, eq=False)
class CandidateGrid:
    """Strictly increasing candidate split points for time and each covariate.

    ``support`` holds the observed ``(min, max)`` of each axis, time first;
    prediction uses it to count off-support queries.
    """

    time_splits: np.ndarray
    cov_splits: tuple
    mode: str = RAW
    max_bins: int = MAX_BINS
    support: tuple = field(default=())

    def __post_init__(self):
        ts = np.asarray(self.time_splits, dtype=np.float64)
        cs = tuple(np.asarray(c, dtype=np.float64) for c in self.cov_splits)
        for name, arr in [("time", ts)] + [(f"x{k + 1}", c) for k, c in enumerate(cs)]:
            if arr.ndim != 1 or not np.all(np.isfinite(arr)) or np.any(np.diff(arr) <= 0):
                raise ValueError(f"{name} candidates must be finite and strictly increasing")
            if arr.size > self.max_bins:
                raise ValueError(f"{name} has {arr.size} candidates > max_bins={self.max_bins}")
            arr.setflags(write=False)
        if self.mode not in (RAW, WEIGHTED):
            raise ValueError(f"unknown quantile mode {self.mode!r}")
        if not 1 <= self.max_bins <= MAX_BINS:
            raise ValueError(f"max_bins must be in [1, {MAX_BINS}]")
        object.__setattr__(self, "time_splits", ts)
        object.__setattr__(self, "cov_splits", cs)
        support = tuple(tuple(map(float, s)) for s in self.support)
        if not support:
            support = tuple((float(a[0]), float(a[-1])) if a.size else (math.nan, math.nan)
                            for a in (ts, *cs))
        object.__setattr__(self, "support", support)

    @property
    def num_covariates(self) -> int:
        return len(self.cov_splits)

    def axis(self, k: int) -> np.ndarray:
        """Candidates of axis ``k``; 0 is time, ``k >= 1`` is covariate ``k``."""
        return self.time_splits if k == 0 else self.cov_splits[k - 1]

    @property
    def axes(self) -> list:
        return [self.time_splits, *self.cov_splits]

    def __eq__(self, other):
        if not isinstance(other, CandidateGrid):
            return NotImplemented
        return (self.mode == other.mode and self.max_bins == other.max_bins
                and len(self.cov_splits) == len(other.cov_splits)
                and all(np.array_equal(a, b) for a, b in zip(self.axes, other.axes))
                and np.array_equal(np.array(self.support), np.array(other.support), equal_nan=True))

    __hash__ = None


def raw_candidates(values: np.ndarray, max_bins: int) -> np.ndarray:
    """Order statistics at ranks ceil(j*U/max_bins) - 1, j = 1..max_bins, of the unique values."""
    u = np.unique(values[~np.isnan(values)])
    if u.size == 0:
        return u
    j = np.arange(1, max_bins + 1)
    ranks = -(-(j * u.size) // max_bins) - 1
    return u[np.unique(ranks)]


def weighted_candidates(values: np.ndarray, weights: np.ndarray, max_bins: int) -> np.ndarray:
    """Smallest observed values whose weighted cdf reaches j/max_bins, j = 1..max_bins."""
    keep = ~np.isnan(values)
    values, weights = values[keep], weights[keep]
    if values.size == 0:
        return values
    u, inv = np.unique(values, return_inverse=True)
    cum = np.cumsum(np.bincount(inv, weights=weights, minlength=u.size))
    total = cum[-1]
    if not total > 0:
        return raw_candidates(values, max_bins)
    # tolerance absorbs rounding in cumulative sums hitting a level exactly
    levels = np.arange(1, max_bins + 1) * (total / max_bins) * (1.0 - 1e-12)
    pos = np.searchsorted(cum, levels, side="left")
    return u[np.unique(np.minimum(pos, u.size - 1))]


def build_grid(dataset: Dataset, max_bins: int = MAX_BINS, mode: str = RAW) -> CandidateGrid:
    """Build candidate split points for every axis of ``dataset``.

    Covariates that are entirely missing get an empty candidate list and are
    never split on. The raw time axis pools the unique start and end times.
    """
    if not 1 <= max_bins <= MAX_BINS:
        raise ValueError(f"max_bins must be in [1, {MAX_BINS}], got {max_bins}")
    if len(dataset) == 0:
        raise ValueError("cannot build a grid from an empty dataset")
    dur = dataset.t_end - dataset.t_start
    if mode == RAW:
        times = raw_candidates(np.concatenate([dataset.t_start, dataset.t_end]), max_bins)
        covs = [raw_candidates(dataset.X[:, k], max_bins) for k in range(dataset.num_covariates)]
    elif mode == WEIGHTED:
        times = weighted_candidates(dataset.t_end, dur, max_bins)
        covs = [weighted_candidates(dataset.X[:, k], dur, max_bins)
                for k in range(dataset.num_covariates)]
    else:
        raise ValueError(f"unknown quantile mode {mode!r}")

    support = [(float(dataset.t_start.min()), float(dataset.t_end.max()))]
    for k in range(dataset.num_covariates):
        col = dataset.X[:, k]
        col = col[~np.isnan(col)]
        support.append((float(col.min()), float(col.max())) if col.size else (math.nan, math.nan))
    return CandidateGrid(times, tuple(covs), mode, max_bins, tuple(support))


def weighted_quantile(dataset: Dataset, axis: int, x: float) -> float:
    """Fraction of total at-risk time spent at values ``<= x`` on ``axis``.

    For covariate axes (``axis >= 1``) an epoch counts when its covariate
    value is ``<= x``; for time (``axis == 0``) when its end time is.
    Epochs with the covariate missing carry no weight.
    """
    dur = dataset.t_end - dataset.t_start
    vals = dataset.t_end if axis == 0 else dataset.X[:, axis - 1]
    observed = ~np.isnan(vals)
    total = dur[observed].sum()
    if not total > 0:
        raise ValueError("axis has no observed at-risk time")
    return float(dur[observed & (vals <= x)].sum() / total)
