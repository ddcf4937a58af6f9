"""Counting-process survival data: one row per at-risk epoch.

Each row is ``(subject, t_start, t_end, x_1..x_p, delta)``: the subject is
at risk on ``(t_start, t_end]`` with covariates held constant, and
``delta == 1`` iff an event occurred at ``t_end``. Gaps between a subject's
epochs mean the subject was not at risk there.

Missing covariate entries are stored as ``NaN``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

MISSING = float("nan")

SUBJECT_COL = "subject"
START_COL = "t_start"
END_COL = "t_end"
DELTA_COL = "delta"


class DataError(ValueError):
    """Raised for malformed or invalid survival data."""


class SchemaError(DataError):
    pass


class ParseError(DataError):
    pass


class ValidationError(DataError):
    def __init__(self, violations: Sequence["Violation"]):
        self.violations = list(violations)
        shown = "; ".join(str(v) for v in self.violations[:5])
        more = len(self.violations) - 5
        if more > 0:
            shown += f"; ... ({more} more)"
        super().__init__(f"{len(self.violations)} validation violation(s): {shown}")


@dataclass(frozen=True)
class Violation:
    row: int
    rule: str
    detail: str = ""

    def __str__(self) -> str:
        s = f"row {self.row}: {self.rule}"
        return f"{s} ({self.detail})" if self.detail else s


@dataclass(frozen=True)
class EpochRow:
    subject_id: str
    t_start: float
    t_end: float
    covariates: tuple
    delta: int


class Dataset:
    """Immutable columnar table of epochs.

    Rows are normalized to (subject, t_start) order on construction, so the
    order in which subjects arrive never matters downstream.

    Parameters
    ----------
    subject : array-like of str
    t_start, t_end : array-like of float
    X : array-like, shape (n, p)
        Covariates; ``NaN`` marks a missing entry.
    delta : array-like of int
    covariate_names : sequence of str, optional
    """

    def __init__(self, subject, t_start, t_end, X, delta, covariate_names=None, *,
                 _presorted=False):
        subject = np.asarray(subject, dtype=str)
        t_start = np.asarray(t_start, dtype=np.float64)
        t_end = np.asarray(t_end, dtype=np.float64)
        delta = np.asarray(delta, dtype=np.int64)
        n = subject.shape[0]
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(n, -1) if n else X.reshape(0, len(covariate_names or []))
        if not (t_start.shape == t_end.shape == delta.shape == (n,)) or X.shape[0] != n:
            raise DataError("column lengths disagree")
        p = X.shape[1]
        if covariate_names is None:
            covariate_names = [f"x{k + 1}" for k in range(p)]
        if len(covariate_names) != p:
            raise SchemaError(f"{len(covariate_names)} covariate names for {p} columns")

        if n and not _presorted:
            _, subj_code = np.unique(subject, return_inverse=True)
            order = np.lexsort((t_end, t_start, subj_code))
            subject, t_start, t_end, X, delta = (
                subject[order], t_start[order], t_end[order], X[order], delta[order])
        for arr in (subject, t_start, t_end, X, delta):
            arr.setflags(write=False)
        self.subject = subject
        self.t_start = t_start
        self.t_end = t_end
        self.X = X
        self.delta = delta
        self.covariate_names = tuple(covariate_names)
        self._subject_index = None

    @classmethod
    def from_rows(cls, rows: Sequence[EpochRow], covariate_names=None) -> "Dataset":
        p = len(rows[0].covariates) if rows else len(covariate_names or [])
        X = np.array([list(r.covariates) for r in rows], dtype=np.float64).reshape(len(rows), p)
        return cls([r.subject_id for r in rows], [r.t_start for r in rows],
                   [r.t_end for r in rows], X, [r.delta for r in rows], covariate_names)

    def __len__(self) -> int:
        return self.subject.shape[0]

    @property
    def num_covariates(self) -> int:
        return self.X.shape[1]

    @property
    def num_subjects(self) -> int:
        return len(self.subject_index)

    @property
    def subject_index(self) -> dict:
        """Map subject id -> array of row indices, in time order."""
        if self._subject_index is None:
            index = {}
            if len(self):
                brk = np.flatnonzero(self.subject[1:] != self.subject[:-1]) + 1
                starts = np.concatenate([[0], brk])
                ends = np.concatenate([brk, [len(self)]])
                for a, b in zip(starts, ends):
                    index[str(self.subject[a])] = np.arange(a, b)
            self._subject_index = index
        return self._subject_index

    def row(self, i: int) -> EpochRow:
        return EpochRow(str(self.subject[i]), float(self.t_start[i]), float(self.t_end[i]),
                        tuple(float(v) for v in self.X[i]), int(self.delta[i]))

    def __iter__(self) -> Iterator[EpochRow]:
        return (self.row(i) for i in range(len(self)))

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.subject[idx], self.t_start[idx], self.t_end[idx], self.X[idx],
                       self.delta[idx], self.covariate_names)

    def subset_subjects(self, subjects) -> "Dataset":
        return self.take(np.flatnonzero(np.isin(self.subject, np.asarray(list(subjects), dtype=str))))

    @property
    def total_time(self) -> float:
        return float(np.sum(self.t_end - self.t_start))

    @property
    def total_events(self) -> int:
        return int(np.sum(self.delta))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.covariate_names == other.covariate_names
                and np.array_equal(self.subject, other.subject)
                and np.array_equal(self.t_start, other.t_start)
                and np.array_equal(self.t_end, other.t_end)
                and np.array_equal(self.X, other.X, equal_nan=True)
                and np.array_equal(self.delta, other.delta))

    __hash__ = None

    def __repr__(self) -> str:
        return (f"Dataset(rows={len(self)}, subjects={self.num_subjects}, "
                f"p={self.num_covariates}, events={self.total_events})")


def validate(dataset: Dataset) -> list[Violation]:
    """Check every row and per-subject invariant; return the violations found."""
    out = []
    ts, te, d = dataset.t_start, dataset.t_end, dataset.delta
    for i in np.flatnonzero(~(np.isfinite(ts) & np.isfinite(te))):
        out.append(Violation(int(i), "non-finite time"))
    for i in np.flatnonzero(np.isfinite(ts) & np.isfinite(te) & ~(ts < te)):
        out.append(Violation(int(i), "t_start < t_end", f"{ts[i]!r} >= {te[i]!r}"))
    for i in np.flatnonzero((d != 0) & (d != 1)):
        out.append(Violation(int(i), "delta in {0,1}", f"delta={int(d[i])}"))
    bad_x = np.isinf(dataset.X).any(axis=1)
    for i in np.flatnonzero(bad_x):
        out.append(Violation(int(i), "covariates finite or missing"))
    if len(dataset) > 1:
        same = dataset.subject[1:] == dataset.subject[:-1]
        overlap = same & (te[:-1] > ts[1:])
        for i in np.flatnonzero(overlap):
            out.append(Violation(int(i + 1), "no overlapping epochs",
                                 f"subject {dataset.subject[i]}: {te[i]!r} > {ts[i + 1]!r}"))
    out.sort(key=lambda v: v.row)
    return out


def _parse_float(cell: str, line: int, col: str) -> float:
    cell = cell.strip()
    if cell == "":
        return MISSING
    try:
        return float(cell)
    except ValueError:
        raise ParseError(f"line {line}, column {col!r}: cannot parse {cell!r} as a number") from None


def load_csv(path, schema: Optional[dict] = None) -> Dataset:
    """Read a dataset from CSV and validate it.

    ``schema`` optionally renames the fixed columns, e.g.
    ``{"subject": "id", "t_start": "start"}``. Every other column except the
    fixed four is a covariate, kept in file order. Empty cells in covariate
    columns are missing values.
    """
    schema = {SUBJECT_COL: SUBJECT_COL, START_COL: START_COL, END_COL: END_COL,
              DELTA_COL: DELTA_COL, **(schema or {})}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file, no header") from None
        missing = [v for v in schema.values() if v not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {missing}; header is {header}")
        fixed = {header.index(schema[k]) for k in (SUBJECT_COL, START_COL, END_COL, DELTA_COL)}
        cov_idx = [j for j in range(len(header)) if j not in fixed]
        i_s, i_a, i_b, i_d = (header.index(schema[k])
                              for k in (SUBJECT_COL, START_COL, END_COL, DELTA_COL))
        subj, ts, te, X, dl = [], [], [], [], []
        for line, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise ParseError(f"line {line}: expected {len(header)} fields, got {len(rec)}")
            subj.append(rec[i_s].strip())
            ts.append(_parse_float(rec[i_a], line, header[i_a]))
            te.append(_parse_float(rec[i_b], line, header[i_b]))
            dv = _parse_float(rec[i_d], line, header[i_d])
            if math.isnan(dv) or dv != int(dv):
                raise ParseError(f"line {line}: delta must be an integer, got {rec[i_d]!r}")
            dl.append(int(dv))
            X.append([_parse_float(rec[j], line, header[j]) for j in cov_idx])
    names = [header[j] for j in cov_idx]
    ds = Dataset(subj, ts, te, np.array(X, dtype=np.float64).reshape(len(subj), len(names)),
                 dl, names)
    violations = validate(ds)
    if violations:
        raise ValidationError(violations)
    return ds


def _fmt(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def write_csv(dataset: Dataset, path) -> None:
    """Write ``dataset`` in the format read by :func:`load_csv` (round-trip exact)."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([SUBJECT_COL, START_COL, END_COL, *dataset.covariate_names, DELTA_COL])
        for i in range(len(dataset)):
            w.writerow([dataset.subject[i], repr(float(dataset.t_start[i])),
                        repr(float(dataset.t_end[i])), *map(_fmt, dataset.X[i]),
                        int(dataset.delta[i])])
