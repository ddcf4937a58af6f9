"""Turn raw epochs into quadrature-free boosting rows.

The pipeline runs once per training set:

1. split every epoch at the candidate time points it straddles, so each
   piece lies inside one time cell ``(t_j, t_{j+1}]``;
2. replace ``t_end`` by the duration ``w = t_end - t_start``;
3. map each covariate value in ``(c_{j-1}, c_j]`` to the code of ``c_{j-1}``;
4. map each start time in ``(t_{j-1}, t_j)`` to the code of ``t_{j-1}``.

After this, integrals of a piecewise-constant log-hazard reduce to sums of
``w * exp(F)`` over rows, indexed by the codes.

Codes per axis: ``0`` is the below-minimum cell, ``j >= 1`` is the cell
whose left boundary is candidate ``j - 1``. Missing covariates get
:data:`missing_code` of the code dtype. A tree split at threshold index
``j`` sends codes ``<= j`` left.
"""
from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import dataclass

import numpy as np

from .data import DataError, Dataset
from .quantiles import CandidateGrid

BELOW_MIN = 0


def code_dtype(grid: CandidateGrid) -> np.dtype:
    """One byte per code when every axis fits (candidates + sentinel + missing)."""
    widest = max(a.size for a in grid.axes)
    return np.dtype(np.uint8) if widest + 2 <= 256 else np.dtype(np.uint16)


def missing_code(dtype) -> int:
    return int(np.iinfo(dtype).max)


@dataclass(frozen=True, eq=False)
class WeightedRows:
    """Split epochs with ``t_end`` replaced by the duration ``w``."""

    subject: np.ndarray
    t_start: np.ndarray
    w: np.ndarray
    X: np.ndarray
    delta: np.ndarray
    covariate_names: tuple = ()

    def __len__(self):
        return self.w.shape[0]


@dataclass(frozen=True, eq=False)
class PreprocessedData:
    """Boosting-ready rows.

    Attributes
    ----------
    subject : ndarray of str
    codes : ndarray, shape (n, p + 1)
        Column 0 is the time code, columns 1..p the covariate codes.
    w : ndarray of float64
        Epoch durations.
    delta : ndarray of int8
    grid : CandidateGrid
    """

    subject: np.ndarray
    codes: np.ndarray
    w: np.ndarray
    delta: np.ndarray
    grid: CandidateGrid
    covariate_names: tuple = ()

    def __len__(self):
        return self.w.shape[0]

    @property
    def t_code(self):
        return self.codes[:, 0]

    @property
    def cov_codes(self):
        return self.codes[:, 1:]

    @property
    def num_covariates(self):
        return self.codes.shape[1] - 1

    @property
    def total_weight(self) -> float:
        return float(self.w.sum())

    @property
    def total_events(self) -> int:
        return int(self.delta.sum())

    @property
    def num_subjects(self) -> int:
        return int(np.unique(self.subject).size)

    @property
    def missing(self) -> int:
        return missing_code(self.codes.dtype)

    def take(self, idx) -> "PreprocessedData":
        return PreprocessedData(self.subject[idx], self.codes[idx], self.w[idx],
                                self.delta[idx], self.grid, self.covariate_names)

    def __eq__(self, other):
        if not isinstance(other, PreprocessedData):
            return NotImplemented
        return (self.grid == other.grid and np.array_equal(self.subject, other.subject)
                and self.codes.dtype == other.codes.dtype
                and np.array_equal(self.codes, other.codes)
                and np.array_equal(self.w, other.w) and np.array_equal(self.delta, other.delta))

    __hash__ = None


def split_epochs(dataset: Dataset, grid: CandidateGrid) -> Dataset:
    """Cut every epoch at each candidate time strictly inside it.

    The event flag stays with the last piece, which ends at the original
    ``t_end``.
    """
    T = grid.time_splits
    ts, te = dataset.t_start, dataset.t_end
    lo = np.searchsorted(T, ts, side="right")
    hi = np.searchsorted(T, te, side="left")
    inner = np.maximum(hi - lo, 0)
    pieces = inner + 1
    n_out = int(pieces.sum())
    src = np.repeat(np.arange(len(dataset)), pieces)
    first = np.concatenate([[0], np.cumsum(pieces)[:-1]]).astype(np.int64)
    k = np.arange(n_out) - np.repeat(first, pieces)  # piece number within its epoch
    last = k == np.repeat(pieces - 1, pieces)

    # piece k spans (b_k, b_{k+1}] with b_0 = t_start, b_k = T[lo + k - 1], b_J = t_end
    cand = np.repeat(lo, pieces) + k
    new_start = np.where(k == 0, ts[src], T[np.clip(cand - 1, 0, max(T.size - 1, 0))]
                         if T.size else ts[src])
    new_end = np.where(last, te[src], T[np.clip(cand, 0, max(T.size - 1, 0))]
                       if T.size else te[src])
    delta = np.where(last, dataset.delta[src], 0)
    return Dataset(dataset.subject[src], new_start, new_end, dataset.X[src], delta,
                   dataset.covariate_names, _presorted=True)


def to_weighted_rows(dataset: Dataset) -> WeightedRows:
    return WeightedRows(dataset.subject, dataset.t_start, dataset.t_end - dataset.t_start,
                        dataset.X, dataset.delta, dataset.covariate_names)


def time_codes(grid: CandidateGrid, t_start) -> np.ndarray:
    """Codes for epoch start times: a start equal to a candidate keeps that candidate."""
    return np.searchsorted(grid.time_splits, t_start, side="right")


def _cov_codes(grid: CandidateGrid, X: np.ndarray, dtype) -> np.ndarray:
    miss = missing_code(dtype)
    out = np.empty(X.shape, dtype=dtype)
    for k, cands in enumerate(grid.cov_splits):
        col = X[:, k]
        nan = np.isnan(col)
        c = np.searchsorted(cands, col, side="left")
        c[nan] = miss
        out[:, k] = c
    return out


def bin_values(rows: WeightedRows, grid: CandidateGrid) -> PreprocessedData:
    """Replace start times and covariates by their cell codes."""
    if rows.X.shape[1] != grid.num_covariates:
        raise DataError(f"rows have {rows.X.shape[1]} covariates, grid has {grid.num_covariates}")
    dtype = code_dtype(grid)
    codes = np.empty((len(rows), grid.num_covariates + 1), dtype=dtype)
    codes[:, 0] = time_codes(grid, rows.t_start)
    codes[:, 1:] = _cov_codes(grid, rows.X, dtype)
    codes.setflags(write=False)
    return PreprocessedData(np.asarray(rows.subject), codes, np.asarray(rows.w, dtype=np.float64),
                            np.asarray(rows.delta, dtype=np.int8), grid,
                            tuple(rows.covariate_names))


def preprocess(dataset: Dataset, grid: CandidateGrid) -> PreprocessedData:
    return bin_values(to_weighted_rows(split_epochs(dataset, grid)), grid)


def remap_query(grid: CandidateGrid, t, X) -> np.ndarray:
    """Cell codes for prediction points ``(t, x)``.

    A query on a candidate ``c_j`` belongs to the cell ``(c_{j-1}, c_j]``,
    on every axis including time. Accepts a single point or a batch.
    """
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(t.size, -1) if t.size > 1 and X.size == t.size * grid.num_covariates \
            else X.reshape(1, -1)
    if X.shape != (t.size, grid.num_covariates):
        raise DataError(f"query covariates have shape {X.shape}, expected "
                        f"({t.size}, {grid.num_covariates})")
    if np.any(np.isnan(t)):
        raise DataError("query time is missing")
    dtype = code_dtype(grid)
    codes = np.empty((t.size, grid.num_covariates + 1), dtype=dtype)
    codes[:, 0] = np.searchsorted(grid.time_splits, t, side="left")
    codes[:, 1:] = _cov_codes(grid, X, dtype)
    return codes


def cell_values(grid: CandidateGrid, axis: int, codes: np.ndarray) -> np.ndarray:
    """Left boundary of each code's cell: ``-inf`` below the minimum, ``nan`` if missing."""
    cands = grid.axis(axis)
    codes = np.asarray(codes).astype(np.int64)
    out = np.full(codes.shape, -np.inf)
    miss = codes == missing_code(code_dtype(grid))
    inside = (codes > 0) & ~miss
    out[inside] = cands[codes[inside] - 1]
    out[miss] = np.nan
    return out


def to_csv(data: PreprocessedData, path) -> None:
    """Human-readable dump: each code shown as its cell's left boundary."""
    g = data.grid
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        names = list(data.covariate_names) or [f"x{k + 1}" for k in range(data.num_covariates)]
        fh.write(",".join(["subject", "t_start", "w", *names, "delta"]) + "\n")
        cols = [cell_values(g, a, data.codes[:, a]) for a in range(data.num_covariates + 1)]
        for i in range(len(data)):
            vals = [_fmt(c[i]) for c in cols]
            fh.write(",".join([str(data.subject[i]), vals[0], repr(float(data.w[i])), *vals[1:],
                               str(int(data.delta[i]))]) + "\n")


def _fmt(v: float) -> str:
    if np.isnan(v):
        return ""
    if np.isneginf(v):
        return "-inf"
    return repr(float(v))


MAGIC = b"HZBPRE\x00\x01"
FORMAT_VERSION = 1


class FormatError(DataError):
    pass


def grid_to_dict(grid: CandidateGrid) -> dict:
    return {
        "mode": grid.mode,
        "max_bins": grid.max_bins,
        "time_splits": [float(v).hex() for v in grid.time_splits],
        "cov_splits": [[float(v).hex() for v in c] for c in grid.cov_splits],
        "support": [[float(a).hex(), float(b).hex()] for a, b in grid.support],
    }


def grid_from_dict(d: dict) -> CandidateGrid:
    fh = float.fromhex
    return CandidateGrid(np.array([fh(v) for v in d["time_splits"]], dtype=np.float64),
                         tuple(np.array([fh(v) for v in c], dtype=np.float64)
                               for c in d["cov_splits"]),
                         d["mode"], int(d["max_bins"]),
                         tuple((fh(a), fh(b)) for a, b in d["support"]))


def save_preprocessed(data: PreprocessedData, path) -> None:
    """Columnar binary: magic, header length, JSON header, column blocks, sha256 trailer."""
    subjects, subj_idx = np.unique(data.subject, return_inverse=True)
    header = {
        "version": FORMAT_VERSION,
        "n_rows": len(data),
        "p": data.num_covariates,
        "code_dtype": data.codes.dtype.str,
        "grid": grid_to_dict(data.grid),
        "subjects": [str(s) for s in subjects],
        "covariate_names": list(data.covariate_names),
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<Q", len(hbytes)))
    buf.write(hbytes)
    buf.write(subj_idx.astype("<u4").tobytes())
    buf.write(np.ascontiguousarray(data.codes.T).astype(data.codes.dtype.newbyteorder("<"))
              .tobytes())
    buf.write(data.w.astype("<f8").tobytes())
    buf.write(np.packbits(data.delta.astype(np.uint8)).tobytes())
    payload = buf.getvalue()
    with open(path, "wb") as fh:
        fh.write(payload)
        fh.write(hashlib.sha256(payload).digest())


def load_preprocessed(path) -> PreprocessedData:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:len(MAGIC) - 1] != MAGIC[:-1]:
        raise FormatError(f"{path}: not a preprocessed data file")
    if raw[len(MAGIC) - 1] != MAGIC[-1]:
        raise FormatError(f"{path}: unsupported format version {raw[len(MAGIC) - 1]}")
    payload, digest = raw[:-32], raw[-32:]
    if len(raw) < len(MAGIC) + 40 or hashlib.sha256(payload).digest() != digest:
        raise FormatError(f"{path}: checksum mismatch (truncated or corrupted file)")
    off = len(MAGIC)
    (hlen,) = struct.unpack_from("<Q", payload, off)
    off += 8
    header = json.loads(payload[off:off + hlen].decode("utf-8"))
    off += hlen
    n, p = header["n_rows"], header["p"]
    dtype = np.dtype(header["code_dtype"])

    def block(dt, count):
        nonlocal off
        arr = np.frombuffer(payload, dtype=dt, count=count, offset=off)
        off += arr.nbytes
        return arr

    subjects = np.array(header["subjects"], dtype=str)
    subj_idx = block("<u4", n)
    codes = block(dtype, n * (p + 1)).reshape(p + 1, n).T.astype(dtype.newbyteorder("="))
    w = block("<f8", n).astype(np.float64)
    delta = np.unpackbits(block(np.uint8, (n + 7) // 8), count=n).astype(np.int8)
    codes = np.ascontiguousarray(codes)
    codes.setflags(write=False)
    return PreprocessedData(subjects[subj_idx] if n else np.array([], dtype=str), codes, w,
                            delta, grid_from_dict(header["grid"]),
                            tuple(header.get("covariate_names", ())))
