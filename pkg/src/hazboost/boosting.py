"""Boosted log-hazard trees fit by exact minimization of the likelihood risk.

The ensemble is ``F(t, x) = F0 - lr * sum_m g_m(t, x)``. Within a leaf
holding cumulative intensity ``U = sum w * exp(F)`` and event count
``V = sum delta``, the risk contribution ``exp(-g) * U + g * V`` is minimized
by ``g = log(U / V)``. Splitting a leaf changes the risk by

    d = [V_L log(U_L/V_L) + V_R log(U_R/V_R) - V_P log(U_P/V_P)] / n

so every candidate split is scored exactly from prefix sums of per-bin
``(U, V)`` histograms, with no Taylor approximation.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import _kernels as _k
from .preprocess import PreprocessedData, missing_code
from .quantiles import MAX_BINS, RAW, CandidateGrid

logger = logging.getLogger(__name__)

TIME_AXIS = 0


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class BoostConfig:
    max_depth: int = 3
    num_rounds: int = 100
    learning_rate: float = 0.1
    min_child_events: int = 1
    min_child_weight: float = 0.0
    max_bins: int = MAX_BINS
    mode: str = RAW
    seed: int = 0

    def __post_init__(self):
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.num_rounds < 0:
            raise ValueError("num_rounds must be >= 0")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must be in (0, 1]")
        if self.min_child_events < 1:
            raise ValueError("min_child_events must be >= 1")
        if self.min_child_weight < 0:
            raise ValueError("min_child_weight must be >= 0")
        if not 1 <= self.max_bins <= MAX_BINS:
            raise ValueError(f"max_bins must be in [1, {MAX_BINS}]")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SplitCandidate:
    leaf: int
    axis: int
    threshold_idx: int
    missing_left: bool
    U_L: float
    V_L: float
    U_R: float
    V_R: float
    score: float


@dataclass(frozen=True, eq=False)
class Tree:
    """Binary tree stored as parallel node arrays; node 0 is the root.

    Internal nodes send codes ``<= threshold`` on ``axis`` to ``left``;
    missing codes follow ``missing_left``. Leaves have ``axis == -1`` and
    carry ``value``, the log-hazard decrement applied with the learning rate.
    """

    axis: np.ndarray
    threshold: np.ndarray
    missing_left: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    score: np.ndarray
    exposure: np.ndarray
    events: np.ndarray

    @property
    def num_nodes(self) -> int:
        return self.axis.shape[0]

    @property
    def is_leaf(self) -> np.ndarray:
        return self.axis < 0

    @property
    def depth(self) -> int:
        depth = np.zeros(self.num_nodes, dtype=int)
        for i in range(self.num_nodes):
            if self.axis[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, codes: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row of ``codes``."""
        return _k.apply_tree(np.ascontiguousarray(codes), missing_code(codes.dtype),
                             self.axis, self.threshold, self.missing_left, self.left, self.right)

    def predict(self, codes: np.ndarray) -> np.ndarray:
        return self.value[self.apply(codes)]

    def __eq__(self, other):
        if not isinstance(other, Tree):
            return NotImplemented
        return all(np.array_equal(getattr(self, f), getattr(other, f))
                   for f in ("axis", "threshold", "missing_left", "left", "right", "value",
                             "score", "exposure", "events"))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class BoostedModel:
    F0: float
    learning_rate: float
    trees: tuple
    grid: CandidateGrid
    importance_raw: np.ndarray
    config: BoostConfig
    risk_trace: tuple = ()
    n_subjects: int = 0
    stopped_early_at: Optional[int] = None
    meta: dict = field(default_factory=dict)

    @property
    def num_covariates(self) -> int:
        return self.grid.num_covariates

    def log_hazard_codes(self, codes: np.ndarray) -> np.ndarray:
        """``F_M`` at preprocessed/remapped codes."""
        acc = np.zeros(codes.shape[0])
        for tree in self.trees:
            acc += tree.predict(codes)
        return self.F0 - self.learning_rate * acc


# ----------------------------------------------------------------------------
# closed-form pieces

def compute_F0(data: PreprocessedData) -> float:
    """Log of the pooled event rate, the best constant log-hazard."""
    events, weight = data.total_events, data.total_weight
    if not weight > 0:
        raise FitError("no at-risk time: total weight is zero")
    if events == 0:
        raise FitError("no events: hazard MLE is identically zero, F0 undefined")
    return math.log(events / weight)


def leaf_value(U: float, V: float) -> float:
    if not (U > 0 and V > 0):
        raise ValueError(f"leaf value needs U > 0 and V > 0, got U={U}, V={V}")
    return math.log(U / V)


def _vlogratio(U, V):
    with np.errstate(divide="ignore", invalid="ignore"):
        return V * np.log(U / V)


def split_score(U_L: float, V_L: float, U_R: float, V_R: float, n: int) -> float:
    if min(U_L, V_L, U_R, V_R) <= 0:
        raise ValueError("split_score needs all four statistics positive")
    return (V_L * math.log(U_L / V_L) + V_R * math.log(U_R / V_R)
            - (V_L + V_R) * math.log((U_L + U_R) / (V_L + V_R))) / n


def likelihood_risk(data: PreprocessedData, F_values, n: Optional[int] = None) -> float:
    """``(1/n) * sum(w * exp(F) - delta * F)``; ``n`` defaults to the subject count."""
    n = data.num_subjects if n is None else n
    return _risk(data.w, data.delta, np.asarray(F_values, dtype=np.float64), n)


def _risk(w, delta, F, n) -> float:
    return float(np.sum(w * np.exp(F) - delta * F) / n)


# ----------------------------------------------------------------------------
# histograms and split search

@dataclass
class Histograms:
    """Per-axis ``(n_leaves, n_bins + 1)`` sums; the last column is the missing bucket.

    ``U`` sums ``w * exp(F)``, ``V`` sums events, ``W`` sums durations.
    """

    U: list
    V: list
    W: list

    @property
    def num_leaves(self) -> int:
        return self.U[0].shape[0]


def _axis_bins(grid: CandidateGrid) -> list:
    # codes 0..K on an axis with K candidates
    return [a.size + 1 for a in grid.axes]


def accumulate_histograms(data: PreprocessedData, leaf_assignment, F_current,
                          n_leaves: Optional[int] = None) -> Histograms:
    """Bin ``(U, V, W)`` per leaf and axis; rows with a negative leaf are skipped."""
    leaf = np.asarray(leaf_assignment, dtype=np.int64)
    n_leaves = int(leaf.max()) + 1 if n_leaves is None else n_leaves
    u = data.w * np.exp(np.asarray(F_current, dtype=np.float64))
    v = data.delta.astype(np.float64)
    n_bins = _axis_bins(data.grid)
    hc = _hist_codes(data.codes, n_bins)
    H = Histograms([], [], [])
    for a, nb in enumerate(n_bins):
        hu, hv, hw = _k.axis_histogram(hc[a], leaf, u, v, data.w, n_leaves, nb + 1, True)
        H.U.append(hu)
        H.V.append(hv)
        H.W.append(hw)
    return H


def _scan_axis(hu, hv, hw, axis, n, cfg):
    """Best split on one axis for every leaf: (score, threshold, missing_left, UL, VL, UR, VR)."""
    L, nb1 = hu.shape
    K = nb1 - 2  # number of thresholds
    inf = np.full(L, np.inf)
    if K <= 0:
        z = np.zeros(L)
        return inf, np.zeros(L, int), np.ones(L, bool), z, z, z, z
    cu, cv, cw = (np.cumsum(h[:, :-1], axis=1) for h in (hu, hv, hw))
    tu, tv, tw = cu[:, -1:], cv[:, -1:], cw[:, -1:]
    mu, mv, mw = hu[:, -1:], hv[:, -1:], hw[:, -1:]
    UL0, VL0, WL0 = cu[:, :K], cv[:, :K], cw[:, :K]
    UR0, VR0, WR0 = tu - UL0, tv - VL0, tw - WL0
    UP, VP = tu + mu, tv + mv
    dirs = [True] if axis == TIME_AXIS else [True, False]
    # shape (L, K, D): flattening orders by threshold, then LEFT before RIGHT
    UL = np.stack([UL0 + mu if left else UL0 for left in dirs], axis=2)
    VL = np.stack([VL0 + mv if left else VL0 for left in dirs], axis=2)
    WL = np.stack([WL0 + mw if left else WL0 for left in dirs], axis=2)
    UR = np.stack([UR0 if left else UR0 + mu for left in dirs], axis=2)
    VR = np.stack([VR0 if left else VR0 + mv for left in dirs], axis=2)
    WR = np.stack([WR0 if left else WR0 + mw for left in dirs], axis=2)
    valid = ((VL >= cfg.min_child_events) & (VR >= cfg.min_child_events)
             & (UL > 0) & (UR > 0))
    if cfg.min_child_weight > 0:
        valid &= (WL >= cfg.min_child_weight) & (WR >= cfg.min_child_weight)
    parent = _vlogratio(UP, VP)[:, :, None]
    d = (_vlogratio(UL, VL) + _vlogratio(UR, VR) - parent) / n
    d = np.where(valid, d, np.inf).reshape(L, -1)
    best = np.argmin(d, axis=1)
    rows = np.arange(L)
    D = len(dirs)
    j, di = best // D, best % D
    pick = lambda A: A[rows, j, di]
    return (d[rows, best], j, np.array(dirs)[di], pick(UL), pick(VL), pick(UR), pick(VR))


def _best_splits(H: Histograms, n: int, cfg: BoostConfig, pool=None):
    """Vectorized best split per leaf across all axes; ties go to the lowest axis."""
    args = [(H.U[a], H.V[a], H.W[a], a, n, cfg) for a in range(len(H.U))]
    if pool is not None:
        results = list(pool.map(lambda t: _scan_axis(*t), args))
    else:
        results = [_scan_axis(*t) for t in args]
    L = H.num_leaves
    best = {"score": np.full(L, np.inf), "axis": np.full(L, -1), "thr": np.zeros(L, int),
            "mleft": np.ones(L, bool), "UL": np.zeros(L), "VL": np.zeros(L),
            "UR": np.zeros(L), "VR": np.zeros(L)}
    for a, (d, j, ml, UL, VL, UR, VR) in enumerate(results):
        better = d < best["score"]
        for key, val in (("score", d), ("thr", j), ("mleft", ml), ("UL", UL), ("VL", VL),
                         ("UR", UR), ("VR", VR)):
            best[key] = np.where(better, val, best[key])
        best["axis"] = np.where(better, a, best["axis"])
    return best


def best_split(histograms: Histograms, n: int, config: BoostConfig,
               leaf: int = 0) -> Optional[SplitCandidate]:
    """Best legal split of ``leaf``, or ``None`` when no split lowers the risk."""
    b = _best_splits(histograms, n, config)
    if not b["score"][leaf] < 0:
        return None
    return SplitCandidate(leaf, int(b["axis"][leaf]), int(b["thr"][leaf]),
                          bool(b["mleft"][leaf]), float(b["UL"][leaf]), float(b["VL"][leaf]),
                          float(b["UR"][leaf]), float(b["VR"][leaf]), float(b["score"][leaf]))


# ----------------------------------------------------------------------------
# tree growth

def _hist_codes(codes: np.ndarray, n_bins) -> np.ndarray:
    """Axis-major int32 copy of ``codes`` with missing mapped to each axis's last bucket."""
    miss = missing_code(codes.dtype)
    hc = np.ascontiguousarray(codes.T).astype(np.int32)
    for a, nb in enumerate(n_bins):
        hc[a][codes[:, a] == miss] = nb
    return hc


def _grow(hc, w, delta_f, F, n_subjects, n_bins, cfg, pool=None):
    """Level-wise growth on axis-major codes ``hc``.

    Returns the tree and the node index each row ends in.
    """
    m = hc.shape[1]
    u_all = w * np.exp(F)
    nb1 = np.array(n_bins, dtype=np.int64) + 1
    miss_bucket = np.array(n_bins, dtype=np.int64)
    with_w = cfg.min_child_weight > 0
    nodes = {k: [] for k in ("axis", "threshold", "missing_left", "left", "right", "value",
                             "score", "exposure", "events")}

    def new_node():
        for k, default in (("axis", -1), ("threshold", -1), ("missing_left", True),
                           ("left", -1), ("right", -1), ("value", 0.0), ("score", 0.0),
                           ("exposure", 0.0), ("events", 0.0)):
            nodes[k].append(default)
        return len(nodes["axis"]) - 1

    active = [new_node()]
    pos = np.zeros(m, dtype=np.int64)   # slot in `active`, -1 once the row's leaf is final
    row_node = np.zeros(m, dtype=np.int64)

    for level in range(cfg.max_depth + 1):
        L = len(active)
        tot_u, tot_v = _k.leaf_totals(pos, u_all, delta_f, L)
        for i, node in enumerate(active):
            nodes["exposure"][node] = float(tot_u[i])
            nodes["events"][node] = float(tot_v[i])
        if level == cfg.max_depth:
            for i, node in enumerate(active):
                nodes["value"][node] = leaf_value(tot_u[i], tot_v[i])
            break

        def hist(a):
            return _k.axis_histogram(hc[a], pos, u_all, delta_f, w, L, nb1[a], with_w)

        axes = range(len(n_bins))
        parts = list(pool.map(hist, axes)) if pool is not None else [hist(a) for a in axes]
        H = Histograms([p[0] for p in parts], [p[1] for p in parts], [p[2] for p in parts])
        b = _best_splits(H, n_subjects, cfg, pool)

        next_active = []
        new_slot = np.full(L, -1, dtype=np.int64)
        for i, node in enumerate(active):
            if b["score"][i] < 0:
                nodes["axis"][node] = int(b["axis"][i])
                nodes["threshold"][node] = int(b["thr"][i])
                nodes["missing_left"][node] = bool(b["mleft"][i])
                nodes["score"][node] = float(b["score"][i])
                lc, rc = new_node(), new_node()
                nodes["left"][node], nodes["right"][node] = lc, rc
                new_slot[i] = len(next_active)
                next_active += [lc, rc]
            else:
                nodes["value"][node] = leaf_value(tot_u[i], tot_v[i])
        if not next_active:
            break
        _k.route(hc, pos, b["axis"].astype(np.int64),
                 b["thr"].astype(np.int64), b["mleft"].astype(np.bool_), miss_bucket, new_slot,
                 np.array(next_active, dtype=np.int64), row_node)
        active = next_active

    tree = Tree(np.array(nodes["axis"], dtype=np.int32),
                np.array(nodes["threshold"], dtype=np.int32),
                np.array(nodes["missing_left"], dtype=bool),
                np.array(nodes["left"], dtype=np.int32),
                np.array(nodes["right"], dtype=np.int32),
                np.array(nodes["value"], dtype=np.float64),
                np.array(nodes["score"], dtype=np.float64),
                np.array(nodes["exposure"], dtype=np.float64),
                np.array(nodes["events"], dtype=np.float64))
    return tree, row_node


def grow_tree(data: PreprocessedData, F_current, config: BoostConfig,
              n_subjects: Optional[int] = None) -> Tree:
    """Grow one tree against the current per-row log-hazard ``F_current``."""
    n = data.num_subjects if n_subjects is None else n_subjects
    n_bins = _axis_bins(data.grid)
    tree, _ = _grow(_hist_codes(data.codes, n_bins), data.w, data.delta.astype(np.float64),
                    np.asarray(F_current, dtype=np.float64), n, n_bins, config)
    return tree


def compact_rows(codes: np.ndarray, w: np.ndarray, delta: np.ndarray):
    """Merge rows with identical codes, summing durations and events.

    Trees only see codes, so merged rows are interchangeable with the
    originals for every histogram, leaf value and risk.
    """
    if codes.shape[0] == 0:
        return codes, w, delta.astype(np.float64), np.zeros(0, dtype=np.int64)
    c = np.ascontiguousarray(codes)
    key = c.view(np.dtype((np.void, c.dtype.itemsize * c.shape[1]))).ravel()
    _, first, inv = np.unique(key, return_index=True, return_inverse=True)
    inv = inv.ravel()
    m = first.size
    return (c[first], np.bincount(inv, weights=w, minlength=m),
            np.bincount(inv, weights=delta.astype(np.float64), minlength=m), inv)


def fit(data: PreprocessedData, config: Optional[BoostConfig] = None, *, threads: int = 1,
        callback: Optional[Callable] = None, **overrides) -> BoostedModel:
    """Fit ``config.num_rounds`` trees.

    ``callback(m, tree, risk)`` runs after each round; returning ``True``
    stops training. Results do not depend on ``threads``.
    """
    cfg = replace(config or BoostConfig(), **overrides)
    if len(data) == 0:
        raise FitError("empty training data")
    if data.grid.max_bins != cfg.max_bins or data.grid.mode != cfg.mode:
        cfg = replace(cfg, max_bins=data.grid.max_bins, mode=data.grid.mode)
    F0 = compute_F0(data)
    n = data.num_subjects
    codes, w, dl, _ = compact_rows(data.codes, data.w, data.delta)
    F = np.full(codes.shape[0], F0)
    n_bins = _axis_bins(data.grid)
    hc = _hist_codes(codes, n_bins)
    trace = [_risk(w, dl, F, n)]
    trees = []
    importance = np.zeros(len(n_bins))
    stopped = None
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for m in range(cfg.num_rounds):
            tree, row_node = _grow(hc, w, dl, F, n, n_bins, cfg, pool)
            trees.append(tree)
            F = F - cfg.learning_rate * tree.value[row_node]
            trace.append(_risk(w, dl, F, n))
            internal = tree.axis >= 0
            np.add.at(importance, tree.axis[internal], -tree.score[internal])
            if callback is not None and callback(m, tree, trace[-1]):
                stopped = m + 1
                break
            if tree.num_nodes == 1 and cfg.max_depth > 0:
                # constant shifts of F leave every split score unchanged
                stopped = m + 1
                logger.info("no admissible split at round %d; stopping", m)
                break
    finally:
        if pool is not None:
            pool.shutdown()
    meta = {"covariate_names": list(data.covariate_names)} if data.covariate_names else {}
    return BoostedModel(F0, cfg.learning_rate, tuple(trees), data.grid, importance, cfg,
                        tuple(trace), n, stopped, meta)


def variable_importance(model: BoostedModel) -> np.ndarray:
    """Risk reduction per axis (time first), scaled so the largest is 1."""
    raw = np.asarray(model.importance_raw, dtype=np.float64)
    top = raw.max() if raw.size else 0.0
    return raw / top if top > 0 else np.zeros_like(raw)
