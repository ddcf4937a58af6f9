"""Ground-truth survival data from known hazards.

Covariate paths are piecewise constant on an equal-length update schedule,
with i.i.d. U(0,1] values per update interval. Each interval is at risk with
probability ``1 - p_drop``; dropped intervals leave gaps in the output.
Events follow the intensity ``hazard(t, X(t)) * Y(t)`` and are drawn by
thinning a homogeneous Poisson process whose rate bounds the hazard.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy import stats
from scipy.special import ndtr

from .data import Dataset

HORIZONS = {1: 1.0, 2: 1.0, 3: 5.0, 4: 5.0}


def _beta_pdf(u, a):
    return stats.beta.pdf(u, a, a)


def true_hazard(hazard_id: int, t, x, rate: float = 1.0) -> np.ndarray:
    """Hazard ``hazard_id`` in {1, 2, 3, 4} at time ``t`` and covariate ``x``.

    ``hazard_id == 0`` is the constant hazard ``rate``, used for law checks.
    """
    t = np.asarray(t, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if hazard_id == 0:
        return np.broadcast_to(np.float64(rate), np.broadcast(t, x).shape).copy()
    if hazard_id not in HORIZONS:
        raise ValueError(f"unknown hazard id {hazard_id}")
    H = HORIZONS[hazard_id]
    if np.any((t <= 0) | (t > H)):
        raise ValueError(f"t outside the domain (0, {H}] of hazard {hazard_id}")
    if hazard_id == 1:
        return _beta_pdf(t, 2) * _beta_pdf(x, 2)
    if hazard_id == 2:
        return _beta_pdf(t, 4) * _beta_pdf(x, 4)
    if hazard_id == 3:
        z = np.log(t) - x
        return stats.norm.pdf(z) / (t * ndtr(-z))
    return 1.5 * np.sqrt(t) * np.exp(-0.5 * np.cos(2 * np.pi * x) - 1.5)


def hazard_bound(hazard_id: int, horizon: float, rate: float = 1.0, safety: float = 1.2) -> float:
    """Dominating rate for thinning: dense-grid maximum times ``safety``.

    Checked against a finer offset grid; raises if the bound is violated.
    """
    if hazard_id == 0:
        return float(rate)
    tt = np.linspace(0, horizon, 2001)[1:]
    xx = np.linspace(0, 1, 401)[1:]
    bound = float(true_hazard(hazard_id, tt[:, None], xx[None, :]).max()) * safety
    t2 = np.linspace(0, horizon, 6007)[1:]
    x2 = np.linspace(0, 1, 1203)[1:]
    check = float(true_hazard(hazard_id, t2[:, None], x2[None, :]).max())
    if check > bound:
        raise RuntimeError(f"thinning bound {bound} exceeded ({check}) for hazard {hazard_id}")
    return bound


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    ``n_max=None`` allows unlimited recurrences. ``rate`` applies only to
    the constant test hazard ``hazard_id=0``.
    """

    hazard_id: int = 1
    num_subjects: int = 5000
    num_irrelevant: int = 0
    p_drop: float = 0.0
    recurring: bool = False
    n_max: Optional[int] = None
    num_epochs: int = 20
    horizon: Optional[float] = None
    seed: int = 0
    rate: float = 1.0

    def __post_init__(self):
        if self.hazard_id not in (0, *HORIZONS):
            raise ValueError(f"unknown hazard id {self.hazard_id}")
        if self.horizon is None:
            object.__setattr__(self, "horizon", HORIZONS.get(self.hazard_id, 1.0))
        elif self.hazard_id in HORIZONS and self.horizon > HORIZONS[self.hazard_id]:
            raise ValueError(f"horizon {self.horizon} exceeds the domain of hazard "
                             f"{self.hazard_id}")
        if not 0 <= self.p_drop < 1:
            raise ValueError("p_drop must be in [0, 1)")
        if self.num_epochs < 1 or self.num_subjects < 0:
            raise ValueError("num_epochs must be >= 1 and num_subjects >= 0")
        if self.n_max is not None and self.n_max < 1:
            raise ValueError("n_max must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


class TrueHazard:
    """Oracle evaluating the generating hazard on the first covariate."""

    def __init__(self, hazard_id: int, rate: float = 1.0):
        self.hazard_id = hazard_id
        self.rate = rate

    def __call__(self, t, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        x = X[..., 0] if X.ndim > 1 else X
        return true_hazard(self.hazard_id, t, x, self.rate)


def _uniform_01(rng, size):
    return 1.0 - rng.random(size)  # (0, 1]


def simulate_subject(config: SimConfig, rng: np.random.Generator, bound: Optional[float] = None,
                     subject_id: str = "0"):
    """Epoch rows ``(subject, t_start, t_end, x..., delta)`` for one subject."""
    H, E = float(config.horizon), config.num_epochs
    bound = hazard_bound(config.hazard_id, H, config.rate) if bound is None else bound
    edges = np.linspace(0.0, H, E + 1)
    at_risk = rng.random(E) >= config.p_drop
    X = _uniform_01(rng, (E, 1 + config.num_irrelevant))

    # candidate points of a rate-`bound` Poisson process on (0, H]
    n_cand = rng.poisson(bound * H)
    cand = np.sort(H * _uniform_01(rng, n_cand))
    accept_u = rng.random(n_cand)
    ep = np.minimum(np.searchsorted(edges, cand, side="left") - 1, E - 1)
    ep = np.maximum(ep, 0)
    lam = true_hazard(config.hazard_id, cand, X[ep, 0], config.rate) if n_cand else cand
    events = cand[(accept_u * bound < lam) & at_risk[ep]]
    limit = 1 if not config.recurring else (config.n_max or math.inf)
    if events.size > limit:
        events = events[:int(limit)]
    stop = events[-1] if (events.size and events.size >= limit) else H

    rows = []
    ev_i = 0
    for e in range(E):
        a, b = edges[e], edges[e + 1]
        if a >= stop:
            break
        b = min(b, stop)
        if not at_risk[e]:
            continue
        start = a
        while ev_i < events.size and events[ev_i] <= b:
            rows.append((subject_id, start, float(events[ev_i]), X[e], 1))
            start = float(events[ev_i])
            ev_i += 1
        if start < b:
            rows.append((subject_id, start, b, X[e], 0))
    return rows


def simulate_dataset(config: SimConfig):
    """Simulate ``config.num_subjects`` independent histories.

    Returns ``(dataset, oracle)``. Subject ``i`` draws from its own stream
    seeded by ``(seed, i)``, so the output does not depend on scheduling.
    """
    bound = hazard_bound(config.hazard_id, float(config.horizon), config.rate)
    width = max(1, len(str(max(config.num_subjects - 1, 0))))
    rows = []
    for i in range(config.num_subjects):
        rng = np.random.default_rng([config.seed, i])
        rows.extend(simulate_subject(config, rng, bound, f"s{i:0{width}d}"))
    p = 1 + config.num_irrelevant
    names = ["x1"] + [f"noise{j + 1}" for j in range(config.num_irrelevant)]
    if rows:
        subj, ts, te, X, dl = zip(*rows)
        X = np.vstack(X)
    else:
        subj, ts, te, X, dl = [], [], [], np.zeros((0, p)), []
    ds = Dataset(subj, ts, te, X, dl, names)
    return ds, TrueHazard(config.hazard_id, config.rate)
