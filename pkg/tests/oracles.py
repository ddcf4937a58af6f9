"""Slow, independent reference computations used to check the library."""
import math

import numpy as np


def risk(w, delta, F, n):
    """(1/n) * sum(w exp(F) - delta F), summed exactly with fsum."""
    return math.fsum(float(wi) * math.exp(f) - float(di) * f
                     for wi, di, f in zip(w, delta, F)) / n


def goes_left(code, threshold, missing_left, miss):
    if code == miss:
        return bool(missing_left)
    return int(code) <= int(threshold)


def node_rows(tree, codes, miss):
    """Row index lists per node, found by walking split conditions from the root."""
    members = {0: list(range(codes.shape[0]))}
    stack = [0]
    while stack:
        node = stack.pop()
        if tree.axis[node] < 0:
            continue
        ax, thr, ml = int(tree.axis[node]), int(tree.threshold[node]), bool(tree.missing_left[node])
        lrows, rrows = [], []
        for i in members[node]:
            (lrows if goes_left(codes[i, ax], thr, ml, miss) else rrows).append(i)
        members[int(tree.left[node])] = lrows
        members[int(tree.right[node])] = rrows
        stack += [int(tree.left[node]), int(tree.right[node])]
    return members


def uv(rows, w, delta, F):
    U = math.fsum(float(w[i]) * math.exp(F[i]) for i in rows)
    V = math.fsum(float(delta[i]) for i in rows)
    return U, V


def direct_split_gain(rows_l, rows_r, w, delta, F, n):
    """Risk after fitting separate leaf values on each side minus risk of one pooled leaf."""
    rows = rows_l + rows_r
    U, V = uv(rows, w, delta, F)
    g = math.log(U / V)
    before = risk([w[i] for i in rows], [delta[i] for i in rows], [F[i] - g for i in rows], n)
    after_terms = []
    for side in (rows_l, rows_r):
        Us, Vs = uv(side, w, delta, F)
        gs = math.log(Us / Vs)
        after_terms.append(risk([w[i] for i in side], [delta[i] for i in side],
                                [F[i] - gs for i in side], n))
    return math.fsum(after_terms) - before


def brute_force_best(rows, codes, w, delta, F, n, n_cands, miss, min_events=1):
    """Exhaustive search over axis, threshold and missing direction; returns best gain."""
    best = math.inf
    for ax, K in enumerate(n_cands):
        for thr in range(K):
            for ml in ((True,) if ax == 0 else (True, False)):
                L = [i for i in rows if goes_left(codes[i, ax], thr, ml, miss)]
                R = [i for i in rows if not goes_left(codes[i, ax], thr, ml, miss)]
                UL, VL = uv(L, w, delta, F)
                UR, VR = uv(R, w, delta, F)
                if VL < min_events or VR < min_events or UL <= 0 or UR <= 0:
                    continue
                best = min(best, direct_split_gain(L, R, w, delta, F, n))
    return best


def censored_histograms(T, delta, x, F0, time_cands, x_cands):
    """Per-cell (U, V) for right-censored data with fixed covariates, one row per subject.

    Cell j on an axis is (c_{j-1}, c_j], with cell 0 below the first candidate
    and the last cell above the largest.
    """
    edges = np.concatenate([[-np.inf], time_cands, [np.inf]])
    Ut = np.zeros(len(time_cands) + 1)
    Vt = np.zeros(len(time_cands) + 1)
    Ux = np.zeros(len(x_cands) + 1)
    Vx = np.zeros(len(x_cands) + 1)
    for Ti, di, xi in zip(T, delta, x):
        for j in range(len(edges) - 1):
            lo, hi = max(edges[j], 0.0), min(edges[j + 1], Ti)
            if hi > lo:
                Ut[j] += (hi - lo) * math.exp(F0)
            if edges[j] < Ti <= edges[j + 1]:
                Vt[j] += di
        k = int(sum(c < xi for c in x_cands))
        Ux[k] += Ti * math.exp(F0)
        Vx[k] += di
    return (Ut, Vt), (Ux, Vx)
