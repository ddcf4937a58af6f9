"""Compiled inner loops. All are serial over rows, so sums are reproducible."""
import numpy as np
from numba import njit


@njit(nogil=True, cache=True)
def axis_histogram(hc, pos, u, v, w, n_leaves, nb1, with_w):
    HU = np.zeros((n_leaves, nb1))
    HV = np.zeros((n_leaves, nb1))
    HW = np.zeros((n_leaves, nb1))
    for i in range(hc.shape[0]):
        leaf = pos[i]
        if leaf < 0:
            continue
        b = hc[i]
        HU[leaf, b] += u[i]
        HV[leaf, b] += v[i]
        if with_w:
            HW[leaf, b] += w[i]
    return HU, HV, HW


@njit(nogil=True, cache=True)
def leaf_totals(pos, u, v, n_leaves):
    tu = np.zeros(n_leaves)
    tv = np.zeros(n_leaves)
    for i in range(pos.shape[0]):
        leaf = pos[i]
        if leaf >= 0:
            tu[leaf] += u[i]
            tv[leaf] += v[i]
    return tu, tv


@njit(nogil=True, cache=True)
def route(hc, pos, split_axis, split_thr, split_mleft, miss_bucket, new_slot,
          next_nodes, row_node):
    """Move rows of split leaves to their child slot; rows of finished leaves get -1."""
    for i in range(pos.shape[0]):
        leaf = pos[i]
        if leaf < 0:
            continue
        slot = new_slot[leaf]
        if slot < 0:
            pos[i] = -1
            continue
        ax = split_axis[leaf]
        c = hc[ax, i]
        if c == miss_bucket[ax]:
            left = split_mleft[leaf]
        else:
            left = c <= split_thr[leaf]
        if not left:
            slot += 1
        pos[i] = slot
        row_node[i] = next_nodes[slot]


@njit(nogil=True, cache=True)
def apply_tree(codes, miss, axis, threshold, missing_left, left, right):
    n = codes.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while axis[node] >= 0:
            c = codes[i, axis[node]]
            if c == miss:
                go_left = missing_left[node]
            else:
                go_left = c <= threshold[node]
            node = left[node] if go_left else right[node]
        out[i] = node
    return out
