"""Weighted CART regression trees (variance-reduction splits), compiled with numba.

A tree is five parallel arrays: feature (-1 marks a leaf), threshold, left,
right, value. Samples with zero weight are ignored, so a bootstrap resample
is expressed as integer multiplicity weights. Callers that grow many trees
on the same X can pass a precomputed ``presort(X)``.
"""

from __future__ import annotations

import numpy as np
from numba import njit


def presort(X) -> np.ndarray:
    """Per-feature stable sort order of the rows of X, shaped [features, rows]."""
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="mergesort").T)


def fit_tree(X, y, w, max_depth, order=None):
    X = np.ascontiguousarray(X, dtype=np.float64)
    if order is None:
        order = presort(X)
    return _fit_sorted(X, np.asarray(y, dtype=np.float64), np.asarray(w, dtype=np.float64), int(max_depth), order)


@njit(cache=True)
def _fit_sorted(X, y, w, max_depth, order):
    # Every node owns the same [start, end) slice of each row of S; row f
    # lists the node's samples sorted by feature f. Splitting stably
    # partitions every row, so no sorting happens below the root.
    n, m = X.shape
    cnt = 0
    for i in range(n):
        if w[i] > 0:
            cnt += 1
    S = np.empty((m, cnt), dtype=np.int64)
    for f in range(m):
        c = 0
        for t in range(n):
            i = order[f, t]
            if w[i] > 0:
                S[f, c] = i
                c += 1
    cap = 2 * cnt + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    tmp = np.empty(cnt, dtype=np.int64)
    goes_left = np.zeros(n, dtype=np.bool_)

    # Nodes are numbered in preorder (a left child directly follows its
    # parent), which keeps root-to-leaf paths close together in memory.
    # stack of (parent, is_right, start, end, depth)
    stack = np.empty((cap, 5), dtype=np.int64)
    sp = 0
    stack[sp, 0] = -1
    stack[sp, 1] = 0
    stack[sp, 2] = 0
    stack[sp, 3] = cnt
    stack[sp, 4] = 0
    sp += 1
    n_nodes = 0
    while sp > 0:
        sp -= 1
        parent = stack[sp, 0]
        start = stack[sp, 2]
        end = stack[sp, 3]
        depth = stack[sp, 4]
        node = n_nodes
        n_nodes += 1
        if parent >= 0:
            if stack[sp, 1] == 1:
                right[parent] = node
            else:
                left[parent] = node
        sw = 0.0
        swy = 0.0
        ymin = np.inf
        ymax = -np.inf
        for t in range(start, end):
            i = S[0, t]
            sw += w[i]
            swy += w[i] * y[i]
            if y[i] < ymin:
                ymin = y[i]
            if y[i] > ymax:
                ymax = y[i]
        # a pure node keeps its target bit-for-bit; w*y/w can be off by an ulp
        if ymax <= ymin:
            value[node] = ymin
        else:
            value[node] = min(max(swy / sw, ymin), ymax) if sw > 0 else 0.0
        if end - start < 2 or ymax <= ymin or (max_depth >= 0 and depth >= max_depth):
            continue

        best_score = -np.inf
        best_f = -1
        best_thr = 0.0
        for f in range(m):
            swl = 0.0
            swyl = 0.0
            for t in range(start, end - 1):
                i = S[f, t]
                swl += w[i]
                swyl += w[i] * y[i]
                a = X[i, f]
                b = X[S[f, t + 1], f]
                if a == b:
                    continue
                swr = sw - swl
                swyr = swy - swyl
                if swl <= 0.0 or swr <= 0.0:
                    continue
                score = swyl * swyl / swl + swyr * swyr / swr
                if score > best_score:
                    best_score = score
                    best_f = f
                    thr = 0.5 * (a + b)
                    if thr >= b:
                        thr = a
                    best_thr = thr
        if best_f < 0:
            continue

        nl = 0
        for t in range(start, end):
            i = S[0, t]
            goes_left[i] = X[i, best_f] <= best_thr
            if goes_left[i]:
                nl += 1
        for f in range(m):
            a = start
            nr = 0
            for t in range(start, end):
                i = S[f, t]
                if goes_left[i]:
                    S[f, a] = i
                    a += 1
                else:
                    tmp[nr] = i
                    nr += 1
            for t in range(nr):
                S[f, a + t] = tmp[t]

        feature[node] = best_f
        threshold[node] = best_thr
        stack[sp, 0] = node
        stack[sp, 1] = 1
        stack[sp, 2] = start + nl
        stack[sp, 3] = end
        stack[sp, 4] = depth + 1
        sp += 1
        stack[sp, 0] = node
        stack[sp, 1] = 0
        stack[sp, 2] = start
        stack[sp, 3] = start + nl
        stack[sp, 4] = depth + 1
        sp += 1
    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
    )


@njit(cache=True)
def predict_tree(feature, threshold, left, right, value, X, root=0):
    out = np.empty(X.shape[0])
    for r in range(X.shape[0]):
        node = root
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = value[node]
    return out
