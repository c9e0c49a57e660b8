"""AdaBoost.R2 with linear loss over CART regression trees.

Each round trains a tree on the current sample distribution, scores the
normalized absolute errors, and shifts weight toward poorly fit samples. The
ensemble predicts the weighted median of its trees. Trees can see the
distribution either as sample weights (``sampling="weighted"``, deterministic)
or through a seeded weighted bootstrap (``sampling="bootstrap"``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from flexcast.ml._tree import fit_tree, predict_tree, presort
from flexcast.ml.data import fold_indices

NO_DEPTH_LIMIT = -1


@dataclass
class Round:
    """Bookkeeping of one boosting round, kept for inspection and tests."""

    weights_before: np.ndarray
    errors: np.ndarray  # normalized loss per sample
    estimator_error: float
    estimator_weight: float


def boost(X, y, n_estimators, max_depth, sampling="weighted", rng=None, learning_rate=1.0, trace=None, order=None):
    """Fit one target. Returns (list of tree tuples, estimator weights)."""
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if order is None:
        order = presort(X)
    depth = NO_DEPTH_LIMIT if max_depth is None else int(max_depth)
    n = len(y)
    w = np.full(n, 1.0 / n)
    trees = []
    alphas = []
    for r in range(n_estimators):
        if sampling == "bootstrap":
            draw = rng.choice(n, size=n, replace=True, p=w)
            fit_w = np.bincount(draw, minlength=n).astype(float)
        else:
            fit_w = w
        tree = fit_tree(X, y, fit_w, depth, order)
        err = np.abs(predict_tree(*tree, X) - y)
        emax = err.max()
        if emax > 0:
            err = err / emax
        e = float((w * err).sum())
        if e <= 0:
            trees.append(tree)
            alphas.append(1.0)
            if trace is not None:
                trace.append(Round(w.copy(), err, e, 1.0))
            break
        if e >= 0.5:
            if not trees:
                trees.append(tree)
                alphas.append(1.0)
            break
        beta = e / (1.0 - e)
        alpha = learning_rate * np.log(1.0 / beta)
        trees.append(tree)
        alphas.append(alpha)
        if trace is not None:
            trace.append(Round(w.copy(), err, e, alpha))
        if r == n_estimators - 1:
            break
        w = w * beta ** ((1.0 - err) * learning_rate)
        total = w.sum()
        if total <= 0:
            break
        w = w / total
    return trees, np.array(alphas)


@njit(cache=True)
def _sorted_median(values, weights, buf_v, buf_w):
    """Weighted median via a stable insertion sort into the scratch buffers.

    Ensembles hold at most a few hundred members, where insertion sort beats
    a general argsort; ties keep input order, so the result is that of a
    stable sort.
    """
    c = values.shape[0]
    total = 0.0
    for k in range(c):
        v = values[k]
        w = weights[k]
        total += w
        j = k
        while j > 0 and buf_v[j - 1] > v:
            buf_v[j] = buf_v[j - 1]
            buf_w[j] = buf_w[j - 1]
            j -= 1
        buf_v[j] = v
        buf_w[j] = w
    acc = 0.0
    for k in range(c):
        acc += buf_w[k]
        if acc >= 0.5 * total:
            return buf_v[k]
    return buf_v[c - 1]


@njit(cache=True)
def weighted_median(values, weights):
    return _sorted_median(values, weights, np.empty(len(values)), np.empty(len(values)))


@njit(cache=True)
def _descend(links, split, X, r, node):
    f = links[node, 0]
    while f >= 0:
        node = links[node, 1] if X[r, f] > split[node] else node + 1
        f = links[node, 0]
    return node


@njit(cache=True)
def _forest_predict(links, split, roots, alphas, est_start, est_count, X):
    """Weighted-median prediction for every (sample, target).

    Loops run tree-major so a batch of samples shares each tree while it is
    in cache, and four samples descend in lockstep so their loads overlap.
    """
    n = X.shape[0]
    T = est_start.shape[0]
    out = np.empty((n, T))
    width = max(1, est_count.max())
    vals = np.empty((n, width))
    buf_v = np.empty(width)
    buf_w = np.empty(width)
    for t in range(T):
        s0 = est_start[t]
        c = est_count[t]
        for e in range(c):
            root = roots[s0 + e]
            r = 0
            while r + 4 <= n:
                a = b = g = h = root
                fa = fb = fg = fh = links[root, 0]
                while fa >= 0 or fb >= 0 or fg >= 0 or fh >= 0:
                    if fa >= 0:
                        a = links[a, 1] if X[r, fa] > split[a] else a + 1
                        fa = links[a, 0]
                    if fb >= 0:
                        b = links[b, 1] if X[r + 1, fb] > split[b] else b + 1
                        fb = links[b, 0]
                    if fg >= 0:
                        g = links[g, 1] if X[r + 2, fg] > split[g] else g + 1
                        fg = links[g, 0]
                    if fh >= 0:
                        h = links[h, 1] if X[r + 3, fh] > split[h] else h + 1
                        fh = links[h, 0]
                vals[r, e] = split[a]
                vals[r + 1, e] = split[b]
                vals[r + 2, e] = split[g]
                vals[r + 3, e] = split[h]
                r += 4
            for q in range(r, n):
                vals[q, e] = split[_descend(links, split, X, q, root)]
        for r in range(n):
            out[r, t] = _sorted_median(vals[r, :c], alphas[s0 : s0 + c], buf_v, buf_w)
    return out


def pack(per_target) -> dict:
    """Flatten [(trees, alphas) per target] into one compact forest.

    Trees come out of the builder in preorder, so a left child always sits
    right after its parent and only the right link is stored. ``links`` holds
    (feature, right child) per node, feature -1 marking a leaf; ``split``
    holds the threshold of an internal node or the value of a leaf.
    """
    links, split, roots, alphas, starts, counts = [], [], [], [], [], []
    offset = 0
    n_est = 0
    for trees, a in per_target:
        starts.append(n_est)
        counts.append(len(trees))
        for f, th, l, r, v in trees:
            inner = f >= 0
            if np.any(l[inner] != np.flatnonzero(inner) + 1):
                raise ValueError("tree is not in preorder")
            roots.append(offset)
            links.append(np.column_stack([f, np.where(inner, r + offset, -1)]))
            split.append(np.where(inner, th, v))
            offset += len(f)
        alphas.append(a)
        n_est += len(trees)
    links = np.concatenate(links).astype(np.int32)
    if offset >= np.iinfo(np.int32).max:
        raise ValueError("forest too large for 32-bit node links")
    return {
        "links": np.ascontiguousarray(links),
        "split": np.concatenate(split).astype(float),
        "roots": np.array(roots, dtype=np.int64),
        "alphas": np.concatenate(alphas).astype(float),
        "est_start": np.array(starts, dtype=np.int64),
        "est_count": np.array(counts, dtype=np.int64),
    }


def _constant_tree(c: float):
    return (np.array([-1]), np.zeros(1), np.array([-1]), np.array([-1]), np.array([float(c)]))


def fit(X, Y, n_estimators, max_depth, sampling="weighted", seed=0):
    """Fit every column of Y; n_estimators/max_depth may be per-column sequences."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).reshape(len(X), -1)
    T = Y.shape[1]
    n_est = np.broadcast_to(np.asarray(n_estimators), (T,))
    depth = max_depth if isinstance(max_depth, (list, tuple, np.ndarray)) else [max_depth] * T
    rng = np.random.default_rng(seed)
    order = presort(X)
    per_target = []
    for t in range(T):
        y = Y[:, t]
        if np.ptp(y) == 0:
            per_target.append(([_constant_tree(y[0])], np.ones(1)))
            continue
        per_target.append(boost(X, y, int(n_est[t]), depth[t], sampling, rng, order=order))
    return pack(per_target)


def predict(params, X) -> np.ndarray:
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=float)))
    p = params
    return _forest_predict(p["links"], p["split"], p["roots"], p["alphas"], p["est_start"], p["est_count"], X)


def staged_median(trees, alphas, X, stages):
    """Ensemble prediction truncated after each count in ``stages``."""
    preds = np.stack([predict_tree(*tr, X) for tr in trees])  # [E, n]
    out = []
    for s in stages:
        k = min(s, len(trees))
        out.append(np.array([weighted_median(preds[:k, i], alphas[:k]) for i in range(X.shape[0])]))
    return out


def cv_scores(X, Y, grid, folds=5, sampling="weighted", seed=0) -> np.ndarray:
    """Validation MAE per ((n_estimators, max_depth), target).

    Boosting is sequential, so for each depth only the largest ensemble is
    fit and the smaller ones are read off its prefixes.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).reshape(len(X), -1)
    scores = np.zeros((len(grid), Y.shape[1]))
    depths = []
    for _, d in grid:
        if d not in depths:
            depths.append(d)
    for train, val in fold_indices(len(X), folds):
        Xt, Xv = np.ascontiguousarray(X[train]), X[val]
        order = presort(Xt)
        for d in depths:
            members = [(g, ne) for g, (ne, dd) in enumerate(grid) if dd == d]
            n_max = max(ne for _, ne in members)
            rng = np.random.default_rng(seed)
            for t in range(Y.shape[1]):
                y = Y[train, t]
                if np.ptp(y) == 0:
                    err = np.abs(y[0] - Y[val, t]).mean()
                    for g, _ in members:
                        scores[g, t] += err
                    continue
                trees, alphas = boost(Xt, y, n_max, d, sampling, rng, order=order)
                staged = staged_median(trees, alphas, Xv, [ne for _, ne in members])
                for (g, _), pred in zip(members, staged):
                    scores[g, t] += np.abs(pred - Y[val, t]).mean()
    return scores / folds
