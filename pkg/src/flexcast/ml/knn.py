"""k-nearest-neighbour regression with Euclidean distance on standardized features."""

from __future__ import annotations

import numpy as np

from flexcast.ml.data import Standardizer, fold_indices


def _neighbour_order(train_s: np.ndarray, query_s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = ((query_s[:, None, :] - train_s[None, :, :]) ** 2).sum(axis=2)
    order = np.argsort(d2, axis=1, kind="stable")
    return order, np.take_along_axis(d2, order, axis=1)


def fit(X, Y, k, weighting: str = "uniform"):
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).reshape(len(X), -1)
    k = np.broadcast_to(np.asarray(k, dtype=int), (Y.shape[1],)).copy()
    if np.any(k > len(X)) or np.any(k < 1):
        raise ValueError(f"k must lie in [1, {len(X)}]")
    std = Standardizer.fit(X)
    return {"means": std.means, "stds": std.stds, "train": std.transform(X), "targets": Y, "k": k,
            "distance_weighted": np.array(weighting == "distance")}


def predict(params, X) -> np.ndarray:
    Xs = (np.asarray(X, dtype=float) - params["means"]) / params["stds"]
    order, d2 = _neighbour_order(params["train"], Xs)
    Y = params["targets"]
    k = params["k"]
    out = np.empty((len(Xs), Y.shape[1]))
    for kk in np.unique(k):
        cols = np.flatnonzero(k == kk)
        nb = Y[order[:, :kk]][:, :, cols]  # [q, k, cols]
        if params["distance_weighted"]:
            w = 1.0 / np.maximum(np.sqrt(d2[:, :kk]), 1e-12)
            out[:, cols] = (nb * w[:, :, None]).sum(axis=1) / w.sum(axis=1)[:, None]
        else:
            out[:, cols] = nb.mean(axis=1)
    return out


def cv_scores(X, Y, k_grid, folds: int = 5) -> np.ndarray:
    """Validation MAE for every k at once: neighbours are sorted once per fold."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).reshape(len(X), -1)
    scores = np.zeros((len(k_grid), Y.shape[1]))
    for train, val in fold_indices(len(X), folds):
        std = Standardizer.fit(X[train])
        order, _ = _neighbour_order(std.transform(X[train]), std.transform(X[val]))
        kmax = min(max(k_grid), len(train))
        csum = np.cumsum(Y[train][order[:, :kmax]], axis=1)  # [v, kmax, T]
        for g, k in enumerate(k_grid):
            kk = min(k, len(train))
            pred = csum[:, kk - 1, :] / kk
            scores[g] += np.abs(pred - Y[val]).mean(axis=0)
    return scores / folds
