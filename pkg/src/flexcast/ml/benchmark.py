"""Time-of-day interval means: the reference predictor every learned model must beat."""

from __future__ import annotations

import numpy as np

from flexcast.building import time_of_day_from_features
from flexcast.ml.data import fold_indices


def _slot(minutes, interval_h):
    return (np.asarray(minutes) // (interval_h * 60.0)).astype(int)


def fit(minutes, Y, interval_h):
    """Per-column interval means. ``interval_h`` may be a per-column sequence."""
    minutes = np.asarray(minutes, dtype=float) % 1440.0
    Y = np.asarray(Y, dtype=float).reshape(len(minutes), -1)
    T = Y.shape[1]
    interval_h = np.broadcast_to(np.asarray(interval_h, dtype=float), (T,)).copy()
    n_slots = int(np.ceil(24.0 / interval_h.min()))
    table = np.empty((n_slots, T))
    glob = Y.mean(axis=0)
    for h in np.unique(interval_h):
        cols = np.flatnonzero(interval_h == h)
        slots = _slot(minutes, h)
        for k in range(int(np.ceil(24.0 / h))):
            mask = slots == k
            table[k, cols] = Y[mask][:, cols].mean(axis=0) if mask.any() else glob[cols]
    return {"interval_h": interval_h, "table": table}


def predict_at(params, minutes) -> np.ndarray:
    minutes = np.atleast_1d(np.asarray(minutes, dtype=float)) % 1440.0
    h = params["interval_h"]
    slots = (minutes[:, None] // (h[None, :] * 60.0)).astype(int)
    return np.take_along_axis(params["table"], slots, axis=0)


def predict(params, X) -> np.ndarray:
    """Prediction from feature rows; the time of day is read back from the cyclic encoding."""
    # round to the quarter hour so the atan2 round trip cannot slip across a slot edge
    minutes = np.round(time_of_day_from_features(X) / 15.0) * 15.0
    return predict_at(params, minutes)


def cv_scores(minutes, Y, interval_grid, folds=5) -> np.ndarray:
    minutes = np.asarray(minutes, dtype=float) % 1440.0
    Y = np.asarray(Y, dtype=float).reshape(len(minutes), -1)
    scores = np.zeros((len(interval_grid), Y.shape[1]))
    for train, val in fold_indices(len(minutes), folds):
        for g, h in enumerate(interval_grid):
            params = fit(minutes[train], Y[train], h)
            scores[g] += np.abs(predict_at(params, minutes[val]) - Y[val]).mean(axis=0)
    return scores / folds
