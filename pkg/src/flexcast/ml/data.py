"""Datasets, feature standardization and time-ordered cross-validation."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from flexcast.envelope import FlexibilityEnvelope, LeadTimeGrid, PowerGrid, envelope_from_csv, envelope_to_csv
from flexcast.io import atomic_write_text

log = logging.getLogger(__name__)


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray
    degenerate: np.ndarray  # features whose variance was zero (std forced to 1)

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        means = X.mean(axis=0)
        stds = X.std(axis=0)
        degenerate = ~(stds > 1e-12 * np.maximum(1.0, np.abs(means)))
        if degenerate.any():
            log.debug("zero-variance features: %s", np.flatnonzero(degenerate).tolist())
        stds = np.where(degenerate, 1.0, stds)
        return cls(means, stds, degenerate)

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.means) / self.stds


@dataclass
class Dataset:
    features: np.ndarray  # [n, m]
    targets: np.ndarray  # [n, lead, power] durations in minutes
    timestamps: np.ndarray  # [n] minutes since scenario start
    power_grid: PowerGrid
    lead_grid: LeadTimeGrid

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.targets = np.asarray(self.targets, dtype=float)
        self.timestamps = np.asarray(self.timestamps, dtype=float)
        n = len(self.features)
        if self.targets.shape != (n, self.lead_grid.size, self.power_grid.size):
            raise DatasetError(f"targets shape {self.targets.shape} does not match {n} samples on the grid")
        if len(self.timestamps) != n:
            raise DatasetError("timestamps length differs from the sample count")
        if not (np.all(np.isfinite(self.features)) and np.all(np.isfinite(self.targets))):
            raise DatasetError("dataset contains missing or non-finite values")

    def __len__(self) -> int:
        return len(self.features)

    @property
    def flat_targets(self) -> np.ndarray:
        return self.targets.reshape(len(self), -1)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.features[idx], self.targets[idx], self.timestamps[idx], self.power_grid, self.lead_grid)

    def envelopes(self) -> list[FlexibilityEnvelope]:
        return [
            FlexibilityEnvelope(self.power_grid, self.lead_grid, self.targets[i], self.timestamps[i])
            for i in range(len(self))
        ]

    @classmethod
    def from_envelopes(cls, features, envelopes: Sequence[FlexibilityEnvelope]) -> "Dataset":
        if not envelopes:
            raise DatasetError("no envelopes")
        e0 = envelopes[0]
        return cls(
            np.asarray(features, dtype=float),
            np.stack([e.durations for e in envelopes]),
            np.array([e.timestamp for e in envelopes], dtype=float),
            e0.power_grid,
            e0.lead_grid,
        )

    def split_last(self, n_test: int) -> tuple["Dataset", "Dataset"]:
        """Chronological split: the final ``n_test`` samples form the test set."""
        order = np.argsort(self.timestamps, kind="stable")
        return self.subset(order[:-n_test]), self.subset(order[-n_test:])


# --- on-disk bundle: features.csv + envelopes/NNNN.csv --------------------


def write_dataset(d: Dataset, root, feature_names: Sequence[str] | None = None) -> None:
    root = Path(root)
    names = list(feature_names) if feature_names else [f"f{j}" for j in range(d.features.shape[1])]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "timestamp_min", *names])
    for i in range(len(d)):
        w.writerow([i, repr(float(d.timestamps[i])), *(repr(float(x)) for x in d.features[i])])
    atomic_write_text(root / "features.csv", buf.getvalue())
    for i, env in enumerate(d.envelopes()):
        atomic_write_text(root / "envelopes" / f"{i:05d}.csv", envelope_to_csv(env))


def read_dataset(root, horizon: int = 1440) -> tuple[Dataset, list[str]]:
    root = Path(root)
    path = root / "features.csv"
    if not path.exists():
        raise FileNotFoundError(path)
    rows = list(csv.reader(path.read_text().splitlines()))
    names = rows[0][2:]
    body = np.array(rows[1:], dtype=float)
    envs = []
    for i in body[:, 0].astype(int):
        env = envelope_from_csv((root / "envelopes" / f"{i:05d}.csv").read_text(), horizon=horizon)
        envs.append(env)
    targets = np.stack([e.durations for e in envs])
    return Dataset(body[:, 2:], targets, body[:, 1], envs[0].power_grid, envs[0].lead_grid), names


# --- cross-validation -----------------------------------------------------


def fold_sizes(n: int, folds: int = 5) -> list[int]:
    """Contiguous fold sizes; the first ``n % folds`` folds get one extra sample."""
    if folds < 2:
        raise DatasetError("need at least two folds")
    if n < folds:
        raise DatasetError(f"{n} samples cannot be split into {folds} folds")
    base, extra = divmod(n, folds)
    return [base + 1 if i < extra else base for i in range(folds)]


def fold_indices(n: int, folds: int = 5):
    """Yield (train, validation) index arrays over contiguous time blocks."""
    start = 0
    all_idx = np.arange(n)
    for size in fold_sizes(n, folds):
        val = all_idx[start : start + size]
        train = np.concatenate((all_idx[:start], all_idx[start + size :]))
        yield train, val
        start += size


def cv_scores(
    fit: Callable,
    predict: Callable,
    X: np.ndarray,
    Y: np.ndarray,
    grid: Sequence,
    folds: int = 5,
) -> np.ndarray:
    """Mean validation MAE per (grid member, target column).

    ``fit(X, Y, params)`` returns a model and ``predict(model, X)`` a
    prediction shaped like ``Y``. Samples must be in time order.
    """
    Y = np.asarray(Y, dtype=float).reshape(len(X), -1)
    scores = np.zeros((len(grid), Y.shape[1]))
    for train, val in fold_indices(len(X), folds):
        for g, params in enumerate(grid):
            model = fit(X[train], Y[train], params)
            pred = np.asarray(predict(model, X[val])).reshape(len(val), -1)
            scores[g] += np.abs(pred - Y[val]).mean(axis=0)
    return scores / folds


def select(scores: np.ndarray, grid: Sequence):
    """Grid member with the lowest mean score; ties go to the earlier member.

    Grids are ordered from least to most complex, so ties resolve to the
    simpler model.
    """
    mean = np.asarray(scores).reshape(len(grid), -1).mean(axis=1)
    return grid[int(np.argmin(mean))]


def grid_search_cv(fit: Callable, predict: Callable, X, Y, grid: Sequence, folds: int = 5):
    if len(grid) == 0:
        raise DatasetError("empty hyperparameter grid")
    if len(grid) == 1:
        fold_sizes(len(X), folds)
        return grid[0]
    return select(cv_scores(fit, predict, X, Y, grid, folds), grid)
