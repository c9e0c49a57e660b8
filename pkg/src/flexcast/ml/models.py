"""Envelope predictors: one regressor per (lead time, power level) cell.

Hyperparameters are tuned per power level by 5-fold time-blocked CV,
pooling the validation MAE over that level's lead times. Expensive families
can restrict tuning to every ``lead_stride``-th lead time.
"""

from __future__ import annotations

import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from flexcast.envelope import FlexibilityEnvelope, LeadTimeGrid, PowerGrid
from flexcast.io import atomic_write_bytes
from flexcast.ml import adaboost, benchmark, knn, lasso, svr
from flexcast.ml.data import Dataset, DatasetError, fold_sizes

FORMAT_VERSION = 1
KINDS = ("benchmark", "lasso", "knn", "svr", "adaboost")

# Grids are listed from the simplest to the most complex member, so the
# first minimum wins ties in favour of simplicity.
LASSO_GRID = (1.0, 0.8, 0.6, 0.4, 0.2)
KNN_GRID = (160, 140, 120, 100, 80, 60, 40, 20)
SVR_GRID = (0.1, 0.2, 0.5, 1.0, 2.0, 5.0)
ADABOOST_ESTIMATORS = (20, 50, 100)
ADABOOST_DEPTHS = (3, 5, None)
BENCHMARK_GRID = (8.0, 4.0, 2.0, 1.0, 0.5, 0.25)


class ModelError(ValueError):
    pass


class SchemaVersionError(ModelError):
    pass


class GridMismatch(ModelError):
    pass


@dataclass
class TrainedModel:
    kind: str
    power_grid: PowerGrid
    lead_grid: LeadTimeGrid
    n_features: int
    grid: list  # candidate hyperparameters, simplest first
    chosen: list  # selected member per power level
    params: dict[str, np.ndarray]
    cv_mae: np.ndarray | None = None  # [grid member, power level]
    info: dict = field(default_factory=dict)

    @property
    def n_targets(self) -> int:
        return self.lead_grid.size * self.power_grid.size


def _per_target(chosen: list, n_leads: int) -> list:
    """Expand per-level choices to the flattened [lead, power] target order."""
    return list(chosen) * n_leads


def _tune_per_level(scores: np.ndarray, grid: list, n_leads_used: int, n_levels: int):
    per_level = scores.reshape(len(grid), n_leads_used, n_levels).mean(axis=1)
    best = np.argmin(per_level, axis=0)
    return [grid[g] for g in best], per_level


def _lead_subset(d: Dataset, lead_stride: int):
    leads = np.arange(0, d.lead_grid.size, max(1, lead_stride))
    return leads, d.targets[:, leads, :].reshape(len(d), -1)


def _check(d: Dataset, min_n: int = 10, folds: int = 5):
    if len(d) == 0:
        raise DatasetError("empty dataset")
    if len(d) < min_n:
        raise DatasetError(f"need at least {min_n} samples, got {len(d)}")
    fold_sizes(len(d), folds)


def _ordered(d: Dataset) -> Dataset:
    return d.subset(np.argsort(d.timestamps, kind="stable"))


def fit_lasso(d: Dataset, gamma_grid=LASSO_GRID, folds: int = 5) -> TrainedModel:
    _check(d, 10, folds)
    d = _ordered(d)
    grid = sorted(gamma_grid, reverse=True)
    Y = d.flat_targets
    scores = _cv_generic(lasso.fit, lasso.predict, d.features, Y, grid, folds)
    chosen, per_level = _tune_per_level(scores, grid, d.lead_grid.size, d.power_grid.size)
    params = lasso.fit(d.features, Y, np.array(_per_target(chosen, d.lead_grid.size)))
    return TrainedModel("lasso", d.power_grid, d.lead_grid, d.features.shape[1], grid, chosen, params, per_level)


def _cv_generic(fit, predict, X, Y, grid, folds):
    from flexcast.ml.data import cv_scores

    return cv_scores(fit, predict, X, Y, grid, folds)


def fit_knn(d: Dataset, k_grid=KNN_GRID, folds: int = 5, weighting: str = "uniform") -> TrainedModel:
    _check(d, 2, folds)
    d = _ordered(d)
    train_size = len(d) - max(fold_sizes(len(d), folds))
    if max(k_grid) > train_size:
        raise DatasetError(f"k up to {max(k_grid)} needs more than {train_size} training samples per fold")
    grid = sorted(k_grid, reverse=True)
    Y = d.flat_targets
    scores = knn.cv_scores(d.features, Y, grid, folds)
    chosen, per_level = _tune_per_level(scores, grid, d.lead_grid.size, d.power_grid.size)
    params = knn.fit(d.features, Y, np.array(_per_target(chosen, d.lead_grid.size)), weighting)
    return TrainedModel("knn", d.power_grid, d.lead_grid, d.features.shape[1], grid, chosen, params, per_level)


def fit_svr(d: Dataset, c_grid=SVR_GRID, folds: int = 5, lead_stride: int = 1) -> TrainedModel:
    _check(d, 10, folds)
    d = _ordered(d)
    grid = sorted(c_grid)
    leads, Ysub = _lead_subset(d, lead_stride)
    scores = svr.cv_scores(d.features, Ysub, grid, folds)
    chosen, per_level = _tune_per_level(scores, grid, len(leads), d.power_grid.size)
    params = svr.fit(d.features, d.flat_targets, np.array(_per_target(chosen, d.lead_grid.size)))
    return TrainedModel("svr", d.power_grid, d.lead_grid, d.features.shape[1], grid, chosen, params, per_level,
                        {"lead_stride": lead_stride})


def adaboost_grid(n_grid=ADABOOST_ESTIMATORS, depth_grid=ADABOOST_DEPTHS) -> list:
    depth_key = lambda x: np.inf if x is None else x  # noqa: E731
    return [(n, dep) for dep in sorted(depth_grid, key=depth_key) for n in sorted(n_grid)]


def fit_adaboost(
    d: Dataset,
    n_grid=ADABOOST_ESTIMATORS,
    depth_grid=ADABOOST_DEPTHS,
    folds: int = 5,
    lead_stride: int = 1,
    sampling: str = "weighted",
    seed: int = 0,
) -> TrainedModel:
    _check(d, 10, folds)
    d = _ordered(d)
    grid = adaboost_grid(n_grid, depth_grid)
    leads, Ysub = _lead_subset(d, lead_stride)
    scores = adaboost.cv_scores(d.features, Ysub, grid, folds, sampling, seed)
    chosen, per_level = _tune_per_level(scores, grid, len(leads), d.power_grid.size)
    per_t = _per_target(chosen, d.lead_grid.size)
    params = adaboost.fit(d.features, d.flat_targets, [c[0] for c in per_t], [c[1] for c in per_t], sampling, seed)
    return TrainedModel("adaboost", d.power_grid, d.lead_grid, d.features.shape[1], grid, chosen, params, per_level,
                        {"lead_stride": lead_stride, "sampling": sampling, "seed": seed})


def fit_benchmark(d: Dataset, interval_grid=BENCHMARK_GRID, folds: int = 5) -> TrainedModel:
    _check(d, 1, folds)
    d = _ordered(d)
    grid = sorted(interval_grid, reverse=True)
    minutes = d.timestamps % 1440.0
    Y = d.flat_targets
    scores = benchmark.cv_scores(minutes, Y, grid, folds)
    chosen, per_level = _tune_per_level(scores, grid, d.lead_grid.size, d.power_grid.size)
    params = benchmark.fit(minutes, Y, np.array(_per_target(chosen, d.lead_grid.size)))
    return TrainedModel("benchmark", d.power_grid, d.lead_grid, d.features.shape[1], grid, chosen, params, per_level)


FITTERS = {
    "benchmark": fit_benchmark,
    "lasso": fit_lasso,
    "knn": fit_knn,
    "svr": fit_svr,
    "adaboost": fit_adaboost,
}
PREDICTORS = {
    "benchmark": benchmark.predict,
    "lasso": lasso.predict,
    "knn": knn.predict,
    "svr": svr.predict,
    "adaboost": adaboost.predict,
}


def predict_raw(m: TrainedModel, F) -> np.ndarray:
    """Unclamped predictions shaped [n, lead, power]."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if F.shape[1] != m.n_features:
        raise ModelError(f"model expects {m.n_features} features, got {F.shape[1]}")
    out = PREDICTORS[m.kind](m.params, F)
    return np.asarray(out).reshape(len(F), m.lead_grid.size, m.power_grid.size)


def clamp_durations(D: np.ndarray, lead_grid: LeadTimeGrid) -> np.ndarray:
    return np.clip(D, 0.0, lead_grid.remaining()[:, None])


def predict_many(m: TrainedModel, F) -> np.ndarray:
    return clamp_durations(predict_raw(m, F), m.lead_grid)


def predict(m: TrainedModel, f, timestamp: float = 0.0) -> FlexibilityEnvelope:
    f = np.asarray(f, dtype=float)
    if f.ndim != 1:
        raise ModelError("predict takes a single feature vector; use predict_many for batches")
    return FlexibilityEnvelope(m.power_grid, m.lead_grid, predict_many(m, f[None])[0], timestamp)


def timed_predict(m: TrainedModel, F) -> tuple[np.ndarray, np.ndarray]:
    """Predict one envelope at a time, returning durations and per-envelope seconds."""
    F = np.atleast_2d(F)
    out, secs = [], []
    for f in F:
        t = time.perf_counter()
        out.append(predict(m, f).durations)
        secs.append(time.perf_counter() - t)
    return np.stack(out), np.array(secs)


# --- artifact container ---------------------------------------------------


def _jsonable(x):
    if isinstance(x, tuple):
        return list(x)
    if isinstance(x, np.generic):
        return x.item()
    return x


def save_model(m: TrainedModel, path) -> None:
    header = {
        "format": "flexcast-model",
        "format_version": FORMAT_VERSION,
        "kind": m.kind,
        "power_grid": [m.power_grid.p_min, m.power_grid.p_max, m.power_grid.step],
        "lead_offsets": list(m.lead_grid.offsets),
        "horizon": m.lead_grid.horizon,
        "n_features": m.n_features,
        "grid": [_jsonable(g) for g in m.grid],
        "chosen": [_jsonable(c) for c in m.chosen],
        "info": m.info,
        "params": sorted(m.params),
    }
    arrays = {f"p_{k}": np.asarray(v) for k, v in m.params.items()}
    if m.cv_mae is not None:
        arrays["cv_mae"] = m.cv_mae
    buf = io.BytesIO()
    np.savez_compressed(buf, header=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8), **arrays)
    atomic_write_bytes(Path(path), buf.getvalue())


def load_model(path) -> TrainedModel:
    with np.load(Path(path), allow_pickle=False) as z:
        if "header" not in z:
            raise ModelError(f"{path} is not a flexcast model artifact")
        header = json.loads(z["header"].tobytes().decode())
        if header.get("format") != "flexcast-model":
            raise ModelError(f"{path} is not a flexcast model artifact")
        if header.get("format_version") != FORMAT_VERSION:
            raise SchemaVersionError(f"model format version {header.get('format_version')} != {FORMAT_VERSION}")
        params = {k: z[f"p_{k}"] for k in header["params"]}
        cv = z["cv_mae"] if "cv_mae" in z else None
    tup = lambda g: tuple(g) if isinstance(g, list) else g  # noqa: E731
    return TrainedModel(
        kind=header["kind"],
        power_grid=PowerGrid(*header["power_grid"]),
        lead_grid=LeadTimeGrid(tuple(header["lead_offsets"]), header["horizon"]),
        n_features=header["n_features"],
        grid=[tup(g) for g in header["grid"]],
        chosen=[tup(c) for c in header["chosen"]],
        params=params,
        cv_mae=cv,
        info=header["info"],
    )
