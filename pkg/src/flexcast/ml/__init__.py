"""Regression models that replace repeated envelope quantification."""

from flexcast.ml.data import Dataset, Standardizer, fold_indices, fold_sizes, grid_search_cv
from flexcast.ml.models import (
    TrainedModel,
    fit_adaboost,
    fit_benchmark,
    fit_knn,
    fit_lasso,
    fit_svr,
    load_model,
    predict,
    predict_many,
    save_model,
)

__all__ = [
    "Dataset",
    "Standardizer",
    "TrainedModel",
    "fit_adaboost",
    "fit_benchmark",
    "fit_knn",
    "fit_lasso",
    "fit_svr",
    "fold_indices",
    "fold_sizes",
    "grid_search_cv",
    "load_model",
    "predict",
    "predict_many",
    "save_model",
]
