"""L1-regularized least squares by cyclic coordinate descent.

Minimizes ||y - b0 - X beta||^2 + gamma * ||beta||_1 per target column on
standardized features. The intercept b0 is unpenalized; since standardized
columns are centred it equals the target mean and drops out of the updates.
All targets share X, so the updates run on the Gram matrix for every column
at once.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from flexcast.ml.data import Standardizer

TOL = 1e-6
MAX_SWEEPS = 10_000


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def lasso_cd(Xs: np.ndarray, Y: np.ndarray, gamma, tol: float = TOL, max_sweeps: int = MAX_SWEEPS):
    """Coordinate descent on centred data. Returns (coef [m, T], most sweeps used by any column)."""
    Y = np.asarray(Y, dtype=float)
    squeeze = Y.ndim == 1
    Y = Y.reshape(len(Y), -1)
    T = Y.shape[1]
    gamma = np.ascontiguousarray(np.broadcast_to(np.asarray(gamma, dtype=float), (T,)))
    G = np.ascontiguousarray(Xs.T @ Xs)
    C = np.ascontiguousarray(Xs.T @ Y)
    B, sweeps = _cd_columns(G, C, gamma, tol, max_sweeps)
    return (B[:, 0] if squeeze else B), int(sweeps.max(initial=0))


@njit(cache=True)
def _cd_columns(G, C, gamma, tol, max_sweeps):
    m, T = C.shape
    B = np.zeros((m, T))
    sweeps = np.zeros(T, dtype=np.int64)
    for t in range(T):
        half = 0.5 * gamma[t]
        for sweep in range(1, max_sweeps + 1):
            biggest = 0.0
            for j in range(m):
                if G[j, j] <= 0:
                    continue
                rho = C[j, t]
                for k in range(m):
                    if k != j:
                        rho -= G[j, k] * B[k, t]
                a = abs(rho) - half
                new = 0.0
                if a > 0:
                    new = (a if rho > 0 else -a) / G[j, j]
                step = abs(new - B[j, t])
                if step > biggest:
                    biggest = step
                B[j, t] = new
            sweeps[t] = sweep
            if biggest < tol:
                break
    return B, sweeps


def lasso_objective(X, y, beta, gamma, intercept=0.0) -> float:
    r = y - intercept - X @ beta
    return float(r @ r + gamma * np.abs(beta).sum())


def fit(X, Y, gamma):
    """Fit every column of Y; returns a parameter dict."""
    std = Standardizer.fit(X)
    Xs = std.transform(X)
    Y = np.asarray(Y, dtype=float).reshape(len(X), -1)
    mean = Y.mean(axis=0)
    coef, sweeps = lasso_cd(Xs, Y - mean, gamma)
    return {"means": std.means, "stds": std.stds, "coef": coef, "intercept": mean, "sweeps": np.array(sweeps)}


def predict(params, X) -> np.ndarray:
    Xs = (np.asarray(X, dtype=float) - params["means"]) / params["stds"]
    return Xs @ params["coef"] + params["intercept"]


def raw_coefficients(params) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients and intercept on the unstandardized feature scale."""
    coef = params["coef"] / params["stds"][:, None]
    return coef, params["intercept"] - params["means"] @ coef


def full_shrinkage_gamma(X, y) -> float:
    """Smallest gamma at which every penalized coefficient is exactly zero."""
    Xs = Standardizer.fit(X).transform(X)
    return float(2.0 * np.max(np.abs(Xs.T @ (np.asarray(y) - np.mean(y)))))
