"""epsilon-SVR with an RBF kernel, solved in the dual by SMO.

The dual is written over 2n variables a = [alpha; alpha*] with signs
s = [+1; -1], linear term p = [eps - y; eps + y] and Q = s s^T * K:

    min 0.5 a^T Q a + p^T a   s.t.  s^T a = 0,  0 <= a <= C

Working pairs are chosen with second-order information and the solver stops
on the primal-dual gap.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from flexcast.ml.data import Standardizer, fold_indices

EPSILON = 0.1
MAX_ITER = 100_000
GAP_RTOL = 1e-3
TAU = 1e-12


class SVRConvergenceError(RuntimeError):
    def __init__(self, gap: float, iterations: int):
        super().__init__(f"SMO stopped after {iterations} iterations with duality gap {gap:.3e}")
        self.gap = gap
        self.iterations = iterations


@njit(cache=True)
def _rho(a, s, G, C):
    ub = np.inf
    lb = -np.inf
    nfree = 0
    total = 0.0
    for t in range(a.shape[0]):
        yG = s[t] * G[t]
        if a[t] >= C:
            if s[t] < 0:
                ub = min(ub, yG)
            else:
                lb = max(lb, yG)
        elif a[t] <= 0:
            if s[t] > 0:
                ub = min(ub, yG)
            else:
                lb = max(lb, yG)
        else:
            nfree += 1
            total += yG
    if nfree > 0:
        return total / nfree
    return 0.5 * (ub + lb)


@njit(cache=True)
def _gap(a, G, p, y, C, eps, n, rho):
    dual = 0.0
    for t in range(2 * n):
        dual += 0.5 * a[t] * (G[t] + p[t])
    quad = 0.0
    hinge = 0.0
    for i in range(n):
        kb = G[i] - p[i]
        quad += (a[i] - a[i + n]) * kb
        r = abs(y[i] - (kb - rho)) - eps
        if r > 0:
            hinge += r
    primal = 0.5 * quad + C * hinge
    return primal + dual, dual


@njit(cache=True)
def smo_svr(K, y, C, eps, gap_rtol, max_iter):
    """Returns (beta = alpha - alpha*, bias, iterations, gap, dual objective in minimization form)."""
    n = y.shape[0]
    a = np.zeros(2 * n)
    s = np.empty(2 * n)
    p = np.empty(2 * n)
    for i in range(n):
        s[i] = 1.0
        s[i + n] = -1.0
        p[i] = eps - y[i]
        p[i + n] = eps + y[i]
    G = p.copy()
    it = 0
    gap = np.inf
    dual = 0.0
    rho = 0.0
    while True:
        if it % 10 == 0:
            rho = _rho(a, s, G, C)
            gap, dual = _gap(a, G, p, y, C, eps, n, rho)
            if gap <= gap_rtol * (1.0 + abs(dual)):
                break
        if it >= max_iter:
            break
        # i: maximal violator in I_up
        gmax = -np.inf
        i = -1
        for t in range(2 * n):
            if (s[t] > 0 and a[t] < C) or (s[t] < 0 and a[t] > 0):
                v = -s[t] * G[t]
                if v >= gmax:
                    gmax = v
                    i = t
        gmax2 = -np.inf
        j = -1
        best = np.inf
        ii = i % n if i >= 0 else 0
        for t in range(2 * n):
            if (s[t] > 0 and a[t] > 0) or (s[t] < 0 and a[t] < C):
                v = s[t] * G[t]
                if v >= gmax2:
                    gmax2 = v
                diff = gmax + v
                if i >= 0 and diff > 0:
                    tt = t % n
                    quad = K[ii, ii] + K[tt, tt] - 2.0 * K[ii, tt]
                    if quad <= 0:
                        quad = TAU
                    obj = -diff * diff / quad
                    if obj <= best:
                        best = obj
                        j = t
        if i < 0 or j < 0 or gmax + gmax2 < 1e-12:
            rho = _rho(a, s, G, C)
            gap, dual = _gap(a, G, p, y, C, eps, n, rho)
            break
        jj = j % n
        quad = K[ii, ii] + K[jj, jj] - 2.0 * K[ii, jj]
        if quad <= 0:
            quad = TAU
        old_i = a[i]
        old_j = a[j]
        if s[i] != s[j]:
            delta = (-G[i] - G[j]) / quad
            diff = a[i] - a[j]
            a[i] += delta
            a[j] += delta
            if diff > 0:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = diff
            else:
                if a[i] < 0:
                    a[i] = 0.0
                    a[j] = -diff
            if diff > 0:
                if a[i] > C:
                    a[i] = C
                    a[j] = C - diff
            else:
                if a[j] > C:
                    a[j] = C
                    a[i] = C + diff
        else:
            delta = (G[i] - G[j]) / quad
            total = a[i] + a[j]
            a[i] -= delta
            a[j] += delta
            if total > C:
                if a[i] > C:
                    a[i] = C
                    a[j] = total - C
            else:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = total
            if total > C:
                if a[j] > C:
                    a[j] = C
                    a[i] = total - C
            else:
                if a[i] < 0:
                    a[i] = 0.0
                    a[j] = total
        di = a[i] - old_i
        dj = a[j] - old_j
        for t in range(2 * n):
            tt = t % n
            G[t] += s[t] * (s[i] * K[tt, ii] * di + s[j] * K[tt, jj] * dj)
        it += 1
    beta = a[:n] - a[n:]
    return beta, -rho, it, gap, dual


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(d2, 0.0))


def kernel_width(Xs: np.ndarray) -> float:
    """gamma = 1 / (n_features * variance of the standardized training data)."""
    var = Xs.var()
    return 1.0 / (Xs.shape[1] * var) if var > 0 else 1.0


def dual_objective(beta, K, y, eps) -> float:
    """Dual maximization objective in terms of beta = alpha - alpha*."""
    return float(-0.5 * beta @ K @ beta - eps * np.abs(beta).sum() + y @ beta)


def _fit_columns(K, Y, C, eps, strict):
    T = Y.shape[1]
    C = np.broadcast_to(np.asarray(C, dtype=float), (T,))
    mu = Y.mean(axis=0)
    sd = Y.std(axis=0)
    beta = np.zeros((K.shape[0], T))
    bias = mu.copy()
    gaps = np.zeros(T)
    for t in range(T):
        if sd[t] <= 1e-12 * max(1.0, abs(mu[t])):
            continue
        yt = (Y[:, t] - mu[t]) / sd[t]
        b, b0, it, gap, dual = smo_svr(K, yt, C[t], eps, GAP_RTOL, MAX_ITER)
        gaps[t] = gap
        if strict and gap > GAP_RTOL * (1 + abs(dual)):
            raise SVRConvergenceError(gap, it)
        beta[:, t] = b * sd[t]
        bias[t] = mu[t] + b0 * sd[t]
    return beta, bias, gaps


def fit(X, Y, C, eps: float = EPSILON, gamma: float | None = None, strict: bool = True):
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).reshape(len(X), -1)
    std = Standardizer.fit(X)
    Xs = std.transform(X)
    g = kernel_width(Xs) if gamma is None else gamma
    K = rbf_kernel(Xs, Xs, g)
    beta, bias, gaps = _fit_columns(K, Y, C, eps, strict)
    return {"means": std.means, "stds": std.stds, "train": Xs, "beta": beta, "bias": bias,
            "gamma": np.array(g), "gaps": gaps}


def predict(params, X) -> np.ndarray:
    Xs = (np.asarray(X, dtype=float) - params["means"]) / params["stds"]
    K = rbf_kernel(Xs, params["train"], float(params["gamma"]))
    return K @ params["beta"] + params["bias"]


def cv_scores(X, Y, c_grid, folds: int = 5, eps: float = EPSILON) -> np.ndarray:
    """Validation MAE per (C, target); the kernel matrix is built once per fold."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).reshape(len(X), -1)
    scores = np.zeros((len(c_grid), Y.shape[1]))
    for train, val in fold_indices(len(X), folds):
        std = Standardizer.fit(X[train])
        Xt, Xv = std.transform(X[train]), std.transform(X[val])
        g = kernel_width(Xt)
        K = rbf_kernel(Xt, Xt, g)
        Kv = rbf_kernel(Xv, Xt, g)
        for gi, C in enumerate(c_grid):
            beta, bias, _ = _fit_columns(K, Y[train], C, eps, strict=False)
            scores[gi] += np.abs(Kv @ beta + bias - Y[val]).mean(axis=0)
    return scores / folds
