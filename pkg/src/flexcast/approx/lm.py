"""Levenberg-Marquardt nonlinear least squares with finite-difference Jacobians."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

LAMBDA0 = 1e-3
LAMBDA_MAX = 1e16
FD_STEP = 1e-6
RTOL = 1e-8
MAX_ITER = 200


@dataclass
class FitReport:
    rss: float
    iterations: int
    converged: bool
    seconds: float
    initial_rss: float = float("nan")
    message: str = ""

    def __post_init__(self):
        if self.rss < 0:
            raise ValueError("negative residual sum of squares")

    @classmethod
    def combine(cls, reports) -> "FitReport":
        reports = list(reports)
        return cls(
            rss=float(sum(r.rss for r in reports)),
            iterations=int(sum(r.iterations for r in reports)),
            converged=all(r.converged for r in reports),
            seconds=float(sum(r.seconds for r in reports)),
            initial_rss=float(sum(r.initial_rss for r in reports)),
            message="; ".join(sorted({r.message for r in reports if r.message})),
        )


class LMConvergenceError(RuntimeError):
    def __init__(self, message: str, params: np.ndarray, report: FitReport):
        super().__init__(message)
        self.params = params
        self.report = report


def central_jacobian(residual: Callable, p: np.ndarray, rel_step: float = FD_STEP, batched: bool = False) -> np.ndarray:
    """Central differences with step ``rel_step * max(|p_i|, 1)``.

    With ``batched=True`` the residual takes a [k, params] stack and returns
    [k, observations], so all 2p probes cost one call.
    """
    h = rel_step * np.maximum(np.abs(p), 1.0)
    if batched:
        E = np.diag(h)
        R = residual(np.concatenate([p + E, p - E]))
        return ((R[: len(p)] - R[len(p) :]) / (2 * h[:, None])).T
    cols = []
    for i in range(len(p)):
        up = p.copy()
        dn = p.copy()
        up[i] += h[i]
        dn[i] -= h[i]
        cols.append((residual(up) - residual(dn)) / (2 * h[i]))
    return np.column_stack(cols)


def lm_fit(
    residual: Callable[[np.ndarray], np.ndarray],
    init,
    max_iter: int = MAX_ITER,
    rtol: float = RTOL,
    jacobian: Callable | None = None,
    batch_residual: Callable | None = None,
) -> tuple[np.ndarray, FitReport]:
    """Minimize ||residual(p)||^2 starting from ``init``.

    Damping starts at 1e-3 and scales the diagonal of J^T J; it is divided by
    10 after an accepted step and multiplied by 10 after a rejected one.
    Stops when an accepted step lowers the RSS by less than ``rtol``
    (relative), when no step can lower it, or after ``max_iter`` accepted
    steps (reported as not converged). Returns the best parameters seen.
    ``batch_residual`` (stacked parameters in, stacked residuals out) lets the
    finite-difference Jacobian run as one vectorized call.
    """
    t_start = time.perf_counter()
    p = np.array(init, dtype=float)
    if not np.all(np.isfinite(p)):
        raise ValueError("non-finite initial parameters")
    r = np.asarray(residual(p), dtype=float)
    if len(r) < len(p):
        raise ValueError(f"{len(r)} observations cannot determine {len(p)} parameters")
    rss = float(r @ r)
    rss0 = rss
    if jacobian is not None:
        jac = jacobian
    elif batch_residual is not None:
        jac = lambda q: central_jacobian(batch_residual, q, batched=True)  # noqa: E731
    else:
        jac = lambda q: central_jacobian(residual, q)  # noqa: E731

    def report(it, ok, msg):
        return FitReport(rss, it, ok, time.perf_counter() - t_start, rss0, msg)

    if rss == 0.0:
        return p, report(0, True, "exact")
    lam = LAMBDA0
    for it in range(max_iter):
        J = jac(p)
        A = J.T @ J
        g = J.T @ r
        diag = np.diag(A).copy()
        diag = np.maximum(diag, 1e-12 * max(diag.max(), 1e-300))
        while True:
            try:
                step = np.linalg.solve(A + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and np.all(np.isfinite(step)):
                trial = p + step
                r_new = np.asarray(residual(trial), dtype=float)
                rss_new = float(r_new @ r_new)
                if np.isfinite(rss_new) and rss_new < rss:
                    break
            lam *= 10.0
            if lam > LAMBDA_MAX:
                if step is None:
                    raise LMConvergenceError("normal equations singular at maximum damping", p, report(it, False, "singular"))
                return p, report(it, True, "stalled")
        decrease = (rss - rss_new) / rss
        p, r, rss = trial, r_new, rss_new
        lam = max(lam / 10.0, 1e-15)
        if rss == 0.0 or decrease < rtol:
            return p, report(it + 1, True, "rtol")
    return p, report(max_iter, False, "iteration cap")
