"""Few-parameter surface models of flexibility envelopes.

Two per-slice models treat each lead time's duration-vs-power profile as a
weighted sum of two bell curves (normal or skew-normal). The third covers
the whole (lead, power) surface with K axis-aligned 2D Gaussian bumps.
Weights carry units (minutes * kW, or minutes * minutes * kW for the 3D
bumps): the curves are least-squares shape models, not normalized densities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from flexcast.approx.densities import norm_cdf, norm_pdf
from flexcast.approx.lm import FitReport, lm_fit
from flexcast.envelope import FlexibilityEnvelope, GridMismatchError, LeadTimeGrid, PowerGrid

ND_PER_SLICE = 6
SND_PER_SLICE = 8
GMM_PER_COMPONENT = 5
DEFAULT_K = 18
DEGENERATE_ND = (0.0, 0.0, 1.0, 0.0, 0.0, 1.0)
MERGE_SEP = 0.5  # bells closer than this many widths are also tried as one


class SurfaceFitError(ValueError):
    pass


def _abs_scale(s):
    return np.maximum(np.abs(s), 1e-12)


def nd_curve(x, params) -> np.ndarray:
    """sum_i c_i * N(x; mu_i, sigma_i) for params laid out (c, mu, sigma) * n.

    ``params`` may be a [k, 3n] stack, giving a [k, len(x)] result.
    """
    x = np.asarray(x, dtype=float)
    P = np.asarray(params, dtype=float)
    B = P.reshape(P.shape[:-1] + (-1, 3))[..., None]  # [..., n, 3, 1]
    s = _abs_scale(B[..., 2, :])
    bells = B[..., 0, :] * norm_pdf((x - B[..., 1, :]) / s) / s
    return bells.sum(axis=-2)


def snd_curve(x, params) -> np.ndarray:
    """sum_i c_i * SN(x; xi_i, omega_i, alpha_i) for params laid out (c, xi, omega, alpha) * n.

    ``params`` may be a [k, 4n] stack, giving a [k, len(x)] result.
    """
    x = np.asarray(x, dtype=float)
    P = np.asarray(params, dtype=float)
    B = P.reshape(P.shape[:-1] + (-1, 4))[..., None]
    s = _abs_scale(B[..., 2, :])
    z = (x - B[..., 1, :]) / s
    bells = B[..., 0, :] * 2.0 / s * norm_pdf(z) * norm_cdf(B[..., 3, :] * z)
    return bells.sum(axis=-2)


def gmm_bumps(leads, powers, params) -> np.ndarray:
    """Each axis-aligned 2D Gaussian bump on its own row, [K, len(leads)]."""
    leads = np.asarray(leads, dtype=float)
    powers = np.asarray(powers, dtype=float)
    P = np.reshape(params, (-1, GMM_PER_COMPONENT))
    sl = _abs_scale(P[:, 3])[:, None]
    sp = _abs_scale(P[:, 4])[:, None]
    zl = (leads[None, :] - P[:, 1:2]) / sl
    zp = (powers[None, :] - P[:, 2:3]) / sp
    return P[:, 0:1] / (2 * math.pi * sl * sp) * np.exp(-0.5 * (zl * zl + zp * zp))


def gmm_surface(leads, powers, params) -> np.ndarray:
    """Sum of axis-aligned 2D Gaussian bumps evaluated at paired coordinates."""
    return gmm_bumps(leads, powers, params).sum(axis=0)


# --- model containers -------------------------------------------------------


@dataclass(frozen=True)
class Normal2DSum:
    power_grid: PowerGrid
    lead_grid: LeadTimeGrid
    params: np.ndarray  # [lead, 6]: c1, mu1, sigma1, c2, mu2, sigma2
    degenerate: tuple[bool, ...] = ()

    model_id = 1
    per_slice = ND_PER_SLICE

    @property
    def parameter_count(self) -> int:
        return int(np.size(self.params))

    def evaluate(self) -> np.ndarray:
        x = self.power_grid.levels()
        return np.stack([nd_curve(x, row) for row in self.params])


@dataclass(frozen=True)
class SkewNormal2DSum:
    power_grid: PowerGrid
    lead_grid: LeadTimeGrid
    params: np.ndarray  # [lead, 8]: c1, xi1, omega1, alpha1, c2, xi2, omega2, alpha2
    degenerate: tuple[bool, ...] = ()

    model_id = 2
    per_slice = SND_PER_SLICE

    @property
    def parameter_count(self) -> int:
        return int(np.size(self.params))

    def evaluate(self) -> np.ndarray:
        x = self.power_grid.levels()
        return np.stack([snd_curve(x, row) for row in self.params])


@dataclass(frozen=True)
class Gmm3D:
    power_grid: PowerGrid
    lead_grid: LeadTimeGrid
    params: np.ndarray  # [K, 5]: c, mu_lead (min), mu_power (kW), sigma_lead (min), sigma_power (kW)

    model_id = 3
    per_slice = None

    @property
    def parameter_count(self) -> int:
        return int(np.size(self.params))

    @property
    def n_components(self) -> int:
        return len(self.params)

    def evaluate(self) -> np.ndarray:
        L, Pw = np.meshgrid(self.lead_grid.array(), self.power_grid.levels(), indexing="ij")
        return gmm_surface(L.ravel(), Pw.ravel(), self.params).reshape(L.shape)


SurfaceModel = Normal2DSum | SkewNormal2DSum | Gmm3D


# --- 2D fits ------------------------------------------------------------------


def slice_moments(x, y) -> tuple[float, float]:
    w = np.maximum(y, 0.0)
    m = float((w * x).sum() / w.sum())
    s = float(np.sqrt((w * (x - m) ** 2).sum() / w.sum()))
    return m, s


def nd_initial(x, y, step) -> np.ndarray:
    m, s = slice_moments(x, y)
    s = max(s, step)
    c = float(y.max()) * s * math.sqrt(2 * math.pi) / 2
    return np.array([c, m - s, s, c, m + s, s])


def _canonical_nd(p) -> np.ndarray:
    p = np.array(p, dtype=float).reshape(2, 3)
    p[:, 2] = np.abs(p[:, 2])
    order = np.argsort(-p[:, 0], kind="stable")
    return p[order].ravel()


def fit_nd_slice(x, y, step) -> tuple[np.ndarray, FitReport, bool]:
    """Fit one slice; returns (6 params, report, degenerate flag)."""
    if not np.any(y > 0):
        return np.array(DEGENERATE_ND), FitReport(float(y @ y), 0, True, 0.0, float(y @ y), "degenerate"), True
    res = lambda p: nd_curve(x, p) - y  # noqa: E731
    p, rep = lm_fit(res, nd_initial(x, y, step), batch_residual=res)
    p = _canonical_nd(p)
    (c1, m1, s1), (c2, m2, s2) = p.reshape(2, 3)
    scale = 0.5 * (s1 + s2)
    if abs(m1 - m2) <= MERGE_SEP * scale or abs(c2) <= 1e-9 * abs(c1):
        # Overlapping bells can stall LM in a flat valley short of one bell;
        # refit as a single bell and keep it if it fits no worse.
        csum = c1 + c2
        w1 = c1 / csum if csum else 0.5
        single0 = np.array([csum, w1 * m1 + (1 - w1) * m2, w1 * s1 + (1 - w1) * s2])
        q, rep1 = lm_fit(res, single0, batch_residual=res)
        if rep1.rss <= rep.rss:
            p = np.array([q[0], q[1], abs(q[2]), 0.0, 0.0, 1.0])
            rep = FitReport(rep1.rss, rep.iterations + rep1.iterations, rep1.converged,
                            rep.seconds + rep1.seconds, rep.initial_rss, "merged")
    return p, rep, False


def fit_snd_slice(x, y, nd_params) -> tuple[np.ndarray, FitReport]:
    """Skew fit started from the normal fit with zero skew, so it can only improve on it.

    The normal optimum is often close to stationary in the skew directions,
    so a second start from a single moment-matched bell (also zero skew) is
    tried and the better fit kept.
    """
    c1, m1, s1, c2, m2, s2 = nd_params
    init = np.array([c1, m1, s1, 0.0, c2, m2, s2, 0.0])
    res = lambda q: snd_curve(x, q) - y  # noqa: E731
    p, rep = lm_fit(res, init, batch_residual=res)
    m, s = slice_moments(x, y)
    area = float(np.maximum(y, 0.0).sum() * (x[1] - x[0])) if len(x) > 1 else float(y.sum())
    alt, rep_alt = lm_fit(res, np.array([area, m, max(s, 1e-3), 0.0, 0.0, m, max(s, 1e-3), 0.0]), batch_residual=res)
    if rep_alt.rss < rep.rss:
        p = alt
        rep = FitReport(rep_alt.rss, rep.iterations + rep_alt.iterations, rep_alt.converged,
                        rep.seconds + rep_alt.seconds, rep.initial_rss, rep_alt.message)
    p = p.reshape(2, 4)
    p[:, 2] = np.abs(p[:, 2])
    return p.ravel(), rep


def fit_2d_nd(env: FlexibilityEnvelope) -> tuple[Normal2DSum, FitReport]:
    x = env.power_grid.levels()
    rows, reps, degen = [], [], []
    for y in env.durations:
        p, rep, dg = fit_nd_slice(x, y, env.power_grid.step)
        rows.append(p)
        reps.append(rep)
        degen.append(dg)
    return Normal2DSum(env.power_grid, env.lead_grid, np.array(rows), tuple(degen)), FitReport.combine(reps)


def fit_2d_snd(env: FlexibilityEnvelope, nd: Normal2DSum | None = None) -> tuple[SkewNormal2DSum, FitReport]:
    if nd is None:
        nd, _ = fit_2d_nd(env)
    x = env.power_grid.levels()
    rows, reps = [], []
    for y, ndp, dg in zip(env.durations, nd.params, nd.degenerate):
        if dg:
            rows.append(np.array([0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]))
            reps.append(FitReport(float(y @ y), 0, True, 0.0, float(y @ y), "degenerate"))
            continue
        p, rep = fit_snd_slice(x, y, ndp)
        rows.append(p)
        reps.append(rep)
    return SkewNormal2DSum(env.power_grid, env.lead_grid, np.array(rows), nd.degenerate), FitReport.combine(reps)


# --- 3D fit -------------------------------------------------------------------


def gmm_observations(env: FlexibilityEnvelope, duplicate_edges: bool = True):
    """Flattened (lead, power, duration) observations; edge slices repeated once."""
    leads = env.lead_grid.array()
    rows = list(range(env.lead_grid.size))
    if duplicate_edges:
        rows = rows + [0, env.lead_grid.size - 1]
    levels = env.power_grid.levels()
    L = np.repeat(leads[rows], len(levels))
    Pw = np.tile(levels, len(rows))
    D = env.durations[rows].ravel()
    return L, Pw, D


def farthest_point_seeds(env: FlexibilityEnvelope, K: int) -> np.ndarray:
    """K (lead, power) cells spread over the high-duration part of the envelope."""
    D = env.durations
    leads = env.lead_grid.array()
    levels = env.power_grid.levels()
    li, pj = np.nonzero(D >= 0.5 * D.max()) if D.max() > 0 else np.nonzero(np.ones_like(D))
    if len(li) < K:
        li, pj = np.nonzero(np.ones_like(D))
    span_l = max(leads[-1] - leads[0], 1.0)
    span_p = levels[-1] - levels[0]
    pts = np.column_stack((leads[li] / span_l, levels[pj] / span_p))
    first = int(np.argmax(D[li, pj]))
    chosen = [first]
    dist = np.sqrt(((pts - pts[first]) ** 2).sum(axis=1))
    while len(chosen) < min(K, len(pts)):
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, np.sqrt(((pts - pts[nxt]) ** 2).sum(axis=1)))
    while len(chosen) < K:
        chosen.append(chosen[len(chosen) % len(pts)])
    return np.column_stack((leads[li[chosen]], levels[pj[chosen]], D[li[chosen], pj[chosen]]))


def gmm_initial(env: FlexibilityEnvelope, K: int) -> np.ndarray:
    seeds = farthest_point_seeds(env, K)
    leads = env.lead_grid.array()
    levels = env.power_grid.levels()
    sl = max(leads[-1] - leads[0], 1.0) / math.sqrt(K)
    sp = (levels[-1] - levels[0]) / (2.0 * math.sqrt(K))
    c = np.maximum(seeds[:, 2], 1.0) * 2 * math.pi * sl * sp / 2.0
    return np.column_stack((c, seeds[:, 0], seeds[:, 1], np.full(K, sl), np.full(K, sp)))


def _gmm_jacobian(L, Pw, h_rel=1e-6):
    """Central differences that only re-evaluate the bump being perturbed."""

    def jac(p):
        # row k*5 + i of the probe stacks is bump k with parameter i nudged
        P = p.reshape(-1, GMM_PER_COMPONENT)
        h = h_rel * np.maximum(np.abs(p), 1.0)
        base = np.repeat(P, GMM_PER_COMPONENT, axis=0)
        nudge = np.tile(np.eye(GMM_PER_COMPONENT), (len(P), 1)) * h[:, None]
        diff = gmm_bumps(L, Pw, base + nudge) - gmm_bumps(L, Pw, base - nudge)
        return (diff / (2 * h[:, None])).T

    return jac


def fit_3d_gmm(env: FlexibilityEnvelope, K: int = DEFAULT_K, duplicate_edges: bool = True) -> tuple[Gmm3D, FitReport]:
    if K < 1:
        raise SurfaceFitError("need at least one component")
    L, Pw, D = gmm_observations(env, duplicate_edges)
    if GMM_PER_COMPONENT * K > len(D):
        raise SurfaceFitError(f"{GMM_PER_COMPONENT * K} parameters exceed {len(D)} observations")
    if not np.any(D > 0):
        return Gmm3D(env.power_grid, env.lead_grid, np.tile([0.0, 0.0, 0.0, 1.0, 1.0], (K, 1))), FitReport(
            0.0, 0, True, 0.0, 0.0, "degenerate")
    p, rep = lm_fit(lambda q: gmm_surface(L, Pw, q) - D, gmm_initial(env, K).ravel(), jacobian=_gmm_jacobian(L, Pw))
    P = p.reshape(K, GMM_PER_COMPONENT)
    P[:, 3:] = np.abs(P[:, 3:])
    return Gmm3D(env.power_grid, env.lead_grid, P), rep


# --- reconstruction -----------------------------------------------------------


def reconstruct(model: SurfaceModel, power_grid: PowerGrid | None = None, lead_grid: LeadTimeGrid | None = None,
                timestamp: float = 0.0) -> FlexibilityEnvelope:
    pg = power_grid or model.power_grid
    lg = lead_grid or model.lead_grid
    if pg != model.power_grid or lg != model.lead_grid:
        raise GridMismatchError("reconstruction grid differs from the fitted grid")
    D = np.clip(model.evaluate(), 0.0, lg.remaining()[:, None])
    return FlexibilityEnvelope(pg, lg, D, timestamp)


def fit_rss(model: SurfaceModel, env: FlexibilityEnvelope) -> float:
    """Unclamped least-squares residual of a fitted model on the envelope grid."""
    r = model.evaluate() - env.durations
    return float((r * r).sum())


APPROXIMATORS = {"nd": fit_2d_nd, "snd": fit_2d_snd, "gmm": fit_3d_gmm}


def parameter_count(kind: str, lead_grid: LeadTimeGrid | None = None, K: int = DEFAULT_K) -> int:
    lead_grid = lead_grid or LeadTimeGrid()
    if kind == "nd":
        return ND_PER_SLICE * lead_grid.size
    if kind == "snd":
        return SND_PER_SLICE * lead_grid.size
    if kind == "gmm":
        return GMM_PER_COMPONENT * K
    raise ValueError(f"unknown approximator {kind!r}")
