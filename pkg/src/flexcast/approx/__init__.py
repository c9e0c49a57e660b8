"""Compact surface approximations of flexibility envelopes."""

from flexcast.approx.densities import erf, eval_skewnormal, norm_cdf, norm_pdf
from flexcast.approx.lm import FitReport, LMConvergenceError, lm_fit
from flexcast.approx.surfaces import (
    Gmm3D,
    Normal2DSum,
    SkewNormal2DSum,
    fit_2d_nd,
    fit_2d_snd,
    fit_3d_gmm,
    parameter_count,
    reconstruct,
)

__all__ = [
    "FitReport",
    "Gmm3D",
    "LMConvergenceError",
    "Normal2DSum",
    "SkewNormal2DSum",
    "erf",
    "eval_skewnormal",
    "fit_2d_nd",
    "fit_2d_snd",
    "fit_3d_gmm",
    "lm_fit",
    "norm_cdf",
    "norm_pdf",
    "parameter_count",
    "reconstruct",
]
