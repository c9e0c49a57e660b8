"""Normal and skew-normal densities on top of a rational erf approximation."""

from __future__ import annotations

import math

import numpy as np

SQRT2 = math.sqrt(2.0)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# Abramowitz & Stegun 7.1.26, |error| <= 1.5e-7
_P = 0.3275911
_A = (0.254829592, -0.284496736, 1.421413741, -1.453152027, 1.061405429)


def erf(x):
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    t = 1.0 / (1.0 + _P * ax)
    poly = t * (_A[0] + t * (_A[1] + t * (_A[2] + t * (_A[3] + t * _A[4]))))
    return np.sign(x) * (1.0 - poly * np.exp(-ax * ax))


def norm_pdf(z):
    z = np.asarray(z, dtype=float)
    return INV_SQRT_2PI * np.exp(-0.5 * z * z)


def norm_cdf(z):
    return 0.5 * (1.0 + erf(np.asarray(z, dtype=float) / SQRT2))


def normal_density(x, mu, sigma):
    return norm_pdf((np.asarray(x, dtype=float) - mu) / sigma) / sigma


def eval_skewnormal(x, xi, omega, alpha):
    """Skew-normal density with location ``xi``, scale ``omega`` and shape ``alpha``."""
    if not omega > 0:
        raise ValueError(f"scale must be positive, got {omega}")
    z = (np.asarray(x, dtype=float) - xi) / omega
    return 2.0 / omega * norm_pdf(z) * norm_cdf(alpha * z)
