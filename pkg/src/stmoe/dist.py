"""Skew-normal and skew-t densities plus exact samplers.

The skew-t law used throughout is the four-parameter family
(location mu, squared scale sigma2, skewness, degrees of freedom dof)
with density

    f(y) = (2/sigma) t_dof(d) T_{dof+1}(skew * d * sqrt((dof+1)/(dof+d^2))),
    d = (y - mu)/sigma.

Everything density-like is computed in log space; the plain pdf functions
exponentiate at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .specfun import (
    normal_logcdf,
    normal_logpdf,
    student_t_logcdf,
    student_t_logpdf,
)

__all__ = [
    "SkewTParams",
    "skew_normal_pdf",
    "skew_normal_logpdf",
    "skew_t_pdf",
    "skew_t_logpdf",
    "sample_skew_t",
    "delta_from_skew",
    "skew_from_delta",
]


def delta_from_skew(skew):
    """Map the skewness parameter to delta = skew/sqrt(1+skew^2) in (-1, 1)."""
    skew = np.asarray(skew, dtype=float)
    out = skew / np.sqrt(1.0 + skew * skew)
    return float(out) if out.ndim == 0 else out


def skew_from_delta(delta):
    """Inverse of :func:`delta_from_skew`; requires |delta| < 1."""
    delta = np.asarray(delta, dtype=float)
    if np.any(np.abs(delta) >= 1.0):
        raise ValueError("delta must lie strictly inside (-1, 1)")
    out = delta / np.sqrt(1.0 - delta * delta)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SkewTParams:
    """Parameters of one univariate skew-t law."""

    mu: float
    sigma2: float
    skew: float
    dof: float

    def __post_init__(self):
        if not (self.sigma2 > 0.0 and math.isfinite(self.sigma2)):
            raise ValueError(f"sigma2 must be positive and finite, got {self.sigma2}")
        if not (self.dof > 0.0 and math.isfinite(self.dof)):
            raise ValueError(f"dof must be positive and finite, got {self.dof}")
        if not math.isfinite(self.mu) or not math.isfinite(self.skew):
            raise ValueError("mu and skew must be finite")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    def delta(self) -> float:
        return delta_from_skew(self.skew)


def skew_normal_logpdf(y, mu, sigma2, skew):
    if not np.all(np.asarray(sigma2) > 0.0):
        raise ValueError(f"sigma2 must be positive, got {sigma2!r}")
    y = np.asarray(y, dtype=float)
    sigma = np.sqrt(sigma2)
    d = (y - mu) / sigma
    return np.log(2.0) - np.log(sigma) + normal_logpdf(d) + normal_logcdf(skew * d)


def skew_normal_pdf(y, mu, sigma2, skew):
    """Density 2/sigma * phi(d) * Phi(skew*d) with d = (y-mu)/sigma."""
    out = np.exp(skew_normal_logpdf(y, mu, sigma2, skew))
    return float(out) if np.ndim(out) == 0 else out


def skew_t_logpdf(y, params: SkewTParams):
    y = np.asarray(y, dtype=float)
    sigma = params.sigma
    nu = params.dof
    d = (y - params.mu) / sigma
    with np.errstate(over="ignore", invalid="ignore"):
        arg = params.skew * d * np.sqrt((nu + 1.0) / (nu + d * d))
    arg = np.nan_to_num(arg, nan=0.0, posinf=np.inf, neginf=-np.inf)
    return (
        np.log(2.0)
        - np.log(sigma)
        + student_t_logpdf(d, nu)
        + student_t_logcdf(arg, nu + 1.0)
    )


def skew_t_pdf(y, params: SkewTParams):
    """Skew-t density at ``y``."""
    out = np.exp(skew_t_logpdf(y, params))
    return float(out) if np.ndim(out) == 0 else out


def _as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_skew_t(params: SkewTParams, n: int, seed) -> np.ndarray:
    """Draw ``n`` iid skew-t variates.

    Uses the scale-mixture construction Y = mu + sigma * U / sqrt(W) with
    U standard skew-normal (U = delta|U0| + sqrt(1-delta^2) E) and
    W ~ Gamma(dof/2, rate=dof/2). Deterministic for a fixed seed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _as_generator(seed)
    delta = params.delta()
    u0 = rng.standard_normal(n)
    e = rng.standard_normal(n)
    u = delta * np.abs(u0) + math.sqrt(1.0 - delta * delta) * e
    w = rng.gamma(shape=0.5 * params.dof, scale=2.0 / params.dof, size=n)
    return params.mu + params.sigma * u / np.sqrt(w)
