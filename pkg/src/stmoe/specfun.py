"""Scalar special functions shared by the density and estimation code.

Thin, contract-enforcing wrappers around scipy.special. The Student-t CDF
goes through the regularized incomplete beta so that fractional degrees of
freedom are handled uniformly, and a log-space variant is provided for the
far tails where the plain CDF underflows.
"""

from __future__ import annotations

import numpy as np
from scipy import special as _sp

__all__ = [
    "log_gamma",
    "digamma",
    "student_t_pdf",
    "student_t_logpdf",
    "student_t_cdf",
    "student_t_logcdf",
    "normal_pdf_cdf",
    "normal_logpdf",
    "normal_logcdf",
]

_LOG_2PI = np.log(2.0 * np.pi)


def _require_positive(value, name):
    arr = np.asarray(value, dtype=float)
    if np.any(arr <= 0.0) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be positive and finite, got {value!r}")


def log_gamma(x):
    """ln Gamma(x) for x > 0."""
    _require_positive(x, "x")
    return _sp.gammaln(x)


def digamma(x):
    """psi(x) = d/dx ln Gamma(x) for x > 0."""
    _require_positive(x, "x")
    return _sp.digamma(x)


def student_t_logpdf(x, nu):
    """Log density of the standard Student t with ``nu`` degrees of freedom.

    Uses log1p(x^2/nu) so that very large nu (normal regime) stays accurate.
    """
    _require_positive(nu, "nu")
    x = np.asarray(x, dtype=float)
    nu = np.asarray(nu, dtype=float)
    half = 0.5 * (nu + 1.0)
    with np.errstate(over="ignore"):
        # x*x may overflow to inf; the log density then is -inf, as it should be
        return (
            _sp.gammaln(half)
            - _sp.gammaln(0.5 * nu)
            - 0.5 * np.log(nu * np.pi)
            - half * np.log1p(x * x / nu)
        )


def student_t_pdf(x, nu):
    """Density of the standard Student t distribution."""
    return np.exp(student_t_logpdf(x, nu))


def student_t_cdf(x, nu):
    """CDF of the standard Student t via the regularized incomplete beta.

    T_nu(x) = 1 - I_z(nu/2, 1/2)/2 for x >= 0 with z = nu/(nu + x^2),
    and T_nu(-x) = 1 - T_nu(x).
    """
    _require_positive(nu, "nu")
    x = np.asarray(x, dtype=float)
    nu = np.asarray(nu, dtype=float)
    z = nu / (nu + x * x)
    tail = 0.5 * _sp.betainc(0.5 * nu, 0.5, z)
    out = np.where(x >= 0.0, 1.0 - tail, tail)
    if out.ndim == 0:
        return float(out)
    return out


def _betacf(a: float, b: float, z: float, max_iter: int = 500, eps: float = 3e-15) -> float:
    """Lentz continued fraction for the incomplete beta (valid left of the
    concentration point z < (a+1)/(a+b+2), which always holds when I_z(a,b)
    is small)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * z / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * z / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * z / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    return h


def _log_half_ibeta(a: float, z: float) -> float:
    """log( I_z(a, 1/2) / 2 ) via the continued fraction, all in log space."""
    prefactor = (
        a * np.log(z)
        + 0.5 * np.log1p(-z)
        - np.log(a)
        - _sp.betaln(a, 0.5)
    )
    return float(np.log(0.5) + prefactor + np.log(_betacf(a, 0.5, z)))


def student_t_logcdf(x, nu):
    """log T_nu(x), stable far into the lower tail.

    Where the direct tail probability underflows, the regularized incomplete
    beta is re-evaluated by its continued fraction with the prefactor kept in
    logs.
    """
    _require_positive(nu, "nu")
    scalar = np.ndim(x) == 0 and np.ndim(nu) == 0
    x, nu = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(nu, dtype=float))
    x = np.atleast_1d(x)
    nu = np.atleast_1d(nu)

    cdf = np.atleast_1d(np.asarray(student_t_cdf(x, nu)))
    out = np.full(cdf.shape, -np.inf)
    ok = cdf > 1e-290
    out[ok] = np.log(cdf[ok])

    for idx in np.flatnonzero(~ok.ravel()):
        xi, ni = float(x.flat[idx]), float(nu.flat[idx])
        out.flat[idx] = _log_half_ibeta(0.5 * ni, ni / (ni + xi * xi))
    return float(out[0]) if scalar else out


def normal_pdf_cdf(x):
    """(phi(x), Phi(x)) of the standard normal."""
    x = np.asarray(x, dtype=float)
    pdf = np.exp(-0.5 * x * x - 0.5 * _LOG_2PI)
    cdf = _sp.ndtr(x)
    if x.ndim == 0:
        return float(pdf), float(cdf)
    return pdf, cdf


def normal_logpdf(x):
    x = np.asarray(x, dtype=float)
    return -0.5 * x * x - 0.5 * _LOG_2PI


def normal_logcdf(x):
    return _sp.log_ndtr(np.asarray(x, dtype=float))
