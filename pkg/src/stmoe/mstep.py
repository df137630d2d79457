"""Conditional maximization steps: IRLS for the gating network, closed-form
weighted regression for the experts, and bracketed scalar root-finding for
the skewness and degrees-of-freedom updates.

Every step maximizes its own piece of the expected complete-data objective,
so none of them may decrease it; the fitting driver relies on that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estep import EStepMoments
from .model import Dataset, GatingParams, gating_log_probs
from .specfun import digamma, log_gamma

__all__ = [
    "IrlsConfig",
    "IrlsReport",
    "brent_root",
    "q1_value_grad_hess",
    "irls_update_gating",
    "update_expert_regression",
    "normal_expert_update",
    "solve_skewness",
    "solve_dof",
    "q2_value",
    "q3_value",
]

_EPS = np.finfo(float).eps
_DELTA_EDGE = 1.0 - 1e-9


def brent_root(f, a: float, b: float, tol: float, max_iter: int = 200) -> float:
    """Root of f on [a, b] by Brent's method (bisection/secant/inverse quadratic).

    Requires f(a) * f(b) <= 0; returns once the bracket width falls below
    ``tol`` (plus a machine-precision term) or after ``max_iter`` iterations.
    """
    fa = f(a)
    fb = f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0.0:
        raise ValueError(f"invalid bracket: f({a})={fa} and f({b})={fb} have the same sign")

    c, fc = a, fa
    d = e = b - a
    for _ in range(max_iter):
        if fb * fc > 0.0:
            c, fc = a, fa
            d = e = b - a
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        tol1 = 2.0 * _EPS * abs(b) + 0.5 * tol
        xm = 0.5 * (c - b)
        if abs(xm) <= tol1 or fb == 0.0:
            return b
        if abs(e) >= tol1 and abs(fa) > abs(fb):
            s = fb / fa
            if a == c:
                p = 2.0 * xm * s
                q = 1.0 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0.0:
                q = -q
            p = abs(p)
            if 2.0 * p < min(3.0 * xm * q - abs(tol1 * q), abs(e * q)):
                e, d = d, p / q
            else:
                d = e = xm
        else:
            d = e = xm
        a, fa = b, fb
        b += d if abs(d) > tol1 else math.copysign(tol1, xm)
        fb = f(b)
    return b


@dataclass
class IrlsConfig:
    tol_inner: float = 1e-8
    max_inner: int = 50
    max_halvings: int = 30
    ridge: float = 1e-8


@dataclass
class IrlsReport:
    alpha_new: GatingParams
    q1_trace: np.ndarray
    iterations: int
    converged: bool


def q1_value_grad_hess(alpha: GatingParams, tau: np.ndarray, R: np.ndarray):
    """Value, gradient and Hessian of Q1(alpha) = sum_ik tau_ik log pi_k(r_i).

    The gradient and Hessian are in the flattened (K-1)*q parameterization,
    component-major. The Hessian is the usual multinomial-logistic one and is
    negative semidefinite.
    """
    tau = np.asarray(tau, dtype=float)
    R = np.atleast_2d(np.asarray(R, dtype=float))
    K = tau.shape[1]
    q = R.shape[1]
    if alpha.n_components != K or alpha.q != q:
        raise ValueError(
            f"alpha is for {alpha.n_components} components x {alpha.q} covariates, "
            f"inputs imply {K} x {q}"
        )
    log_pi = gating_log_probs(R, alpha)
    value = float(np.sum(tau * log_pi))
    pi = np.exp(log_pi)

    grad = ((tau - pi)[:, : K - 1].T @ R).ravel()

    hess = np.zeros(((K - 1) * q, (K - 1) * q))
    for k in range(K - 1):
        for l in range(k, K - 1):
            wt = pi[:, k] * ((1.0 if k == l else 0.0) - pi[:, l])
            block = -(R * wt[:, None]).T @ R
            hess[k * q : (k + 1) * q, l * q : (l + 1) * q] = block
            if l != k:
                hess[l * q : (l + 1) * q, k * q : (k + 1) * q] = block.T
    return value, grad, hess


def _solve_newton_step(hess: np.ndarray, grad: np.ndarray, ridge: float) -> np.ndarray:
    """Newton direction -H^{-1} g with a ridge fallback for singular H."""
    try:
        step = np.linalg.solve(hess, grad)
        if np.all(np.isfinite(step)):
            return -step
    except np.linalg.LinAlgError:
        pass
    bump = ridge * (1.0 + np.abs(np.diag(hess)))
    repaired = hess - np.diag(bump)
    return -np.linalg.solve(repaired, grad)


def irls_update_gating(
    tau: np.ndarray,
    R: np.ndarray,
    alpha_init: GatingParams,
    cfg: IrlsConfig | None = None,
) -> IrlsReport:
    """Maximize Q1 over the gating coefficients by damped Newton iterations.

    A full Newton step is tried first; if it would decrease Q1 the step is
    halved (up to cfg.max_halvings), so the Q1 trace never decreases.
    """
    cfg = cfg or IrlsConfig()
    R = np.atleast_2d(np.asarray(R, dtype=float))
    K = np.asarray(tau).shape[1]
    q = R.shape[1]

    alpha = alpha_init.alpha.copy()
    value, grad, hess = q1_value_grad_hess(GatingParams(alpha), tau, R)
    trace = [value]
    converged = False
    iterations = 0

    for _ in range(cfg.max_inner):
        iterations += 1
        direction = _solve_newton_step(hess, grad, cfg.ridge).reshape(K - 1, q)
        step = 1.0
        new_alpha = alpha + direction
        new_value = float(np.sum(tau * gating_log_probs(R, GatingParams(new_alpha))))
        halvings = 0
        while (not np.isfinite(new_value) or new_value < value) and halvings < cfg.max_halvings:
            step *= 0.5
            halvings += 1
            new_alpha = alpha + step * direction
            new_value = float(np.sum(tau * gating_log_probs(R, GatingParams(new_alpha))))
        if not np.isfinite(new_value) or new_value < value:
            # No improving step along the Newton direction; stay put.
            converged = True
            break
        alpha = new_alpha
        improvement = new_value - value
        value = new_value
        trace.append(value)
        if abs(improvement) / max(abs(value), 1e-12) < cfg.tol_inner:
            converged = True
            break
        _, grad, hess = q1_value_grad_hess(GatingParams(alpha), tau, R)

    return IrlsReport(
        alpha_new=GatingParams(alpha),
        q1_trace=np.asarray(trace),
        iterations=iterations,
        converged=converged,
    )


def _solve_gram(gram: np.ndarray, rhs: np.ndarray, ridge: float = 1e-8) -> np.ndarray:
    try:
        beta = np.linalg.solve(gram, rhs)
        if np.all(np.isfinite(beta)):
            return beta
    except np.linalg.LinAlgError:
        pass
    bump = ridge * (1.0 + np.abs(np.diag(gram)))
    return np.linalg.solve(gram + np.diag(bump), rhs)


def update_expert_regression(
    data: Dataset,
    m: EStepMoments,
    k: int,
    delta_k: float,
    sigma2_min: float = 0.0,
):
    """Closed-form (beta, sigma2) update for skew-t expert ``k``.

    beta solves the tau*w-weighted normal equations with the e1-delta
    correction on the response side; sigma2 is the exact conditional
    maximizer, with its 2*(1 - delta^2) denominator.
    """
    tau = m.tau[:, k]
    w = m.w[:, k]
    e1 = m.e1[:, k]
    e2 = m.e2[:, k]
    sw = tau * w
    if sw.sum() <= 0.0:
        raise ValueError(f"component {k} has no effective weight")

    X, y = data.X, data.y
    gram = X.T @ (X * sw[:, None])
    rhs = X.T @ (tau * (w * y - delta_k * e1))
    beta = _solve_gram(gram, rhs)

    resid = y - X @ beta
    tau_sum = tau.sum()
    num = np.sum(tau * (w * resid * resid - 2.0 * delta_k * e1 * resid + e2))
    sigma2 = num / (2.0 * (1.0 - delta_k * delta_k) * tau_sum)
    sigma2 = max(sigma2, sigma2_min, 1e-300)
    return beta, float(sigma2)


def normal_expert_update(data: Dataset, tau: np.ndarray, k: int, sigma2_min: float = 0.0):
    """Weighted least squares update for a normal expert."""
    tk = np.asarray(tau)[:, k]
    if tk.sum() <= 0.0:
        raise ValueError(f"component {k} has no effective weight")
    X, y = data.X, data.y
    gram = X.T @ (X * tk[:, None])
    beta = _solve_gram(gram, X.T @ (tk * y))
    resid = y - X @ beta
    sigma2 = float(np.sum(tk * resid * resid) / tk.sum())
    return beta, max(sigma2, sigma2_min, 1e-300)


def _skewness_equation_coeffs(data, m, k, beta_new, sigma2_new):
    tau = m.tau[:, k]
    w = m.w[:, k]
    e1 = m.e1[:, k]
    e2 = m.e2[:, k]
    sigma = math.sqrt(sigma2_new)
    d = (data.y - data.X @ beta_new) / sigma
    a_tau = tau.sum()
    b_cross = np.sum(tau * d * e1) / sigma
    c_quad = np.sum(tau * (w * d * d + e2 / sigma2_new))
    return a_tau, b_cross, c_quad, d


def q2_value(data, m, k, beta, sigma2, delta) -> float:
    """Expected complete-data objective piece for expert k at (beta, sigma2, delta)."""
    tau = m.tau[:, k]
    w = m.w[:, k]
    e1 = m.e1[:, k]
    e2 = m.e2[:, k]
    sigma = math.sqrt(sigma2)
    d = (data.y - data.X @ beta) / sigma
    omd = 1.0 - delta * delta
    terms = (
        -math.log(2.0 * math.pi)
        - math.log(sigma2)
        - 0.5 * math.log(omd)
        - w * d * d / (2.0 * omd)
        + delta * d * e1 / (omd * sigma)
        - e2 / (2.0 * omd * sigma2)
    )
    return float(np.sum(tau * terms))


def solve_skewness(
    data: Dataset,
    m: EStepMoments,
    k: int,
    beta_new: np.ndarray,
    sigma2_new: float,
    delta_prev: float = 0.0,
    n_scan: int = 400,
):
    """Skewness update: root of the stationarity cubic in delta on (-1, 1).

    Scans ``n_scan`` equal subintervals for sign changes and polishes each
    with Brent. Among the roots that do not decrease Q2 relative to the
    previous delta, the one closest to the previous delta is taken: the
    conditional update stays in the basin it is already climbing instead of
    teleporting to a distant stationary point. Returns ``(delta, stalled)``;
    when no usable root exists the previous delta is kept, flagged stalled.
    """
    a_tau, b_cross, c_quad, _ = _skewness_equation_coeffs(data, m, k, beta_new, sigma2_new)

    def equation(delta):
        return (
            delta * (1.0 - delta * delta) * a_tau
            + (1.0 + delta * delta) * b_cross
            - delta * c_quad
        )

    lo, hi = -0.999999, 0.999999
    grid = np.linspace(lo, hi, n_scan + 1)
    vals = (
        grid * (1.0 - grid * grid) * a_tau
        + (1.0 + grid * grid) * b_cross
        - grid * c_quad
    )

    roots = []
    for i in range(n_scan):
        v0, v1 = vals[i], vals[i + 1]
        if v0 == 0.0:
            roots.append(grid[i])
        elif v0 * v1 < 0.0:
            roots.append(brent_root(equation, grid[i], grid[i + 1], tol=1e-13))
    if vals[-1] == 0.0:
        roots.append(grid[-1])

    if not roots:
        return float(np.clip(delta_prev, -_DELTA_EDGE, _DELTA_EDGE)), True

    uniq = []
    for r in roots:
        if not any(abs(r - u) < 1e-10 for u in uniq):
            uniq.append(r)

    q2_prev = q2_value(data, m, k, beta_new, sigma2_new, float(np.clip(delta_prev, -_DELTA_EDGE, _DELTA_EDGE)))
    ascent = [
        r for r in uniq
        if q2_value(data, m, k, beta_new, sigma2_new, r) >= q2_prev - 1e-10 * abs(q2_prev)
    ]
    if not ascent:
        return float(np.clip(delta_prev, -_DELTA_EDGE, _DELTA_EDGE)), True
    best = min(ascent, key=lambda r: abs(r - delta_prev))
    return float(np.clip(best, -_DELTA_EDGE, _DELTA_EDGE)), False


def q3_value(m: EStepMoments, k: int, nu: float) -> float:
    """Expected complete-data objective piece for the dof of expert k."""
    tau = m.tau[:, k]
    half = 0.5 * nu
    terms = -log_gamma(half) + half * math.log(half) + half * m.e3[:, k] - half * m.w[:, k]
    return float(np.sum(tau * terms))


def solve_dof(
    data: Dataset,
    m: EStepMoments,
    k: int,
    nu_min: float = 0.5,
    nu_max: float = 200.0,
) -> float:
    """Degrees-of-freedom update by Brent on the stationarity equation.

    The left-hand side is strictly decreasing in nu, so when it has no sign
    change on [nu_min, nu_max] the maximizer sits at the bound the root fell
    beyond, and that bound is returned.
    """
    tau = m.tau[:, k]
    tau_sum = tau.sum()
    if tau_sum <= 0.0:
        raise ValueError(f"component {k} has no effective weight")
    stat = float(np.sum(tau * (m.e3[:, k] - m.w[:, k])) / tau_sum)

    def equation(nu):
        return -digamma(0.5 * nu) + math.log(0.5 * nu) + 1.0 + stat

    g_lo = equation(nu_min)
    g_hi = equation(nu_max)
    if g_lo <= 0.0:
        return float(nu_min)
    if g_hi >= 0.0:
        return float(nu_max)
    return float(brent_root(equation, nu_min, nu_max, tol=1e-10))
