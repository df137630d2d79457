"""Shared test oracles, kept deliberately independent of the library's own
computation paths."""

import math

import numpy as np


def mc_conditional_moments(mu, sigma2, skew, dof, y, n_draws, seed):
    """Importance-sampling estimates of the conditional latent moments of one
    skew-t observation, drawn from the hierarchical construction:

        W ~ Gamma(dof/2, rate=dof/2),  U | W ~ N(0, sigma2 / W),
        Y | U, W ~ N(mu + delta |U|, (1 - delta^2) sigma2 / W).

    Proposals come from the prior on (U, W); weights are the conditional
    density of the observed y. Returns dict of (estimate, standard error)
    for E[W|y], E[W|U| |y], E[W U^2|y] and E[log W|y].
    """
    rng = np.random.default_rng(seed)
    delta = skew / math.sqrt(1.0 + skew * skew)
    sigma = math.sqrt(sigma2)

    w = rng.gamma(shape=0.5 * dof, scale=2.0 / dof, size=n_draws)
    u = rng.normal(0.0, sigma / np.sqrt(w))
    cond_var = (1.0 - delta * delta) * sigma2 / w
    resid = y - mu - delta * np.abs(u)
    log_weight = -0.5 * resid * resid / cond_var - 0.5 * np.log(2 * np.pi * cond_var)
    weight = np.exp(log_weight - log_weight.max())
    weight /= weight.sum()

    out = {}
    for name, h in (
        ("w", w),
        ("e1", w * np.abs(u)),
        ("e2", w * u * u),
        ("e3", np.log(w)),
    ):
        est = float(weight @ h)
        se = float(np.sqrt(np.sum(weight * weight * (h - est) ** 2)))
        out[name] = (est, se)
    return out


def finite_difference_gradient(f, x, h=1e-5):
    """Central finite differences of a scalar function of a vector."""
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        grad[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return grad
