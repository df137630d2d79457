"""Pointwise predictive moments of a fitted mixture of experts and the MAP
hard partition.

Expert moments: a normal expert has mean beta'x and variance sigma2. A
skew-t expert has mean beta'x + sigma*delta*xi(dof) for dof > 1 and variance
(dof/(dof-2) - delta^2 xi(dof)^2) * sigma2 for dof > 2, where
xi(v) = sqrt(v/pi) * Gamma((v-1)/2) / Gamma(v/2). Mixture moments follow by
the laws of total expectation/variance with the gating weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Dataset, ModelParams, gating_log_probs, gating_probs
from .specfun import log_gamma

__all__ = [
    "UndefinedMomentError",
    "Prediction",
    "xi_factor",
    "predict",
    "mixture_mean",
    "mixture_mean_variance",
    "predict_band",
    "map_partition",
]

GATE_MASS_FLOOR = 1e-12


class UndefinedMomentError(ValueError):
    """A requested moment does not exist for the fitted degrees of freedom."""


@dataclass(frozen=True)
class Prediction:
    mean: float
    variance: float | None
    variance_defined: bool
    per_expert_mean: np.ndarray
    gate: np.ndarray


def xi_factor(dof: float) -> float:
    """xi(v) = sqrt(v/pi) * Gamma((v-1)/2)/Gamma(v/2), the skew-t mean factor."""
    if dof <= 1.0:
        raise UndefinedMomentError(f"xi factor needs dof > 1, got {dof}")
    return math.sqrt(dof / math.pi) * math.exp(log_gamma((dof - 1.0) / 2.0) - log_gamma(dof / 2.0))


def _expert_means(X: np.ndarray, psi: ModelParams) -> np.ndarray:
    """(n, K) expert predictive means; raises if some needed mean is undefined."""
    n = X.shape[0]
    K = psi.n_components
    out = np.empty((n, K))
    for k, ex in enumerate(psi.experts):
        base = X @ ex.beta
        if psi.family == "nmoe":
            out[:, k] = base
        else:
            if ex.dof <= 1.0:
                # Caller decides whether this component carries mass.
                out[:, k] = np.nan
            else:
                out[:, k] = base + math.sqrt(ex.sigma2) * ex.delta() * xi_factor(ex.dof)
    return out


def _expert_variances(psi: ModelParams) -> np.ndarray:
    """Length-K expert variances; NaN where undefined (dof <= 2)."""
    out = np.empty(psi.n_components)
    for k, ex in enumerate(psi.experts):
        if psi.family == "nmoe":
            out[k] = ex.sigma2
        elif ex.dof > 2.0:
            xi = xi_factor(ex.dof)
            delta = ex.delta()
            out[k] = (ex.dof / (ex.dof - 2.0) - delta * delta * xi * xi) * ex.sigma2
        else:
            out[k] = np.nan
    return out


def predict(x: np.ndarray, r: np.ndarray, psi: ModelParams) -> Prediction:
    """Predictive mean and (when defined) variance at one covariate point.

    Components whose gate mass is below 1e-12 are ignored when deciding
    whether moments exist. An undefined mean (some massive component with
    dof <= 1) raises; an undefined variance only clears ``variance_defined``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    gate = gating_probs(np.asarray(r, dtype=float), psi.gating)
    active = gate > GATE_MASS_FLOOR

    means = _expert_means(x[None, :], psi)[0]
    bad_mean = active & ~np.isfinite(means)
    if np.any(bad_mean):
        raise UndefinedMomentError(
            f"mean undefined: component(s) {np.flatnonzero(bad_mean).tolist()} have dof <= 1"
        )
    means = np.where(np.isfinite(means), means, 0.0)

    variances = _expert_variances(psi)
    variance_defined = bool(np.all(np.isfinite(variances[active])))
    mean = float(gate @ means)
    if variance_defined:
        v = np.where(active, variances, 0.0)
        second = gate @ (means * means + v)
        variance = float(max(second - mean * mean, 0.0))
    else:
        variance = None
    return Prediction(
        mean=mean,
        variance=variance,
        variance_defined=variance_defined,
        per_expert_mean=means,
        gate=gate,
    )


def mixture_mean(X: np.ndarray, R: np.ndarray, psi: ModelParams) -> np.ndarray:
    """Vectorized predictive mean over the rows of (X, R)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    gates = np.exp(gating_log_probs(R, psi.gating))
    means = _expert_means(X, psi)
    active = gates > GATE_MASS_FLOOR
    bad = active & ~np.isfinite(means)
    if np.any(bad):
        comps = sorted(set(np.nonzero(bad)[1].tolist()))
        raise UndefinedMomentError(f"mean undefined: component(s) {comps} have dof <= 1")
    means = np.where(np.isfinite(means), means, 0.0)
    return np.sum(gates * means, axis=1)


def mixture_mean_variance(X: np.ndarray, R: np.ndarray, psi: ModelParams):
    """Vectorized predictive mean and variance; raises where variance is undefined."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    gates = np.exp(gating_log_probs(R, psi.gating))
    means = _expert_means(X, psi)
    variances = _expert_variances(psi)
    active = gates > GATE_MASS_FLOOR

    bad_mean = active & ~np.isfinite(means)
    if np.any(bad_mean):
        comps = sorted(set(np.nonzero(bad_mean)[1].tolist()))
        raise UndefinedMomentError(f"mean undefined: component(s) {comps} have dof <= 1")
    bad_var = active & ~np.isfinite(variances)[None, :]
    if np.any(bad_var):
        comps = sorted(set(np.nonzero(bad_var)[1].tolist()))
        raise UndefinedMomentError(f"variance undefined: component(s) {comps} have dof <= 2")

    means = np.where(np.isfinite(means), means, 0.0)
    v = np.where(np.isfinite(variances), variances, 0.0)[None, :]
    mean = np.sum(gates * means, axis=1)
    second = np.sum(gates * (means * means + v), axis=1)
    return mean, np.maximum(second - mean * mean, 0.0)


def predict_band(grid: Dataset, psi: ModelParams, width: float = 2.0):
    """(mean, lower, upper) over a grid, the band being mean +/- width * sd."""
    mean, var = mixture_mean_variance(grid.X, grid.R, psi)
    half = width * np.sqrt(var)
    return mean, mean - half, mean + half


def map_partition(tau: np.ndarray) -> np.ndarray:
    """Hard 1-based labels by the maximum-posterior rule; ties to the smallest index."""
    tau = np.atleast_2d(np.asarray(tau, dtype=float))
    return np.argmax(tau, axis=1) + 1
