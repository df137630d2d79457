"""E-step quantities: posterior memberships and conditional latent moments.

For the skew-t family the complete-data representation has, per observation
and component, a Gamma mixing weight W and a half-normal skew latent; the
conditional expectations collected here are

    tau  — posterior component membership,
    w    — E[W | y, component],
    e1   — E[W * latent | y, component],
    e2   — E[W * latent^2 | y, component],
    e3   — E[log W | y, component], one-step-late form (the intractable
           integral correction is dropped),

together with the standardized residuals d and the t-CDF argument m_arg
used by both w and e3. The normalizer in the density-ratio terms of e1 and
e2 is the component's own conditional density of y (not the mixture).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, logsumexp

from .model import Dataset, ModelParams, expert_log_densities, gating_log_probs
from .specfun import student_t_logcdf, student_t_logpdf

__all__ = ["EStepMoments", "posterior_tau", "latent_moments"]


@dataclass(frozen=True)
class EStepMoments:
    """Per-observation, per-component E-step matrices, all shaped (n, K)."""

    tau: np.ndarray
    w: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    e3: np.ndarray
    d: np.ndarray
    m_arg: np.ndarray


def _posterior_from_log_joint(log_joint: np.ndarray) -> np.ndarray:
    row_norm = logsumexp(log_joint, axis=1)
    bad = ~np.isfinite(row_norm)
    if np.any(bad):
        raise ValueError(
            f"mixture density vanished at row(s) {np.flatnonzero(bad).tolist()}"
        )
    return np.exp(log_joint - row_norm[:, None])


def posterior_tau(data: Dataset, psi: ModelParams) -> np.ndarray:
    """Posterior membership probabilities, shape (n, K), rows summing to 1."""
    log_joint = gating_log_probs(data.R, psi.gating) + expert_log_densities(data, psi)
    return _posterior_from_log_joint(log_joint)


def latent_moments(data: Dataset, psi: ModelParams) -> EStepMoments:
    """All E-step matrices for a skew-t mixture of experts."""
    if psi.family != "stmoe":
        raise ValueError(f"latent moments are defined for the stmoe family, got {psi.family!r}")
    log_dens = expert_log_densities(data, psi)
    log_joint = gating_log_probs(data.R, psi.gating) + log_dens
    tau = _posterior_from_log_joint(log_joint)
    return _moments_given_densities(data, psi, log_dens, tau)


def _moments_given_densities(
    data: Dataset,
    psi: ModelParams,
    log_dens: np.ndarray,
    tau: np.ndarray,
) -> EStepMoments:
    """Moment matrices with the component log densities already in hand."""
    n, K = tau.shape
    y = data.y

    d = np.empty((n, K))
    m_arg = np.empty((n, K))
    w = np.empty((n, K))
    e1 = np.empty((n, K))
    e2 = np.empty((n, K))
    e3 = np.empty((n, K))

    for k, ex in enumerate(psi.experts):
        nu = float(ex.dof)
        sigma = np.sqrt(ex.sigma2)
        delta = ex.delta()
        one_m_d2 = 1.0 - delta * delta

        resid = y - data.X @ ex.beta
        dk = resid / sigma
        dk2 = dk * dk
        mk = ex.skew * dk * np.sqrt((nu + 1.0) / (nu + dk2))

        # E[W | y]: t-EM weight times a ratio of shifted t CDFs.
        log_t_cdf_1 = student_t_logcdf(mk, nu + 1.0)
        log_t_cdf_3 = student_t_logcdf(mk * np.sqrt((nu + 3.0) / (nu + 1.0)), nu + 3.0)
        wk = ((nu + 1.0) / (nu + dk2)) * np.exp(log_t_cdf_3 - log_t_cdf_1)

        # Shared density-ratio term of e1 and e2, kept in logs until the end.
        log_ratio = (
            0.5 * np.log(one_m_d2)
            - np.log(np.pi)
            - log_dens[:, k]
            - (0.5 * nu + 1.0) * np.log1p(dk2 / (nu * one_m_d2))
        )
        ratio = np.exp(log_ratio)

        e1k = delta * resid * wk + ratio
        e2k = delta * delta * resid * resid * wk + one_m_d2 * ex.sigma2 + delta * resid * ratio

        # One-step-late E[log W | y]: exact for skew == 0, approximate otherwise.
        hazard = np.exp(student_t_logpdf(mk, nu + 1.0) - log_t_cdf_1)
        e3k = (
            wk
            - np.log(0.5 * (nu + dk2))
            - (nu + 1.0) / (nu + dk2)
            + digamma(0.5 * (nu + 1.0))
            + ex.skew * dk * (dk2 - 1.0) / np.sqrt((nu + 1.0) * (nu + dk2) ** 3) * hazard
        )

        d[:, k] = dk
        m_arg[:, k] = mk
        w[:, k] = wk
        e1[:, k] = e1k
        e2[:, k] = np.maximum(e2k, 0.0)
        e3[:, k] = e3k

    return EStepMoments(tau=tau, w=w, e1=e1, e2=e2, e3=e3, d=d, m_arg=m_arg)
