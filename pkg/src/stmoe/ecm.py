"""ECM fitting driver: initialization, E/CM alternation, stopping rules,
multi-start selection and canonical component ordering.

One update cycle is: posterior memberships and latent moments (E), IRLS on
the gating coefficients (CM-1), closed-form expert regression (CM-2), the
skewness root (CM-3) and the degrees-of-freedom root (CM-4). Constraints can
pin the skewness at zero (t-experts) and/or the degrees of freedom at a fixed
value; with skew 0 and a huge dof the skew-t family reproduces the normal
one to numerical accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from . import mstep
from .dist import skew_from_delta
from .estep import _moments_given_densities
from .model import (
    Constraints,
    Dataset,
    ExpertParams,
    GatingParams,
    ModelParams,
    expert_log_densities,
    gating_log_probs,
)

__all__ = ["FitConfig", "FittedModel", "FitError", "initialize", "fit", "multi_start_fit"]


class FitError(RuntimeError):
    """Raised when a fit (or every start of a multi-start run) fails."""


@dataclass(frozen=True)
class FitConfig:
    """Knobs of the ECM driver; the defaults follow the benchmark protocol."""

    tol: float = 1e-6
    max_iter: int = 1500
    n_starts: int = 10
    seed: int = 0
    nu_min: float = 0.5
    nu_max: float = 200.0
    fix_skew_zero: bool = False
    fix_dof: float | None = None
    irls: mstep.IrlsConfig = field(default_factory=mstep.IrlsConfig)
    sigma2_floor_frac: float = 1e-10
    empty_frac: float = 1e-6
    # multi-start treats solutions with a component variance below this
    # fraction of var(y) as spurious likelihood spikes (e.g. a component
    # collapsed onto a zero-variance cluster of repeated values), and draws
    # up to rescue_starts extra starts when every regular start was spurious
    spurious_sigma2_frac: float = 1e-4
    rescue_starts: int = 20

    def __post_init__(self):
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1 or self.n_starts < 1:
            raise ValueError("max_iter and n_starts must be >= 1")

    def constraints(self) -> Constraints:
        return Constraints(fix_skew_zero=self.fix_skew_zero, fix_dof=self.fix_dof)


@dataclass(frozen=True)
class FittedModel:
    params: ModelParams
    loglik: float
    loglik_trace: np.ndarray
    tau: np.ndarray
    n_iter: int
    converged: bool
    start_index: int = 0


def _ols(X: np.ndarray, y: np.ndarray):
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    return beta, float(np.mean(resid * resid))


def initialize(
    data: Dataset,
    K: int,
    family: str,
    seed,
    null_gating: bool = False,
    heavy_tails: bool = False,
    constraints: Constraints = Constraints(),
) -> ModelParams:
    """Random-partition starting point.

    Gating coefficients are small random normals (or all zero when
    ``null_gating``); each expert gets the OLS fit of its random cluster;
    for skew-t experts the dof is uniform on [1, 200] and the skewness comes
    from a uniform delta in (-1, 1). With ``heavy_tails`` every skew-t expert
    instead starts symmetric with dof 2, a start that lets all components
    absorb outliers from the first iterations instead of whichever one
    happened to draw the smallest dof.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if data.n < K * data.p:
        raise ValueError(f"need at least K*p = {K * data.p} rows, got {data.n}")
    rng = np.random.default_rng(seed)

    if null_gating or K == 1:
        alpha = np.zeros((K - 1, data.q))
    else:
        alpha = 0.1 * rng.standard_normal((K - 1, data.q))

    var_y = float(np.var(data.y))
    experts = []
    for _ in range(50):
        labels = rng.integers(0, K, size=data.n)
        counts = np.bincount(labels, minlength=K)
        if np.all(counts >= data.p):
            break
    else:
        raise FitError(f"could not draw a partition with >= {data.p} points per cluster")

    for k in range(K):
        rows = labels == k
        beta, msr = _ols(data.X[rows], data.y[rows])
        sigma2 = msr if msr > 0.0 else max(var_y, 1e-12)
        if family == "nmoe":
            experts.append(ExpertParams(beta=beta, sigma2=sigma2))
        else:
            if heavy_tails:
                dof, skew = 2.0, 0.0
            else:
                dof = float(rng.uniform(1.0, 200.0))
                delta = float(rng.uniform(-1.0, 1.0))
                skew = skew_from_delta(np.clip(delta, -1.0 + 1e-12, 1.0 - 1e-12))
            if constraints.fix_skew_zero:
                skew = 0.0
            if constraints.fix_dof is not None:
                dof = float(constraints.fix_dof)
            experts.append(ExpertParams(beta=beta, sigma2=sigma2, skew=skew, dof=dof))

    return ModelParams(
        family=family,
        gating=GatingParams(alpha),
        experts=tuple(experts),
        constraints=constraints,
    )


def _order_components(params: ModelParams, tau: np.ndarray):
    """Sort components by intercept so repeated runs are comparable."""
    order = np.argsort([ex.beta[0] for ex in params.experts], kind="stable")
    return permute_components(params, order), tau[:, order]


def permute_components(params: ModelParams, order) -> ModelParams:
    """Reindex components by ``order`` and re-zero the last gating row."""
    order = list(order)
    K = params.n_components
    if sorted(order) != list(range(K)):
        raise ValueError(f"order must be a permutation of 0..{K - 1}")
    full_alpha = np.vstack([params.gating.alpha, np.zeros((1, params.q))])
    permuted = full_alpha[order]
    alpha = permuted[:-1] - permuted[-1]
    return ModelParams(
        family=params.family,
        gating=GatingParams(alpha),
        experts=tuple(params.experts[j] for j in order),
        constraints=params.constraints,
    )


def _reseed_component(data: Dataset, row_ll: np.ndarray, expert: ExpertParams, p: int):
    """Refit a starved component on the least-explained 3% of the data."""
    n_take = max(int(np.ceil(0.03 * data.n)), p + 1)
    rows = np.argsort(row_ll)[:n_take]
    beta, msr = _ols(data.X[rows], data.y[rows])
    sigma2 = msr if msr > 0.0 else float(np.var(data.y))
    return replace(expert, beta=beta, sigma2=sigma2)


def _ecm_update(data: Dataset, params: ModelParams, cfg: FitConfig, log_joint, log_dens, row_ll):
    tau = np.exp(log_joint - row_ll[:, None])
    n, K = tau.shape
    sigma2_min = cfg.sigma2_floor_frac * float(np.var(data.y))

    if params.family == "stmoe":
        moments = _moments_given_densities(data, params, log_dens, tau)
    else:
        moments = None

    report = mstep.irls_update_gating(tau, data.R, params.gating, cfg.irls)

    starved = tau.sum(axis=0) < cfg.empty_frac * n
    experts = []
    for k, ex in enumerate(params.experts):
        if starved[k]:
            experts.append(_reseed_component(data, row_ll, ex, data.p))
            continue
        if params.family == "nmoe":
            beta, sigma2 = mstep.normal_expert_update(data, tau, k, sigma2_min)
            experts.append(ExpertParams(beta=beta, sigma2=sigma2))
            continue
        delta_k = ex.delta()
        beta, sigma2 = mstep.update_expert_regression(data, moments, k, delta_k, sigma2_min)
        if cfg.fix_skew_zero:
            skew = 0.0
        else:
            delta_new, _stalled = mstep.solve_skewness(
                data, moments, k, beta, sigma2, delta_prev=delta_k
            )
            skew = skew_from_delta(delta_new)
        if cfg.fix_dof is not None:
            dof = float(cfg.fix_dof)
        else:
            dof = mstep.solve_dof(data, moments, k, cfg.nu_min, cfg.nu_max)
        experts.append(ExpertParams(beta=beta, sigma2=sigma2, skew=skew, dof=dof))

    return ModelParams(
        family=params.family,
        gating=report.alpha_new,
        experts=tuple(experts),
        constraints=params.constraints,
    )


def fit(
    data: Dataset,
    K: int,
    family: str,
    cfg: FitConfig | None = None,
    init: ModelParams | None = None,
    start_index: int = 0,
) -> FittedModel:
    """Run the ECM loop to convergence from one starting point.

    Stops when the relative log-likelihood change drops below ``cfg.tol``
    (denominator floored at 1) or after ``cfg.max_iter`` update cycles.
    Raises :class:`FitError` if the log-likelihood becomes non-finite.
    """
    cfg = cfg or FitConfig()
    if init is None:
        init = initialize(data, K, family, cfg.seed, constraints=cfg.constraints())
    if init.n_components != K or init.family != family:
        raise ValueError("init does not match the requested K/family")

    params = init
    trace: list[float] = []
    converged = False
    n_iter = 0
    tau = None

    for m in range(cfg.max_iter + 1):
        log_dens = expert_log_densities(data, params)
        log_joint = gating_log_probs(data.R, params.gating) + log_dens
        row_ll = logsumexp(log_joint, axis=1)
        ll = float(row_ll.sum())
        if not np.isfinite(ll):
            raise FitError(f"non-finite log-likelihood at iteration {m}")
        trace.append(ll)
        if m > 0 and abs(ll - trace[-2]) / max(abs(trace[-2]), 1.0) < cfg.tol:
            converged = True
            tau = np.exp(log_joint - row_ll[:, None])
            break
        if m == cfg.max_iter:
            tau = np.exp(log_joint - row_ll[:, None])
            break
        params = _ecm_update(data, params, cfg, log_joint, log_dens, row_ll)
        n_iter += 1

    params, tau = _order_components(params, tau)
    return FittedModel(
        params=params,
        loglik=trace[-1],
        loglik_trace=np.asarray(trace),
        tau=tau,
        n_iter=n_iter,
        converged=converged,
        start_index=start_index,
    )


def _is_spurious(candidate: FittedModel, var_y: float, cfg: FitConfig) -> bool:
    """Likelihood-spike detection: some component variance collapsed far
    below the data scale (mixture likelihoods are unbounded in that
    direction, so raw maximization would always pick such solutions)."""
    floor = cfg.spurious_sigma2_frac * var_y
    return any(ex.sigma2 < floor for ex in candidate.params.experts)


def multi_start_fit(data: Dataset, K: int, family: str, cfg: FitConfig | None = None) -> FittedModel:
    """Best of ``cfg.n_starts`` independent fits (ties go to the lowest start).

    Start 0 uses the all-zero gating initialization; start 1 (skew-t family,
    when present) additionally starts every expert symmetric and heavy-tailed
    so that one basin with shared outlier absorption is always explored. The
    remaining starts use seeds derived deterministically from ``cfg.seed``.
    Converged, non-spurious solutions are preferred (in that order of
    importance); a start only counts as failed if its likelihood diverged.
    """
    cfg = cfg or FitConfig()
    var_y = float(np.var(data.y))
    total = cfg.n_starts + max(cfg.rescue_starts, 0)
    seeds = np.random.SeedSequence(cfg.seed).generate_state(total)
    best: FittedModel | None = None
    best_rank: tuple | None = None
    errors: list[str] = []
    for s in range(total):
        if s >= cfg.n_starts and best_rank is not None and best_rank[0]:
            break  # rescue rounds only run while everything found is spurious
        try:
            init = initialize(
                data,
                K,
                family,
                seed=int(seeds[s]),
                null_gating=(s == 0 or s == 1),
                heavy_tails=(s == 1),
                constraints=cfg.constraints(),
            )
            candidate = fit(data, K, family, cfg, init=init, start_index=s)
        except (FitError, np.linalg.LinAlgError) as exc:
            errors.append(f"start {s}: {exc}")
            continue
        rank = (
            not _is_spurious(candidate, var_y, cfg),
            candidate.converged,
            candidate.loglik,
        )
        if best_rank is None or rank > best_rank:
            best, best_rank = candidate, rank
    if best is None:
        raise FitError("every start failed: " + "; ".join(errors))
    return best
