"""Synthetic data generation, outlier contamination and the error metrics
behind the two benchmark studies (estimation consistency and robustness to
outliers).

The benchmark truth is a two-component model with crossing linear means
y = x and y = -x on x ~ U(-1, 1), gate logit 10x, scale 0.1, and for the
skew-t family skewness (3, -10) and degrees of freedom (5, 7).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from .ecm import FitConfig, FitError, multi_start_fit, permute_components
from .model import Dataset, ExpertParams, GatingParams, ModelParams, gating_log_probs
from .predict import UndefinedMomentError, mixture_mean

__all__ = [
    "SimConfig",
    "benchmark_truth",
    "generate",
    "inject_outliers",
    "regression_mean",
    "mse_mean_function",
    "mse_parameters",
    "align_components",
    "consistency_experiment",
    "robustness_experiment",
]

OUTLIER_RESPONSE = -2.0


@dataclass(frozen=True)
class SimConfig:
    """Generator settings: truth, sample size, outlier fraction and seed.

    Covariates are always drawn uniformly on (-1, 1) and enter both the
    experts and the gate as (1, x).
    """

    truth: ModelParams
    n: int
    outlier_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0.0 <= self.outlier_rate <= 1.0:
            raise ValueError("outlier_rate must lie in [0, 1]")


def benchmark_truth(family: str) -> ModelParams:
    """The two-component generating model used by the simulation studies."""
    alpha = GatingParams(np.array([[0.0, 10.0]]))
    if family == "nmoe":
        experts = (
            ExpertParams(beta=np.array([0.0, 1.0]), sigma2=0.01),
            ExpertParams(beta=np.array([0.0, -1.0]), sigma2=0.01),
        )
    elif family == "stmoe":
        experts = (
            ExpertParams(beta=np.array([0.0, 1.0]), sigma2=0.01, skew=3.0, dof=5.0),
            ExpertParams(beta=np.array([0.0, -1.0]), sigma2=0.01, skew=-10.0, dof=7.0),
        )
    else:
        raise ValueError(f"unknown family {family!r}")
    return ModelParams(family=family, gating=alpha, experts=experts)


def generate(cfg: SimConfig):
    """Draw a dataset from the generating model; returns (Dataset, labels).

    Labels are 1-based component indices. Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(cfg.seed)
    truth = cfg.truth
    n = cfg.n

    x = rng.uniform(-1.0, 1.0, size=n)
    design = np.column_stack([np.ones(n), x])
    gates = np.exp(gating_log_probs(design, truth.gating))

    u = rng.random(n)
    z = (u[:, None] > np.cumsum(gates, axis=1)).sum(axis=1)

    beta = np.stack([ex.beta for ex in truth.experts])
    sigma = np.sqrt([ex.sigma2 for ex in truth.experts])
    mean = np.einsum("ij,ij->i", design, beta[z])

    if truth.family == "nmoe":
        y = mean + sigma[z] * rng.standard_normal(n)
    else:
        delta = np.array([ex.delta() for ex in truth.experts])
        dof = np.array([ex.dof for ex in truth.experts])
        u0 = rng.standard_normal(n)
        e = rng.standard_normal(n)
        w = rng.gamma(shape=0.5 * dof[z], scale=2.0 / dof[z])
        sn = delta[z] * np.abs(u0) + np.sqrt(1.0 - delta[z] ** 2) * e
        y = mean + sigma[z] * sn / np.sqrt(w)

    return Dataset(y=y, X=design, R=design.copy()), z + 1


def inject_outliers(data: Dataset, c: float, seed) -> Dataset:
    """Replace each row independently with probability ``c`` by an outlier:
    a fresh x ~ U(-1, 1) with the response pinned at -2. Untouched rows are
    copied bit for bit."""
    if not 0.0 <= c <= 1.0:
        raise ValueError("c must lie in [0, 1]")
    if data.p != 2 or data.q != 2:
        raise ValueError("outlier injection assumes the (1, x) covariate convention")
    rng = np.random.default_rng(seed)
    mask = rng.random(data.n) < c
    x_new = rng.uniform(-1.0, 1.0, size=data.n)

    y = data.y.copy()
    X = data.X.copy()
    R = data.R.copy()
    y[mask] = OUTLIER_RESPONSE
    X[mask, 1] = x_new[mask]
    R[mask, 1] = x_new[mask]
    return Dataset(y=y, X=X, R=R)


def regression_mean(X, R, psi: ModelParams) -> np.ndarray:
    """Gating-mixed regression lines sum_k pi_k(r) beta_k'x (no skew offset)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    gates = np.exp(gating_log_probs(R, psi.gating))
    lines = np.stack([X @ ex.beta for ex in psi.experts], axis=1)
    return np.sum(gates * lines, axis=1)


def mse_mean_function(
    truth: ModelParams, est: ModelParams, data: Dataset, mean: str = "predictive"
) -> float:
    """Mean squared gap between the two models' mean functions over the rows.

    ``mean="predictive"`` compares full predictive means (skew-t experts
    contribute their sigma*delta*xi(dof) offset and need dof > 1);
    ``mean="regression"`` compares the gating-mixed regression lines, the
    quantity whose stability the robustness benchmark tracks.
    """
    if mean == "predictive":
        m_truth = mixture_mean(data.X, data.R, truth)
        m_est = mixture_mean(data.X, data.R, est)
    elif mean == "regression":
        m_truth = regression_mean(data.X, data.R, truth)
        m_est = regression_mean(data.X, data.R, est)
    else:
        raise ValueError(f"unknown mean kind {mean!r}")
    diff = m_truth - m_est
    return float(np.mean(diff * diff))


def align_components(truth: ModelParams, est: ModelParams) -> ModelParams:
    """Permute ``est``'s components to best match ``truth``'s regression
    coefficients (minimum total squared beta distance)."""
    if truth.n_components != est.n_components:
        raise ValueError("component counts differ")
    beta_t = np.stack([ex.beta for ex in truth.experts])
    beta_e = np.stack([ex.beta for ex in est.experts])
    K = truth.n_components
    best_order, best_cost = None, np.inf
    for perm in itertools.permutations(range(K)):
        cost = float(np.sum((beta_t - beta_e[list(perm)]) ** 2))
        if cost < best_cost:
            best_cost, best_order = cost, perm
    return permute_components(est, list(best_order))


def _param_coordinates(psi: ModelParams) -> dict[str, float]:
    """Flatten a model into named scalar coordinates (sigma, not sigma^2)."""
    out: dict[str, float] = {}
    for k in range(psi.n_components - 1):
        for j, v in enumerate(psi.gating.alpha[k]):
            out[f"alpha{k + 1}{j}"] = float(v)
    for k, ex in enumerate(psi.experts, start=1):
        for j, v in enumerate(ex.beta):
            out[f"beta{k}{j}"] = float(v)
        out[f"sigma{k}"] = math.sqrt(ex.sigma2)
        if psi.family == "stmoe":
            out[f"skew{k}"] = float(ex.skew)
            out[f"dof{k}"] = float(ex.dof)
    return out


def mse_parameters(truth: ModelParams, est: ModelParams) -> dict[str, float]:
    """Per-coordinate squared estimation errors after label alignment."""
    if truth.family != est.family:
        raise ValueError("families differ")
    est = align_components(truth, est)
    t = _param_coordinates(truth)
    e = _param_coordinates(est)
    if t.keys() != e.keys():
        raise ValueError("parameter shapes differ")
    return {name: (t[name] - e[name]) ** 2 for name in t}


def _study_config(cfg: FitConfig | None) -> FitConfig:
    # Studies run many fits; default to a lighter protocol than single fits.
    return cfg or FitConfig(n_starts=5, max_iter=400, tol=1e-6)


def consistency_experiment(
    family: str = "stmoe",
    n_grid=(50, 100, 200, 500, 1000),
    trials: int = 20,
    seed: int = 0,
    cfg: FitConfig | None = None,
):
    """Average per-coordinate squared errors of the fitted model against the
    benchmark truth, one row per sample size."""
    cfg = _study_config(cfg)
    truth = benchmark_truth(family)
    rows = []
    for n in n_grid:
        sums: dict[str, float] = {}
        count = 0
        for trial in range(trials):
            s_data, s_fit = np.random.SeedSequence([seed, n, trial]).generate_state(2)
            data, _ = generate(SimConfig(truth=truth, n=n, seed=int(s_data)))
            try:
                fm = multi_start_fit(data, truth.n_components, family, replace(cfg, seed=int(s_fit)))
            except FitError:
                continue
            for name, sq in mse_parameters(truth, fm.params).items():
                sums[name] = sums.get(name, 0.0) + sq
            count += 1
        if count == 0:
            continue
        row = {"n": n, "trials": count}
        row.update({name: s / count for name, s in sums.items()})
        rows.append(row)
    return rows


def robustness_experiment(
    gen_family: str = "nmoe",
    c_grid=(0.0, 0.01, 0.02, 0.03, 0.04, 0.05),
    replications: int = 10,
    n: int = 500,
    seed: int = 0,
    cfg: FitConfig | None = None,
):
    """Median regression-mean-function MSE of each fitted family under
    contamination, one row per (outlier rate, fitted family).

    The benchmark compares the gating-mixed regression lines of the fitted
    and generating models: that is the mean function whose stability the
    outlier study is about, and it stays defined however heavy the fitted
    tails get. Replications whose fit fails outright are dropped from the
    median and counted in the row.
    """
    cfg = _study_config(cfg)
    truth = benchmark_truth(gen_family)
    rows = []
    for c in c_grid:
        results: dict[str, list[float]] = {"nmoe": [], "stmoe": []}
        dropped: dict[str, int] = {"nmoe": 0, "stmoe": 0}
        for rep in range(replications):
            s_data, s_out, s_fit_n, s_fit_st = np.random.SeedSequence(
                [seed, int(round(c * 1000)), rep]
            ).generate_state(4)
            data, _ = generate(SimConfig(truth=truth, n=n, seed=int(s_data)))
            noisy = inject_outliers(data, c, int(s_out)) if c > 0 else data
            for fam, s_fit in (("nmoe", s_fit_n), ("stmoe", s_fit_st)):
                try:
                    fm = multi_start_fit(noisy, 2, fam, replace(cfg, seed=int(s_fit)))
                    results[fam].append(
                        mse_mean_function(truth, fm.params, noisy, mean="regression")
                    )
                except (FitError, UndefinedMomentError):
                    dropped[fam] += 1
        for fam in ("nmoe", "stmoe"):
            if results[fam]:
                rows.append(
                    {
                        "c": c,
                        "fit_family": fam,
                        "median_mse": float(np.median(results[fam])),
                        "mean_mse": float(np.mean(results[fam])),
                        "replications": len(results[fam]),
                        "dropped": dropped[fam],
                    }
                )
    return rows
