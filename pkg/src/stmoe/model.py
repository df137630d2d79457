"""Model containers and likelihood evaluation for mixtures of experts.

Two families share one representation:

* ``"nmoe"``  — normal experts, parameters (beta, sigma2) per component.
* ``"stmoe"`` — skew-t experts, parameters (beta, sigma2, skew, dof).

Gating is multinomial-logistic in the gating covariates r with the K-th
coefficient vector structurally zero (it is never stored).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from .dist import SkewTParams, delta_from_skew, skew_t_logpdf
from .specfun import normal_logpdf

__all__ = [
    "Dataset",
    "GatingParams",
    "ExpertParams",
    "Constraints",
    "ModelParams",
    "gating_probs",
    "gating_log_probs",
    "expert_log_densities",
    "component_log_joint",
    "mixture_logpdf",
    "log_likelihood",
]

FAMILIES = ("nmoe", "stmoe")


@dataclass(frozen=True)
class Dataset:
    """Responses with expert covariates X and gating covariates R, row aligned.

    By the linear-expert convention the first column of X and R is the
    intercept, but any design matrices are accepted.
    """

    y: np.ndarray
    X: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        if y.ndim != 1:
            raise ValueError("y must be one-dimensional")
        if y.shape[0] < 1:
            raise ValueError("dataset must contain at least one row")
        if X.shape[0] != y.shape[0] or R.shape[0] != y.shape[0]:
            raise ValueError(
                f"row mismatch: y has {y.shape[0]} rows, X {X.shape[0]}, R {R.shape[0]}"
            )
        for name, arr in (("y", y), ("X", X), ("R", R)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains NaN or Inf entries")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "R", R)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.R.shape[1]


@dataclass(frozen=True)
class GatingParams:
    """Logistic coefficients, shape (K-1, q); the K-th row is implicitly zero."""

    alpha: np.ndarray

    def __post_init__(self):
        alpha = np.atleast_2d(np.asarray(self.alpha, dtype=float))
        if not np.all(np.isfinite(alpha)):
            raise ValueError("alpha must be finite")
        object.__setattr__(self, "alpha", alpha)

    @property
    def n_components(self) -> int:
        return self.alpha.shape[0] + 1

    @property
    def q(self) -> int:
        return self.alpha.shape[1]

    @staticmethod
    def null(n_components: int, q: int) -> "GatingParams":
        if n_components < 1:
            raise ValueError("need at least one component")
        return GatingParams(np.zeros((n_components - 1, q)))


@dataclass(frozen=True)
class ExpertParams:
    """One expert: linear mean beta'x, variance sigma2, and for the skew-t
    family the skewness and degrees of freedom (None for normal experts)."""

    beta: np.ndarray
    sigma2: float
    skew: float | None = None
    dof: float | None = None

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if not np.all(np.isfinite(beta)):
            raise ValueError("beta must be finite")
        if not (self.sigma2 > 0.0 and math.isfinite(self.sigma2)):
            raise ValueError(f"sigma2 must be positive and finite, got {self.sigma2}")
        if self.dof is not None and not (self.dof > 0.0):
            raise ValueError(f"dof must be positive, got {self.dof}")
        object.__setattr__(self, "beta", beta)

    def delta(self) -> float:
        if self.skew is None:
            return 0.0
        return delta_from_skew(self.skew)


@dataclass(frozen=True)
class Constraints:
    """Optional restrictions honoured by the ECM driver."""

    fix_skew_zero: bool = False
    fix_dof: float | None = None


@dataclass(frozen=True)
class ModelParams:
    """Full parameter set of a mixture of experts."""

    family: str
    gating: GatingParams
    experts: tuple[ExpertParams, ...]
    constraints: Constraints = field(default_factory=Constraints)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        experts = tuple(self.experts)
        if len(experts) != self.gating.n_components:
            raise ValueError(
                f"{len(experts)} experts but gating implies {self.gating.n_components} components"
            )
        if self.family == "stmoe":
            for k, ex in enumerate(experts):
                if ex.skew is None or ex.dof is None:
                    raise ValueError(f"stmoe expert {k} needs skew and dof")
        object.__setattr__(self, "experts", experts)

    @property
    def n_components(self) -> int:
        return len(self.experts)

    @property
    def p(self) -> int:
        return self.experts[0].beta.shape[0]

    @property
    def q(self) -> int:
        return self.gating.q

    def with_experts(self, experts) -> "ModelParams":
        return replace(self, experts=tuple(experts))


def gating_log_probs(R: np.ndarray, gp: GatingParams) -> np.ndarray:
    """Row-wise log pi_k(r; alpha), shape (n, K)."""
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if R.shape[1] != gp.q:
        raise ValueError(f"R has {R.shape[1]} columns, gating expects {gp.q}")
    logits = np.hstack([R @ gp.alpha.T, np.zeros((R.shape[0], 1))])
    return logits - logsumexp(logits, axis=1, keepdims=True)


def gating_probs(r: np.ndarray, gp: GatingParams) -> np.ndarray:
    """Mixing proportions pi(r; alpha) for one covariate vector r."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    pi = np.exp(gating_log_probs(r[None, :], gp)[0])
    return pi / pi.sum()


def expert_log_densities(data: Dataset, psi: ModelParams) -> np.ndarray:
    """log f_k(y_i | x_i) for every row and component, shape (n, K)."""
    if data.p != psi.p:
        raise ValueError(f"X has {data.p} columns, experts expect {psi.p}")
    n, K = data.n, psi.n_components
    out = np.empty((n, K))
    for k, ex in enumerate(psi.experts):
        mean = data.X @ ex.beta
        if psi.family == "nmoe":
            out[:, k] = normal_logpdf((data.y - mean) / math.sqrt(ex.sigma2)) - 0.5 * math.log(
                ex.sigma2
            )
        else:
            st = SkewTParams(mu=0.0, sigma2=ex.sigma2, skew=ex.skew, dof=ex.dof)
            out[:, k] = skew_t_logpdf(data.y - mean, st)
    return out


def component_log_joint(data: Dataset, psi: ModelParams) -> np.ndarray:
    """log pi_k(r_i) + log f_k(y_i | x_i), the building block of everything."""
    return gating_log_probs(data.R, psi.gating) + expert_log_densities(data, psi)


def mixture_logpdf(y: float, x: np.ndarray, r: np.ndarray, psi: ModelParams) -> float:
    """log sum_k pi_k(r) f_k(y | x) for a single observation."""
    data = Dataset(
        y=np.asarray([y], dtype=float),
        X=np.atleast_1d(np.asarray(x, dtype=float))[None, :],
        R=np.atleast_1d(np.asarray(r, dtype=float))[None, :],
    )
    return float(logsumexp(component_log_joint(data, psi), axis=1)[0])


def log_likelihood(data: Dataset, psi: ModelParams) -> float:
    """Observed-data log-likelihood: sum of the per-row mixture log densities."""
    return float(logsumexp(component_log_joint(data, psi), axis=1).sum())
