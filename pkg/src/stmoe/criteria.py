"""Information criteria and selection of the number of experts.

AIC and BIC penalize the observed log-likelihood; ICL penalizes the
complete-data log-likelihood evaluated with the MAP hard assignments
substituted for the component labels (mixing latents integrated out).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .ecm import FitConfig, FitError, FittedModel, multi_start_fit
from .model import Dataset, component_log_joint

__all__ = ["CriteriaRow", "SelectionResult", "free_params", "criteria", "select_k"]

CRITERIA = ("aic", "bic", "icl")


def free_params(K: int, p: int, q: int, family: str) -> int:
    """Free-parameter count used by the penalized criteria.

    ``p`` and ``q`` are the expert/gating covariate-vector lengths, intercept
    included. Skew-t experts carry two extra parameters per component.
    """
    if K < 1 or p < 1 or q < 1:
        raise ValueError("K, p, q must all be >= 1")
    if family == "nmoe":
        return K * (p + q + 3) - q - 1
    if family == "stmoe":
        return K * (p + q + 5) - q - 1
    raise ValueError(f"unknown family {family!r}")


@dataclass(frozen=True)
class CriteriaRow:
    K: int
    loglik: float
    complete_loglik: float
    eta: int
    aic: float
    bic: float
    icl: float


@dataclass(frozen=True)
class SelectionResult:
    rows: tuple[CriteriaRow, ...]
    chosen: dict[str, int]
    failures: dict[int, str]


def criteria(fit: FittedModel, data: Dataset) -> CriteriaRow:
    """AIC/BIC/ICL of a fitted model on its training data."""
    psi = fit.params
    K = psi.n_components
    eta = free_params(K, psi.p, psi.q, psi.family)
    n = data.n
    logl = fit.loglik

    log_joint = component_log_joint(data, psi)
    hard = np.argmax(fit.tau, axis=1)
    complete = float(log_joint[np.arange(n), hard].sum())

    half_log_n = 0.5 * math.log(n)
    return CriteriaRow(
        K=K,
        loglik=logl,
        complete_loglik=complete,
        eta=eta,
        aic=logl - eta,
        bic=logl - eta * half_log_n,
        icl=complete - eta * half_log_n,
    )


def _seed_for(base_seed: int, K: int) -> int:
    return int(np.random.SeedSequence([base_seed, K]).generate_state(1)[0])


def select_k(data: Dataset, family: str, k_range, cfg: FitConfig | None = None) -> SelectionResult:
    """Fit every K in ``k_range`` with multi-start ECM and rank the criteria.

    Per-K failures are recorded and skipped; the call only fails when no K
    succeeds. Ties in a criterion go to the smaller K.
    """
    cfg = cfg or FitConfig()
    k_list = sorted(set(int(k) for k in k_range))
    if not k_list:
        raise ValueError("k_range must be nonempty")

    rows = []
    failures: dict[int, str] = {}
    for K in k_list:
        try:
            fm = multi_start_fit(data, K, family, replace(cfg, seed=_seed_for(cfg.seed, K)))
            rows.append(criteria(fm, data))
        except (FitError, ValueError) as exc:
            failures[K] = str(exc)
    if not rows:
        raise FitError(f"model selection failed for every K in {k_list}: {failures}")

    chosen = {}
    for crit in CRITERIA:
        best_row = rows[0]
        for row in rows[1:]:
            if getattr(row, crit) > getattr(best_row, crit):
                best_row = row
        chosen[crit] = best_row.K
    return SelectionResult(rows=tuple(rows), chosen=chosen, failures=failures)
