"""Skew-t and normal mixtures of experts.

Conditional mixture models whose gates are multinomial-logistic in covariates
and whose experts are linear regressions with normal or skew-t noise, fitted
by an expectation conditional maximization loop. Includes prediction with
uncertainty bands, MAP clustering, information-criterion model selection and
the simulation studies used to benchmark robustness to outliers.
"""

__version__ = "0.1.0"

from .dist import SkewTParams, sample_skew_t, skew_normal_pdf, skew_t_pdf
from .ecm import FitConfig, FitError, FittedModel, fit, initialize, multi_start_fit
from .estep import EStepMoments, latent_moments, posterior_tau
from .model import (
    Constraints,
    Dataset,
    ExpertParams,
    GatingParams,
    ModelParams,
    gating_probs,
    log_likelihood,
    mixture_logpdf,
)
from .criteria import CriteriaRow, SelectionResult, criteria, free_params, select_k
from .predict import (
    Prediction,
    UndefinedMomentError,
    map_partition,
    predict,
    predict_band,
)
from .simulate import (
    SimConfig,
    benchmark_truth,
    generate,
    inject_outliers,
    mse_mean_function,
    mse_parameters,
)

__all__ = [
    "SkewTParams",
    "sample_skew_t",
    "skew_normal_pdf",
    "skew_t_pdf",
    "FitConfig",
    "FitError",
    "FittedModel",
    "fit",
    "initialize",
    "multi_start_fit",
    "EStepMoments",
    "latent_moments",
    "posterior_tau",
    "Constraints",
    "Dataset",
    "ExpertParams",
    "GatingParams",
    "ModelParams",
    "gating_probs",
    "log_likelihood",
    "mixture_logpdf",
    "CriteriaRow",
    "SelectionResult",
    "criteria",
    "free_params",
    "select_k",
    "Prediction",
    "UndefinedMomentError",
    "map_partition",
    "predict",
    "predict_band",
    "SimConfig",
    "benchmark_truth",
    "generate",
    "inject_outliers",
    "mse_mean_function",
    "mse_parameters",
]
