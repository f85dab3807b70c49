"""
shrinkt: Empirical Bayes t-means shrinkage

Adaptive shrinkage of effect estimates whose errors follow t distributions,
with variance moderation, unimodal mixture priors, local false discovery and
sign rates, and a simulation bench for comparing analysis pipelines.
"""

from .core import TMeansSolver, alpha_profile, build_likelihood_matrix, component_loglik, fit_weights
from .exceptions import (
    AcceptanceError,
    ConfigError,
    DataError,
    DomainError,
    EstimationError,
    LikelihoodError,
    NegligibleComponentError,
    ShrinktError,
)
from .models import (
    FitResult,
    GridSpec,
    LikelihoodMatrix,
    ModeratedStats,
    PosteriorSummary,
    SummaryStats,
    UnimodalPrior,
    VarianceObservations,
)
from .pipelines import PipelineId, PipelineResult, run_pipeline
from .posterior import qvalues, summarize
from .simulation import BenchConfig, run_bench
from .unimodal_prior import build_grid
from .variance_moderation import estimate_hyperparams, moderate, squeeze_variances

__version__ = "0.1.0"

__all__ = [
    "TMeansSolver",
    "alpha_profile",
    "build_likelihood_matrix",
    "component_loglik",
    "fit_weights",
    "build_grid",
    "estimate_hyperparams",
    "moderate",
    "squeeze_variances",
    "summarize",
    "qvalues",
    "run_pipeline",
    "PipelineId",
    "PipelineResult",
    "SummaryStats",
    "VarianceObservations",
    "ModeratedStats",
    "GridSpec",
    "UnimodalPrior",
    "LikelihoodMatrix",
    "FitResult",
    "PosteriorSummary",
    "ShrinktError",
    "DomainError",
    "EstimationError",
    "LikelihoodError",
    "NegligibleComponentError",
    "DataError",
    "ConfigError",
    "AcceptanceError",
    "BenchConfig",
    "run_bench",
]
