"""Bivariate pseudo-Poisson count models with exponential and Lomax conditional rates.

X1 ~ Poisson(alpha) and X2 | X1 = x ~ Poisson(delta + beta * F(x)), where F
is an exponential or Lomax distribution function. Negative beta gives
negative correlation.
"""
__version__ = "0.1.0"

from .data import (
    BivariateSample,
    ExpParams,
    FitResult,
    LomaxParams,
    ModelSpec,
    SampleMoments,
    aic,
    all_specs,
    dispersion_index,
    pearson_correlation,
    read_csv,
    sample_moments,
)
from .errors import PseudoPoissonError
from .inference import CorrelationBounds, LrtResult, lrt, rho_bound_argmin, rho_bounds
from .kernels import BACKEND
from .mle import MleOptions, exp_loglik, fit_family, lomax_loglik, loglik, mle_fit
from .mme import MmeReport, mme_fit
from .moments import MomentSet, brute_force_moments, exp_moments, lomax_moments, model_moments
from .simulation import SimulationSummary, StudyConfig, run_study, sample_from

__all__ = [
    "BACKEND",
    "BivariateSample",
    "CorrelationBounds",
    "ExpParams",
    "FitResult",
    "LomaxParams",
    "LrtResult",
    "MleOptions",
    "MmeReport",
    "ModelSpec",
    "MomentSet",
    "PseudoPoissonError",
    "SampleMoments",
    "SimulationSummary",
    "StudyConfig",
    "aic",
    "all_specs",
    "brute_force_moments",
    "dispersion_index",
    "exp_loglik",
    "exp_moments",
    "fit_family",
    "lomax_loglik",
    "lomax_moments",
    "loglik",
    "lrt",
    "mle_fit",
    "mme_fit",
    "model_moments",
    "pearson_correlation",
    "read_csv",
    "rho_bound_argmin",
    "rho_bounds",
    "run_study",
    "sample_from",
    "sample_moments",
]
