"""Functional average treatment effects with simultaneous confidence bands."""

from ._errors import *  # noqa: F401,F403
from .bands import (
    BandKind,
    ConfidenceBand,
    RoughnessFunction,
    Tail,
    band_contains,
    correlation_from_covariance,
    cov_to_tau,
    kac_rice_exceedance,
    kac_rice_threshold,
    pointwise_t_band,
    simultaneous_band,
)
from .data import FunctionalSample, TimeGrid
from .effects import (
    EffectEstimate,
    Estimand,
    effect_standard_error,
    estimate_fate,
    estimate_fatt,
)
from .fosr import RegressionFit, fit_arm, fit_least_squares, residual_covariance
from .propensity import (
    OverlapReport,
    PropensityModel,
    fit_logistic,
    overlap_report,
    predict_propensity,
)

__version__ = "0.1.0"
