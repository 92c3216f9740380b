"""Synthetic data generation and Monte Carlo coverage experiments."""

from .coverage import (
    BandType,
    CoverageReport,
    CoverageRow,
    DfPolicy,
    EstimatorLawCheck,
    ScenarioConfig,
    ScenarioResult,
    error_covariance,
    fixed_design,
    run_coverage,
    simulate_scenario,
    verify_estimator_law,
)
from .dgp import (
    COVARIATE_NAMES,
    DEFAULT_STRATA,
    GAMMA_MEN,
    GAMMA_WOMEN,
    Design,
    DgpSpec,
    ErrorFamily,
    default_spec,
    draw_treatment,
    generate_outcomes,
    generate_replicate,
    squared_exponential_cov,
    stratified_resample,
    stratum_cells,
    synthetic_covariate_pool,
    true_fate,
)
from .samplers import (
    GaussianErrorSampler,
    StudentTErrorSampler,
    gaussian_error_sampler,
    psd_factor,
    student_t_error_sampler,
)
