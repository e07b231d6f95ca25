"""GP-LVM covariance estimation for asset returns."""

from ._core import (
    ContractViolation,
    InputError,
    NumericalError,
    assemble_covariance,
    compute_returns,
    correlation_gram,
    fit,
    generate_synthetic,
    ledoit_wolf,
    ledoit_wolf_intensity,
    log_marginal_likelihood,
    loocv_impute,
    min_variance_weights,
    project_capped_simplex,
    r2_score,
    sample_covariance,
    sharpe_ratio,
)

__all__ = [
    "ContractViolation",
    "InputError",
    "NumericalError",
    "assemble_covariance",
    "compute_returns",
    "correlation_gram",
    "fit",
    "generate_synthetic",
    "ledoit_wolf",
    "ledoit_wolf_intensity",
    "log_marginal_likelihood",
    "loocv_impute",
    "min_variance_weights",
    "project_capped_simplex",
    "r2_score",
    "sample_covariance",
    "sharpe_ratio",
]
