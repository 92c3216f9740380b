"""Function-on-scalar linear regression, fit separately in each treatment arm.

Each grid column of the outcome matrix is an ordinary least-squares problem
sharing one design, so the Gram matrix is factorized once per arm and reused
for every column.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ._errors import (
    EmptyArmError,
    InsufficientResidualDfError,
    SingularDesignError,
    ValidationError,
)
from .data import FunctionalSample, TimeGrid

#: Gram matrices at or above this condition number are rejected.
MAX_CONDITION = 1e12


@dataclass(frozen=True, eq=False)
class RegressionFit:
    """OLS output for one arm.

    Attributes
    ----------
    arm : int
        Treatment level (0 or 1).
    beta : ndarray, shape (K+1, L)
        Coefficient curves evaluated on the grid.
    residuals : ndarray, shape (n_arm, L)
    sigma : ndarray, shape (L, L)
        Degrees-of-freedom corrected residual covariance.
    gram_inv : ndarray, shape (K+1, K+1)
        ``(X_z^T X_z)^{-1}``.
    n_arm : int
    grid : TimeGrid or None
    """

    arm: int
    beta: np.ndarray
    residuals: np.ndarray
    sigma: np.ndarray
    gram_inv: np.ndarray
    n_arm: int
    grid: TimeGrid | None = None

    @property
    def K(self) -> int:
        return self.beta.shape[0] - 1

    @property
    def residual_df(self) -> int:
        return self.n_arm - self.beta.shape[0]


def _factor_gram(X: np.ndarray):
    gram = X.T @ X
    eig = np.linalg.eigvalsh(gram)
    if eig[0] <= 0 or eig[-1] / eig[0] >= MAX_CONDITION:
        cond = np.inf if eig[0] <= 0 else eig[-1] / eig[0]
        raise SingularDesignError(
            f"design Gram matrix is singular or ill-conditioned (condition {cond:.3g}); "
            "check for collinear or constant covariates within the arm"
        )
    try:
        return linalg.cho_factor(gram, lower=True)
    except linalg.LinAlgError as exc:  # pragma: no cover - guarded by eig check
        raise SingularDesignError(str(exc)) from exc


def _sample_covariance(residuals: np.ndarray, df: int) -> np.ndarray:
    if df <= 0:
        raise InsufficientResidualDfError(
            f"residual degrees of freedom must be positive, got {df}"
        )
    sigma = residuals.T @ residuals / df
    return (sigma + sigma.T) / 2


def fit_least_squares(X: np.ndarray, Y: np.ndarray, arm: int = 0,
                      grid: TimeGrid | None = None) -> RegressionFit:
    """Column-wise OLS of ``Y`` (n x L) on ``X`` (n x (K+1))."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape[0] == 0:
        raise EmptyArmError(f"arm {arm} has no observations")
    if X.shape[0] != Y.shape[0]:
        raise ValidationError("X and Y row counts differ")
    factor = _factor_gram(X)
    beta = linalg.cho_solve(factor, X.T @ Y)
    gram_inv = linalg.cho_solve(factor, np.eye(X.shape[1]))
    gram_inv = (gram_inv + gram_inv.T) / 2
    residuals = Y - X @ beta
    sigma = _sample_covariance(residuals, X.shape[0] - X.shape[1])
    return RegressionFit(
        arm=arm,
        beta=beta,
        residuals=residuals,
        sigma=sigma,
        gram_inv=gram_inv,
        n_arm=X.shape[0],
        grid=grid,
    )


def fit_arm(sample: FunctionalSample, arm: int) -> RegressionFit:
    """Fit the linear function-on-scalar model in treatment arm ``arm``.

    Raises
    ------
    EmptyArmError
        No observations carry ``z == arm``.
    SingularDesignError
        ``X_z^T X_z`` is rank deficient or has condition number >= 1e12.
    InsufficientResidualDfError
        ``n_z <= K + 1`` so the residual covariance is undefined.
    """
    if arm not in (0, 1):
        raise ValidationError("arm must be 0 or 1")
    X_z, Y_z = sample.arm(arm)
    return fit_least_squares(X_z, Y_z, arm=arm, grid=sample.grid)


def residual_covariance(fit: RegressionFit) -> np.ndarray:
    """Sample covariance of the residual curves with divisor ``n_z - K - 1``."""
    return _sample_covariance(np.asarray(fit.residuals), fit.residual_df)
