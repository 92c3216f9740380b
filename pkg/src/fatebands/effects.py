"""Outcome-regression estimators of the functional treatment effects.

Both estimands are linear contrasts of the two arm fits evaluated at a
covariate mean vector: the full-sample mean for the average effect (FATE)
and the treated-arm mean for the effect on the treated (FATT).  Conditional
on the design, the estimated curve is Gaussian with covariance

    C(s, t) = sigma_1(s, t) * a_1 + sigma_0(s, t) * a_0,
    a_z = xbar (X_z^T X_z)^{-1} xbar^T.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ._errors import DimensionMismatchError, GridMismatchError, NotPSDError
from .data import TimeGrid
from .fosr import RegressionFit

#: Negative eigenvalues down to ``-PSD_TOL * trace`` are clipped; below that we abort.
PSD_TOL = 1e-8


class Estimand(str, enum.Enum):
    FATE = "fate"
    FATT = "fatt"


@dataclass(frozen=True, eq=False)
class EffectEstimate:
    kind: Estimand
    grid: TimeGrid | None
    theta: np.ndarray
    cov: np.ndarray
    xbar: np.ndarray
    n_total: int
    n1: int
    n0: int
    K: int
    covariance_source: str = "estimated"

    @property
    def residual_df(self) -> int:
        """Total residual degrees of freedom, ``n1 + n0 - 2(K+1)``."""
        return self.n1 + self.n0 - 2 * (self.K + 1)


def project_psd(cov: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    """Symmetrize ``cov`` and clip tiny negative eigenvalues to zero.

    Raises :class:`NotPSDError` when the smallest eigenvalue is below
    ``-tol * trace``.
    """
    cov = (np.asarray(cov, dtype=float) + np.asarray(cov, dtype=float).T) / 2
    w, V = np.linalg.eigh(cov)
    if w[0] >= 0:
        return cov
    scale = max(np.trace(cov), 0.0)
    if w[0] < -tol * scale or scale == 0.0:
        raise NotPSDError(
            f"covariance has eigenvalue {w[0]:.3g} (trace {scale:.3g}); not PSD"
        )
    out = (V * np.clip(w, 0.0, None)) @ V.T
    return (out + out.T) / 2


def _check_pair(fit1: RegressionFit, fit0: RegressionFit):
    if fit1.beta.shape[0] != fit0.beta.shape[0]:
        raise DimensionMismatchError(
            f"arms disagree on K: {fit1.K} vs {fit0.K}"
        )
    if fit1.beta.shape[1] != fit0.beta.shape[1]:
        raise GridMismatchError("arm fits have different grid lengths")
    if fit1.grid is not None and fit0.grid is not None and fit1.grid != fit0.grid:
        raise GridMismatchError("arm fits were estimated on different grids")


def _assemble(kind, fit1, fit0, xbar, n_total, sigma1, sigma0):
    _check_pair(fit1, fit0)
    xbar = np.asarray(xbar, dtype=float)
    if xbar.shape != (fit1.beta.shape[0],):
        raise DimensionMismatchError(
            f"covariate mean has length {xbar.size}, fits expect {fit1.beta.shape[0]}"
        )
    known = sigma1 is not None or sigma0 is not None
    if known and (sigma1 is None or sigma0 is None):
        raise ValueError("pass both known covariances or neither")
    s1 = fit1.sigma if sigma1 is None else np.asarray(sigma1, dtype=float)
    s0 = fit0.sigma if sigma0 is None else np.asarray(sigma0, dtype=float)
    L = fit1.beta.shape[1]
    if s1.shape != (L, L) or s0.shape != (L, L):
        raise DimensionMismatchError("covariance matrices must be L x L")
    theta = xbar @ fit1.beta - xbar @ fit0.beta
    a1 = float(xbar @ fit1.gram_inv @ xbar)
    a0 = float(xbar @ fit0.gram_inv @ xbar)
    cov = project_psd(s1 * a1 + s0 * a0)
    return EffectEstimate(
        kind=kind,
        grid=fit1.grid,
        theta=theta,
        cov=cov,
        xbar=xbar,
        n_total=int(n_total),
        n1=fit1.n_arm,
        n0=fit0.n_arm,
        K=fit1.K,
        covariance_source="known" if known else "estimated",
    )


def estimate_fate(fit1: RegressionFit, fit0: RegressionFit, X: np.ndarray, *,
                  sigma1: np.ndarray | None = None,
                  sigma0: np.ndarray | None = None) -> EffectEstimate:
    """Functional average treatment effect and its covariance.

    Parameters
    ----------
    fit1, fit0 : RegressionFit
        Treated and control arm fits on the same grid.
    X : ndarray, shape (n, K+1)
        Full-sample design including both arms.
    sigma1, sigma0 : ndarray, optional
        Known error covariances.  When given they replace the residual
        covariances of the fits (used in simulation with a known truth).
    """
    X = np.asarray(X, dtype=float)
    return _assemble(Estimand.FATE, fit1, fit0, X.mean(axis=0), X.shape[0],
                     sigma1, sigma0)


def estimate_fatt(fit1: RegressionFit, fit0: RegressionFit, X1: np.ndarray, *,
                  sigma1: np.ndarray | None = None,
                  sigma0: np.ndarray | None = None) -> EffectEstimate:
    """Effect on the treated: as :func:`estimate_fate` but averaged over ``X1``.

    ``X1`` must contain the treated rows only.
    """
    X1 = np.asarray(X1, dtype=float)
    return _assemble(Estimand.FATT, fit1, fit0, X1.mean(axis=0),
                     fit1.n_arm + fit0.n_arm, sigma1, sigma0)


def effect_standard_error(est: EffectEstimate) -> np.ndarray:
    return np.sqrt(np.clip(np.diag(est.cov), 0.0, None))
