"""Error-process samplers on a fixed grid.

A covariance is factorized once with LAPACK's pivoted Cholesky (``dpstrf``),
which handles semi-definite and rank-deficient inputs; every draw is then a
matrix product with standard normals.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lapack

from .._errors import NotPSDError, ValidationError

PSD_TOL = 1e-8


def psd_factor(sigma: np.ndarray) -> np.ndarray:
    """Return ``F`` (L x r) with ``F @ F.T ~= sigma`` and ``r`` the numerical rank."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValidationError("covariance must be square")
    sigma = (sigma + sigma.T) / 2
    L = sigma.shape[0]
    trace = float(np.trace(sigma))
    if trace == 0.0 and not np.any(sigma):
        return np.zeros((L, 0))
    wmin = float(np.linalg.eigvalsh(sigma)[0])
    if wmin < -PSD_TOL * abs(trace):
        raise NotPSDError(f"covariance has eigenvalue {wmin:.3g} (trace {trace:.3g})")
    c, piv, rank, info = lapack.dpstrf(sigma, lower=1, tol=-1.0)
    if info < 0:  # pragma: no cover - argument error
        raise ValidationError(f"dpstrf failed with info={info}")
    c = np.tril(c)[:, :rank]
    factor = np.empty_like(c)
    factor[piv - 1] = c
    return factor


class GaussianErrorSampler:
    """Draws curves ``eps ~ N(0, sigma)`` on the grid."""

    def __init__(self, sigma):
        self.sigma = np.asarray(sigma, dtype=float)
        self.factor = psd_factor(self.sigma)

    @property
    def size(self) -> int:
        return self.factor.shape[0]

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Return an ``n x L`` matrix of independent curves."""
        r = self.factor.shape[1]
        if r == 0:
            return np.zeros((n, self.size))
        return rng.standard_normal((n, r)) @ self.factor.T


class StudentTErrorSampler(GaussianErrorSampler):
    """Multivariate t curves with scale ``sigma`` and ``nu`` degrees of freedom.

    Each curve is a Gaussian draw divided by ``sqrt(chi2_nu / nu)`` with one
    chi-square variate per curve, so the covariance is ``sigma * nu / (nu - 2)``.
    """

    def __init__(self, sigma, nu: float):
        if nu < 3:
            raise ValidationError(f"nu must be >= 3, got {nu}")
        super().__init__(sigma)
        self.nu = float(nu)

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        g = super().draw(n, rng)
        w = np.sqrt(rng.chisquare(self.nu, size=n) / self.nu)
        return g / w[:, None]


def gaussian_error_sampler(sigma) -> GaussianErrorSampler:
    return GaussianErrorSampler(sigma)


def student_t_error_sampler(sigma, nu: float) -> StudentTErrorSampler:
    return StudentTErrorSampler(sigma, nu)
