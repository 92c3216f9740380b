"""Pointwise and simultaneous confidence bands for an estimated effect curve.

The simultaneous band uses a constant threshold ``u`` calibrated with the
Kac-Rice expected-upcrossings bound for the standardized estimator process:
the probability that ``|Z(t)|`` exceeds ``u`` somewhere on [0, 1] is bounded
by the two-sided tail probability at t = 0 plus the expected number of
crossings of the levels -u and u, which depends on the process only
through the integrated roughness ``I = int tau(t) dt``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from ._errors import (
    GridTooShortError,
    InvalidAlphaError,
    LengthMismatchError,
    NoRootError,
    ValidationError,
)
from .data import TimeGrid
from .effects import EffectEstimate, effect_standard_error

BRACKET = (0.0, 20.0)
ROOT_TOL = 1e-9
MAX_BISECTIONS = 200


class BandKind(str, enum.Enum):
    POINTWISE_T = "pointwise"
    SIMULTANEOUS_KR_GAUSS = "kr-gauss"
    SIMULTANEOUS_KR_T = "kr-t"


class Tail(str, enum.Enum):
    GAUSS = "gauss"
    T = "t"


@dataclass(frozen=True, eq=False)
class RoughnessFunction:
    grid: TimeGrid
    tau: np.ndarray

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float)
        if tau.shape != (len(self.grid),):
            raise LengthMismatchError("tau must have one value per grid point")
        if not np.all(np.isfinite(tau)) or np.any(tau < 0):
            raise ValidationError("tau must be finite and non-negative")
        object.__setattr__(self, "tau", tau)

    def integral(self) -> float:
        return float(np.trapezoid(self.tau, self.grid.points))


@dataclass(frozen=True, eq=False)
class ConfidenceBand:
    kind: BandKind
    level: float
    grid: TimeGrid | None
    center: np.ndarray
    u: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    df: int | None = None
    tau_integral: float | None = None

    @property
    def threshold(self) -> float:
        """The constant threshold (first entry of ``u`` for pointwise bands)."""
        return float(self.u[0])

    def area(self) -> float:
        """Integrated band width over the grid (trapezoidal)."""
        width = self.upper - self.lower
        if self.grid is None:
            return float(np.trapezoid(width, dx=1.0 / max(width.size - 1, 1)))
        return float(np.trapezoid(width, self.grid.points))


def correlation_from_covariance(cov: np.ndarray) -> np.ndarray:
    """Correlation matrix of ``cov``.

    Rows and columns whose variance is below ``1e-14`` times the largest
    variance are treated as degenerate: 1 on the diagonal, 0 elsewhere.
    """
    cov = np.asarray(cov, dtype=float)
    d = np.clip(np.diag(cov), 0.0, None)
    dmax = d.max() if d.size else 0.0
    ok = d > 1e-14 * dmax if dmax > 0 else np.zeros(d.shape, dtype=bool)
    s = np.where(ok, np.sqrt(np.where(ok, d, 1.0)), 1.0)
    R = cov / np.outer(s, s)
    R[~ok, :] = 0.0
    R[:, ~ok] = 0.0
    R[np.diag_indices_from(R)] = np.where(ok, np.diag(R), 1.0)
    return R


def cov_to_tau(cov: np.ndarray, grid: TimeGrid) -> RoughnessFunction:
    """Roughness of the standardized process from its covariance on ``grid``.

    On each cell ``[t_j, t_{j+1}]`` the increment correlation gives
    ``tau = sqrt(2 (1 - rho_{j,j+1})) / dt``; node values average the two
    adjacent cells, and the endpoints copy their only cell.
    """
    L = len(grid)
    if L < 3:
        raise GridTooShortError(f"need at least 3 grid points, got {L}")
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (L, L):
        raise LengthMismatchError("covariance does not match the grid")
    R = correlation_from_covariance(cov)
    rho = np.diagonal(R, offset=1)
    cell = np.sqrt(np.maximum(0.0, 2.0 * (1.0 - rho))) / np.diff(grid.points)
    tau = np.empty(L)
    tau[0] = cell[0]
    tau[-1] = cell[-1]
    tau[1:-1] = 0.5 * (cell[:-1] + cell[1:])
    return RoughnessFunction(grid=grid, tau=tau)


def _check_alpha(alpha):
    if not (0.0 < alpha < 1.0):
        raise InvalidAlphaError(f"alpha must be in (0, 1), got {alpha!r}")


def kac_rice_exceedance(u: float, tau_integral: float, df: float | None = None) -> float:
    """Upper bound on ``P(sup_t |Z(t)| > u)`` for a unit-variance Gaussian or t process."""
    if df is None:
        tail = 0.5 * math.erfc(u / math.sqrt(2.0))
        crossings = tau_integral / (2 * math.pi) * math.exp(-0.5 * u * u)
    else:
        tail = float(special.stdtr(df, -u))
        crossings = tau_integral / (2 * math.pi) * (1.0 + u * u / df) ** (-(df - 1) / 2)
    return 2.0 * (tail + crossings)


def kac_rice_threshold(tau: RoughnessFunction | float, alpha: float,
                       df: int | None = None) -> float:
    """Constant threshold ``u`` whose Kac-Rice exceedance bound equals ``alpha``.

    ``tau`` may be a :class:`RoughnessFunction` or the integral of tau
    directly.  ``df`` switches from a Gaussian to a t-process tail.
    """
    _check_alpha(alpha)
    if df is not None and df < 3:
        raise ValidationError(f"t-process degrees of freedom must be >= 3, got {df}")
    I = tau.integral() if isinstance(tau, RoughnessFunction) else float(tau)
    if not math.isfinite(I) or I < 0:
        raise ValidationError("integrated roughness must be finite and non-negative")

    def g(u):
        return kac_rice_exceedance(u, I, df) - alpha

    lo, hi = BRACKET
    g_lo, g_hi = g(lo), g(hi)
    if g_lo < 0 or g_hi > 0:
        raise NoRootError(
            f"no threshold in [{lo}, {hi}] for alpha={alpha} and integrated tau={I:.4g}"
        )
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < ROOT_TOL:
            break
    return 0.5 * (lo + hi)


def _band(kind, est, u, alpha, df=None, tau_integral=None):
    se = effect_standard_error(est)
    u_vec = np.full(se.shape, float(u))
    half = u_vec * se
    return ConfidenceBand(
        kind=kind,
        level=1.0 - alpha,
        grid=est.grid,
        center=est.theta,
        u=u_vec,
        lower=est.theta - half,
        upper=est.theta + half,
        df=df,
        tau_integral=tau_integral,
    )


def pointwise_t_band(est: EffectEstimate, alpha: float, df: int) -> ConfidenceBand:
    """Pointwise interval ``theta(t) +/- t_{1-alpha/2, df} * se(t)`` at every grid point."""
    _check_alpha(alpha)
    if df < 1:
        raise ValidationError(f"df must be >= 1, got {df}")
    u = float(stats.t.ppf(1.0 - alpha / 2.0, df))
    return _band(BandKind.POINTWISE_T, est, u, alpha, df=int(df))


def simultaneous_band(est: EffectEstimate, alpha: float, tail: Tail | str = Tail.GAUSS,
                      df: int | None = None) -> ConfidenceBand:
    """Kac-Rice simultaneous band with constant threshold.

    With ``tail="t"`` and no ``df`` the total residual degrees of freedom
    ``n1 + n0 - 2(K+1)`` are used.
    """
    tail = Tail(tail)
    grid = est.grid if est.grid is not None else TimeGrid.uniform(est.theta.size)
    tau = cov_to_tau(est.cov, grid)
    I = tau.integral()
    if tail is Tail.T:
        df = est.residual_df if df is None else int(df)
        u = kac_rice_threshold(I, alpha, df)
        return _band(BandKind.SIMULTANEOUS_KR_T, est, u, alpha, df=df, tau_integral=I)
    u = kac_rice_threshold(I, alpha)
    return _band(BandKind.SIMULTANEOUS_KR_GAUSS, est, u, alpha, tau_integral=I)


def band_contains(band: ConfidenceBand, curve: np.ndarray) -> bool:
    """True iff ``curve`` lies inside the band at every grid point."""
    curve = np.asarray(curve, dtype=float)
    if curve.shape != band.center.shape:
        raise LengthMismatchError(
            f"curve has shape {curve.shape}, band has {band.center.shape}"
        )
    return bool(np.all((band.lower <= curve) & (curve <= band.upper)))
