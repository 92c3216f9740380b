"""Data-generating process for the coverage study.

The default specification mimics the register-data setting: nine scalar
covariates drawn from a synthetic population with the published marginal
summaries, a logistic treatment model with the published propensity
coefficients for men, smooth polynomial coefficient curves for each arm, and
squared-exponential error kernels whose amplitude decays over the career.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .._errors import DegenerateArmError, EmptyStratumError, ValidationError
from ..data import FunctionalSample, TimeGrid
from ..fosr import MAX_CONDITION
from ..propensity import predict_propensity
from .samplers import GaussianErrorSampler, StudentTErrorSampler

COVARIATE_NAMES = (
    "year_first_income",
    "previous_income",
    "children_before_20",
    "secondary_education",
    "n_siblings",
    "parents_income",
    "foreign_born_parents",
    "parents_secondary_education",
    "parents_tertiary_education",
)

DEFAULT_STRATA = (
    "children_before_20",
    "foreign_born_parents",
    "parents_tertiary_education",
)

#: Propensity coefficients for men (intercept first, same order as COVARIATE_NAMES).
GAMMA_MEN = np.array(
    [-2.194, -0.052, -0.001, 0.020, -0.097, -0.056, 0.510, 0.568, 0.674, 0.851]
)
#: Same for women.
GAMMA_WOMEN = np.array(
    [3.872, -0.124, 0.054, -0.378, 0.109, -0.052, 0.407, 0.541, 0.690, 0.933]
)

# Quadratic coefficient curves c0 + c1 t + c2 t^2, one row per covariate
# (intercept first).  Outcome scale is log cumulative income.
_BETA0_POLY = np.array([
    [9.60, 4.40, -1.90],
    [-0.040, 0.020, 0.010],
    [0.060, -0.045, 0.000],
    [0.050, -0.030, -0.010],
    [-0.080, 0.180, -0.050],
    [-0.020, 0.008, 0.002],
    [0.120, -0.050, 0.010],
    [-0.030, 0.010, 0.000],
    [0.020, 0.060, -0.020],
    [-0.090, 0.220, -0.060],
])
_BETA_DIFF_POLY = np.array([
    [-0.300, 0.700, -0.300],
    [0.000, 0.005, 0.000],
    [0.010, -0.010, 0.000],
    [-0.020, 0.020, 0.000],
    [-0.030, 0.060, -0.020],
    [0.000, 0.000, 0.000],
    [0.010, 0.000, 0.000],
    [0.000, 0.020, 0.000],
    [0.000, 0.020, -0.010],
    [-0.040, 0.080, -0.020],
])


class ErrorFamily(str, enum.Enum):
    GAUSS = "gauss"
    STUDENT_T = "t"


class Design(str, enum.Enum):
    FIXED = "fixed"
    RANDOM = "random"


def _poly_curves(coef: np.ndarray, t: np.ndarray) -> np.ndarray:
    return coef[:, [0]] + coef[:, [1]] * t + coef[:, [2]] * t**2


def squared_exponential_cov(t, amplitude, length: float) -> np.ndarray:
    """``v(s) v(t) exp(-(s - t)^2 / (2 length^2))`` on the points ``t``."""
    t = np.asarray(t, dtype=float)
    v = np.broadcast_to(np.asarray(amplitude, dtype=float), t.shape)
    d = t[:, None] - t[None, :]
    return np.outer(v, v) * np.exp(-(d * d) / (2.0 * length**2))


def synthetic_covariate_pool(size: int = 27805, seed: int = 1954) -> np.ndarray:
    """Synthetic population of covariate rows (intercept column included).

    Marginals follow the published descriptives for men.  Two encodings are
    ours: the year of first income is years since 1970, and parents' income
    is the log of total income in thousands of SEK.  Parents' education
    levels are mutually exclusive.
    """
    rng = np.random.default_rng(seed)
    m = int(size)
    year = np.clip(np.rint(rng.normal(1.7, 1.2, m)), -2, 3)
    has_prev = rng.random(m) < 0.8
    prev = np.where(has_prev, rng.normal(10.4, 1.2, m), 0.0)
    children = (rng.random(m) < 0.019).astype(float)
    secondary = (rng.random(m) < 0.71).astype(float)
    siblings = rng.negative_binomial(5.63, 0.71, m).astype(float)
    parents_income = rng.normal(11.8 - np.log(1000.0), 0.9, m)
    foreign = (rng.random(m) < 0.023).astype(float)
    edu = rng.choice(3, size=m, p=[0.591, 0.297, 0.112])
    par_sec = (edu == 1).astype(float)
    par_ter = (edu == 2).astype(float)
    return np.column_stack([
        np.ones(m), year, prev, children, secondary, siblings,
        parents_income, foreign, par_sec, par_ter,
    ])


@dataclass(frozen=True, eq=False)
class DgpSpec:
    """Full description of the simulation truth."""

    grid: TimeGrid
    beta0: np.ndarray
    beta1: np.ndarray
    sigma0: np.ndarray
    sigma1: np.ndarray
    gamma: np.ndarray
    covariate_pool: np.ndarray
    covariate_names: tuple[str, ...] = COVARIATE_NAMES
    error_family: ErrorFamily = ErrorFamily.GAUSS
    nu: float | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        L = len(self.grid)
        p = self.covariate_pool.shape[1]
        object.__setattr__(self, "error_family", ErrorFamily(self.error_family))
        for name in ("beta0", "beta1"):
            if getattr(self, name).shape != (p, L):
                raise ValidationError(f"{name} must be {(p, L)}")
        for name in ("sigma0", "sigma1"):
            s = getattr(self, name)
            if s.shape != (L, L) or not np.allclose(s, s.T):
                raise ValidationError(f"{name} must be a symmetric {L} x {L} matrix")
        if self.gamma.shape != (p,):
            raise ValidationError("gamma must have one entry per design column")
        if len(self.covariate_names) != p - 1:
            raise ValidationError("need one name per non-intercept covariate")
        if self.error_family is ErrorFamily.STUDENT_T and (self.nu is None or self.nu < 3):
            raise ValidationError("Student-t errors need nu >= 3")
        # factorizing here also enforces PSD
        self.sampler(0)
        self.sampler(1)

    @property
    def K(self) -> int:
        return self.covariate_pool.shape[1] - 1

    def beta(self, arm: int) -> np.ndarray:
        return self.beta1 if arm == 1 else self.beta0

    def sigma(self, arm: int) -> np.ndarray:
        return self.sigma1 if arm == 1 else self.sigma0

    def sampler(self, arm: int):
        if arm not in self._cache:
            s = self.sigma(arm)
            if self.error_family is ErrorFamily.STUDENT_T:
                self._cache[arm] = StudentTErrorSampler(s, self.nu)
            else:
                self._cache[arm] = GaussianErrorSampler(s)
        return self._cache[arm]

    def resample(self, strata_names, n: int, rng: np.random.Generator) -> np.ndarray:
        """Stratified draw of ``n`` design rows from the covariate pool."""
        key = ("cells", tuple(strata_names))
        if key not in self._cache:
            cols = self.strata_columns(strata_names)
            self._cache[key] = stratum_cells(self.covariate_pool, cols)
        return stratified_resample(self.covariate_pool, (), n, rng,
                                   cells=self._cache[key])

    def strata_columns(self, names) -> list[int]:
        cols = []
        for name in names:
            try:
                cols.append(self.covariate_names.index(name) + 1)
            except ValueError:
                raise ValidationError(f"unknown stratum column {name!r}") from None
        return cols


def default_spec(grid_size: int = 43, *, error_family: str | ErrorFamily = "gauss",
                 nu: float = 10.0, sigma_scale: float = 1.0, null_effect: bool = False,
                 pool_size: int = 27805, pool_seed: int = 1954,
                 gamma: np.ndarray | None = None,
                 length_scales: tuple[float, float] = (0.18, 0.20)) -> DgpSpec:
    """Synthetic stand-in for the register-data simulation truth.

    ``length_scales`` are the (control, treated) error correlation lengths.
    ``null_effect`` sets ``beta1 = beta0``.
    """
    grid = TimeGrid.uniform(grid_size)
    t = grid.points
    beta0 = _poly_curves(_BETA0_POLY, t)
    beta1 = beta0.copy() if null_effect else beta0 + _poly_curves(_BETA_DIFF_POLY, t)
    v0 = sigma_scale * (0.45 * np.exp(-1.5 * t) + 0.08)
    v1 = sigma_scale * (0.50 * np.exp(-1.8 * t) + 0.07)
    family = ErrorFamily(error_family)
    return DgpSpec(
        grid=grid,
        beta0=beta0,
        beta1=beta1,
        sigma0=squared_exponential_cov(t, v0, length_scales[0]),
        sigma1=squared_exponential_cov(t, v1, length_scales[1]),
        gamma=np.array(GAMMA_MEN if gamma is None else gamma, dtype=float),
        covariate_pool=synthetic_covariate_pool(pool_size, pool_seed),
        error_family=family,
        nu=nu if family is ErrorFamily.STUDENT_T else None,
    )


def stratum_cells(pool: np.ndarray, strata) -> list[np.ndarray]:
    """Row indices of ``pool`` for every distinct value combination of ``strata``.

    Cells are ordered lexicographically by their stratum values.
    """
    pool = np.asarray(pool, dtype=float)
    strata = list(strata)
    if not strata:
        return [np.arange(pool.shape[0])]
    _, inverse = np.unique(pool[:, strata], axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    order = np.argsort(inverse, kind="stable")
    bounds = np.flatnonzero(np.diff(inverse[order])) + 1
    return np.split(order, bounds)


def stratified_resample(pool: np.ndarray, strata, n: int, rng: np.random.Generator,
                        cells: list[np.ndarray] | None = None) -> np.ndarray:
    """Draw ``n`` rows with replacement within strata of ``pool``.

    ``strata`` lists column indices; every distinct combination of their
    values present in the pool is a cell.  Cell sizes are the pool
    proportions times ``n``, rounded by largest remainder (ties go to the
    cell that sorts first), and the output rows are shuffled.  ``cells`` may
    carry a precomputed :func:`stratum_cells` result.
    """
    pool = np.asarray(pool, dtype=float)
    if pool.shape[0] == 0:
        raise EmptyStratumError("covariate pool is empty")
    if n < 0:
        raise ValidationError("n must be non-negative")
    if cells is None:
        cells = stratum_cells(pool, strata)
    counts = np.array([c.size for c in cells])
    if np.any(counts == 0):
        raise EmptyStratumError("a stratum cell has no pool rows")
    quota = counts * n / pool.shape[0]
    alloc = np.floor(quota).astype(int)
    remainder = n - alloc.sum()
    order = np.argsort(-(quota - alloc), kind="stable")
    alloc[order[:remainder]] += 1
    rows = [members[rng.integers(0, members.size, size=k)]
            for members, k in zip(cells, alloc) if k]
    idx = np.concatenate(rows) if rows else np.zeros(0, dtype=int)
    return pool[rng.permutation(idx)]


def _arm_fittable(X: np.ndarray) -> bool:
    p = X.shape[1]
    if X.shape[0] < p + 1:
        return False
    eig = np.linalg.eigvalsh(X.T @ X)
    return eig[0] > 0 and eig[-1] / eig[0] < MAX_CONDITION


def draw_treatment(spec: DgpSpec, X: np.ndarray, rng: np.random.Generator,
                   max_redraws: int = 100) -> tuple[np.ndarray, int]:
    """Bernoulli treatment draws, redrawn until both arms can be fitted.

    An arm is unfittable when it has fewer than ``K + 2`` rows or a
    singular Gram matrix (e.g. a rare binary covariate absent from it).
    Returns the indicators and the number of rejected draws.
    """
    pi = predict_propensity(spec.gamma, X)
    for redraws in range(max_redraws + 1):
        z = (rng.random(X.shape[0]) < pi).astype(np.int8)
        if _arm_fittable(X[z == 1]) and _arm_fittable(X[z == 0]):
            return z, redraws
    raise DegenerateArmError(
        f"{max_redraws} consecutive treatment draws left an arm unfittable"
    )


def generate_outcomes(spec: DgpSpec, X: np.ndarray, z: np.ndarray,
                      rng: np.random.Generator) -> np.ndarray:
    """Outcome curves ``x_i^T beta_z(t) + eps_zi(t)`` for given treatments."""
    Y = np.empty((X.shape[0], len(spec.grid)))
    for arm in (0, 1):
        mask = z == arm
        Y[mask] = X[mask] @ spec.beta(arm) + spec.sampler(arm).draw(int(mask.sum()), rng)
    return Y


def generate_replicate(spec: DgpSpec, design_X: np.ndarray, rng: np.random.Generator,
                       max_redraws: int = 100) -> tuple[FunctionalSample, int]:
    """One simulated dataset on ``design_X``; returns ``(sample, redraws)``."""
    design_X = np.asarray(design_X, dtype=float)
    z, redraws = draw_treatment(spec, design_X, rng, max_redraws)
    Y = generate_outcomes(spec, design_X, z, rng)
    sample = FunctionalSample(grid=spec.grid, Y=Y, z=z, X=design_X,
                              covariate_names=spec.covariate_names)
    return sample, redraws


def true_fate(spec: DgpSpec, design_X: np.ndarray | list) -> np.ndarray:
    """Plug-in truth ``xbar (beta1 - beta0)``.

    A list of design matrices (random design) averages the per-design
    plug-ins.
    """
    diff = spec.beta1 - spec.beta0
    if isinstance(design_X, (list, tuple)):
        return np.mean([np.asarray(X).mean(axis=0) @ diff for X in design_X], axis=0)
    return np.asarray(design_X, dtype=float).mean(axis=0) @ diff
