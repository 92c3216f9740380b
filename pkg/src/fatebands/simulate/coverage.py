"""Monte Carlo coverage experiments for the four band types.

Band types, all centred on the same estimated FATE curve:

* ``I``   simultaneous Kac-Rice band, covariance built from the true error covariances
* ``II``  simultaneous Kac-Rice band, covariance estimated from residuals
* ``III`` pointwise t band, true covariance
* ``IV``  pointwise t band, estimated covariance

Coverage is the share of replicates whose band contains the true curve at
every grid point.  Replicate ``r`` draws from its own stream seeded by
``SeedSequence(master_seed, spawn_key=(0, r))``; the fixed design uses
``spawn_key=(1,)``.  Results are merged in replicate order, so they do not
depend on how many worker threads ran them.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .._errors import DegenerateArmError, ValidationError
from ..bands import pointwise_t_band, simultaneous_band
from ..data import FunctionalSample
from ..effects import estimate_fate
from ..fosr import fit_arm
from .dgp import (
    DEFAULT_STRATA,
    Design,
    DgpSpec,
    ErrorFamily,
    generate_outcomes,
    generate_replicate,
)

Z99 = float(stats.norm.ppf(0.995))


class BandType(str, enum.Enum):
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"

    @property
    def simultaneous(self) -> bool:
        return self in (BandType.I, BandType.II)

    @property
    def known_covariance(self) -> bool:
        return self in (BandType.I, BandType.III)


class DfPolicy(str, enum.Enum):
    PAPER = "paper"        # n - 1
    RESIDUAL = "residual"  # n - 2(K+1)


@dataclass(frozen=True)
class ScenarioConfig:
    design: Design
    n: int
    master_seed: int
    replicates: int = 1000
    alpha: float = 0.05
    band_types: tuple[BandType, ...] = tuple(BandType)
    strata: tuple[str, ...] = DEFAULT_STRATA
    df_policy: DfPolicy = DfPolicy.PAPER
    simultaneous_tail: str = "gauss"
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "design", Design(self.design))
        object.__setattr__(self, "df_policy", DfPolicy(self.df_policy))
        types = tuple(BandType(b) for b in self.band_types)
        if not types:
            raise ValidationError("band_types must be non-empty")
        object.__setattr__(self, "band_types", types)
        object.__setattr__(self, "strata", tuple(self.strata))
        if self.replicates < 1:
            raise ValidationError("replicates must be >= 1")
        if not (0 < self.alpha < 1):
            raise ValidationError("alpha must be in (0, 1)")
        if self.n < 1:
            raise ValidationError("n must be positive")
        if not (0 <= int(self.master_seed) < 2**64):
            raise ValidationError("master_seed must be a 64-bit unsigned integer")

    def pointwise_df(self, K: int) -> int:
        if self.df_policy is DfPolicy.PAPER:
            return self.n - 1
        return self.n - 2 * (K + 1)


@dataclass(frozen=True)
class CoverageRow:
    band_type: str
    n: int
    design: str
    error_family: str
    coverage: float
    mc_halfwidth: float
    mean_band_area: float
    mean_threshold: float
    replicates_used: int
    redraws: int
    scenario: str = ""


CSV_FIELDS = ("scenario", "design", "error_family", "band_type", "n", "coverage",
              "mc_halfwidth", "mean_band_area", "mean_threshold", "replicates_used",
              "redraws")


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


@dataclass
class CoverageReport:
    rows: list[CoverageRow] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def extend(self, other: CoverageReport) -> CoverageReport:
        self.rows.extend(other.rows)
        for note in other.notes:
            if note not in self.notes:
                self.notes.append(note)
        return self

    def row(self, band_type, n=None, design=None, error_family=None) -> CoverageRow:
        hits = [
            r for r in self.rows
            if r.band_type == BandType(band_type).value
            and (n is None or r.n == n)
            and (design is None or r.design == Design(design).value)
            and (error_family is None or r.error_family == ErrorFamily(error_family).value)
        ]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match {band_type}, n={n}")
        return hits[0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in self.rows:
            w.writerow([_fmt(getattr(r, f)) for f in CSV_FIELDS])
        return buf.getvalue()


@dataclass
class ReplicateRecord:
    xbar: np.ndarray
    theta_hat: np.ndarray
    lower: dict
    upper: dict
    threshold: dict
    area: dict
    redraws: int


@dataclass
class ScenarioResult:
    """Per-replicate detail behind a coverage report for one scenario."""

    config: ScenarioConfig
    error_family: ErrorFamily
    grid_points: np.ndarray
    truth: np.ndarray
    records: list[ReplicateRecord]

    def contained_pointwise(self, band_type) -> np.ndarray:
        """Boolean ``replicates x L`` matrix of per-point containment."""
        bt = BandType(band_type)
        lo = np.array([r.lower[bt] for r in self.records])
        hi = np.array([r.upper[bt] for r in self.records])
        return (lo <= self.truth) & (self.truth <= hi)

    def contained_everywhere(self, band_type) -> np.ndarray:
        return self.contained_pointwise(band_type).all(axis=1)

    def thresholds(self, band_type) -> np.ndarray:
        bt = BandType(band_type)
        return np.array([r.threshold[bt] for r in self.records])

    @property
    def redraws(self) -> int:
        return int(sum(r.redraws for r in self.records))

    def report(self) -> CoverageReport:
        cfg = self.config
        R = len(self.records)
        rows = []
        for bt in cfg.band_types:
            p = float(self.contained_everywhere(bt).mean())
            rows.append(CoverageRow(
                band_type=bt.value,
                n=cfg.n,
                design=cfg.design.value,
                error_family=self.error_family.value,
                coverage=100.0 * p,
                mc_halfwidth=100.0 * Z99 * math.sqrt(p * (1.0 - p) / R),
                mean_band_area=float(np.mean([r.area[bt] for r in self.records])),
                mean_threshold=float(self.thresholds(bt).mean()),
                replicates_used=R,
                redraws=self.redraws,
                scenario=cfg.label,
            ))
        notes = []
        if cfg.design is Design.RANDOM:
            notes.append(
                "random design: the true curve averages the plug-in truth over "
                "the covariate draws of the replicates themselves"
            )
        return CoverageReport(rows=rows, notes=notes)


def replicate_rng(master_seed: int, r: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=(0, r)))


def design_rng(master_seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=(1,)))


def fixed_design(spec: DgpSpec, config: ScenarioConfig) -> np.ndarray:
    return spec.resample(config.strata, config.n, design_rng(config.master_seed))


def error_covariance(spec: DgpSpec, arm: int) -> np.ndarray:
    """Actual covariance of the error curves (t scale inflated by nu / (nu - 2))."""
    s = spec.sigma(arm)
    if spec.error_family is ErrorFamily.STUDENT_T:
        return s * spec.nu / (spec.nu - 2.0)
    return s


def _run_replicate(spec: DgpSpec, config: ScenarioConfig, X_fixed, r: int) -> ReplicateRecord:
    rng = replicate_rng(config.master_seed, r)
    if config.design is Design.RANDOM:
        X = spec.resample(config.strata, config.n, rng)
    else:
        X = X_fixed
    try:
        sample, redraws = generate_replicate(spec, X, rng)
    except DegenerateArmError as exc:
        raise DegenerateArmError(
            f"replicate {r} (n={config.n}, {config.design.value} design): {exc}"
        ) from exc
    fit1, fit0 = fit_arm(sample, 1), fit_arm(sample, 0)
    types = config.band_types
    est = {}
    if any(bt.known_covariance for bt in types):
        est["known"] = estimate_fate(fit1, fit0, X, sigma1=error_covariance(spec, 1),
                                     sigma0=error_covariance(spec, 0))
    if any(not bt.known_covariance for bt in types):
        est["hat"] = estimate_fate(fit1, fit0, X)
    df = config.pointwise_df(spec.K)
    lower, upper, thr, area = {}, {}, {}, {}
    for bt in types:
        e = est["known" if bt.known_covariance else "hat"]
        if bt.simultaneous:
            band = simultaneous_band(e, config.alpha, tail=config.simultaneous_tail)
        else:
            band = pointwise_t_band(e, config.alpha, df)
        lower[bt], upper[bt] = band.lower, band.upper
        thr[bt] = band.threshold
        area[bt] = band.area()
    theta_hat = next(iter(est.values())).theta
    return ReplicateRecord(xbar=X.mean(axis=0), theta_hat=theta_hat, lower=lower,
                           upper=upper, threshold=thr, area=area, redraws=redraws)


def simulate_scenario(spec: DgpSpec, config: ScenarioConfig, n_jobs: int = 1) -> ScenarioResult:
    """Run every replicate of one scenario and keep the per-replicate detail."""
    X_fixed = fixed_design(spec, config) if config.design is Design.FIXED else None

    def work(r):
        return _run_replicate(spec, config, X_fixed, r)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            records = list(pool.map(work, range(config.replicates)))
    else:
        records = [work(r) for r in range(config.replicates)]

    diff = spec.beta1 - spec.beta0
    if config.design is Design.FIXED:
        truth = X_fixed.mean(axis=0) @ diff
    else:
        truth = np.mean([rec.xbar for rec in records], axis=0) @ diff
    return ScenarioResult(config=config, error_family=spec.error_family,
                          grid_points=spec.grid.points, truth=truth, records=records)


def run_coverage(spec: DgpSpec, config: ScenarioConfig, n_jobs: int = 1) -> CoverageReport:
    """Empirical everywhere-coverage per band type for one scenario."""
    return simulate_scenario(spec, config, n_jobs=n_jobs).report()


@dataclass
class EstimatorLawCheck:
    """Monte Carlo summary of the sampling law of the FATE estimator."""

    truth: np.ndarray
    cov_theory: np.ndarray
    mean: np.ndarray
    cov: np.ndarray
    standardized: np.ndarray  # replicates x L

    @property
    def relative_frobenius_error(self) -> float:
        return float(np.linalg.norm(self.cov - self.cov_theory)
                     / np.linalg.norm(self.cov_theory))

    @property
    def mean_z_scores(self) -> np.ndarray:
        R = self.standardized.shape[0]
        se = np.sqrt(np.diag(self.cov_theory) / R)
        return (self.mean - self.truth) / se

    def skewness(self) -> np.ndarray:
        return stats.skew(self.standardized, axis=0)

    def excess_kurtosis(self) -> np.ndarray:
        return stats.kurtosis(self.standardized, axis=0)


def verify_estimator_law(spec: DgpSpec, n: int = 200, replicates: int = 10000,
                         seed: int = 0, strata=DEFAULT_STRATA) -> EstimatorLawCheck:
    """Check the conditional Gaussian law of the FATE estimator by simulation.

    Covariates and treatments are drawn once and held fixed; only the error
    curves are redrawn, so the estimator's law is exactly Gaussian with
    the covariance assembled from the true error covariances.
    """
    rng = design_rng(seed)
    X = spec.resample(strata, n, rng)
    sample, _ = generate_replicate(spec, X, rng)
    z = np.asarray(sample.z)
    fit1, fit0 = fit_arm(sample, 1), fit_arm(sample, 0)
    theory = estimate_fate(fit1, fit0, X, sigma1=error_covariance(spec, 1),
                           sigma0=error_covariance(spec, 0))
    truth = X.mean(axis=0) @ (spec.beta1 - spec.beta0)
    thetas = np.empty((replicates, len(spec.grid)))
    for r in range(replicates):
        Y = generate_outcomes(spec, X, z, replicate_rng(seed, r))
        s = FunctionalSample(grid=spec.grid, Y=Y, z=z, X=X)
        thetas[r] = estimate_fate(fit_arm(s, 1), fit_arm(s, 0), X).theta
    se = np.sqrt(np.diag(theory.cov))
    return EstimatorLawCheck(
        truth=truth,
        cov_theory=theory.cov,
        mean=thetas.mean(axis=0),
        cov=np.cov(thetas, rowvar=False),
        standardized=(thetas - truth) / se,
    )
