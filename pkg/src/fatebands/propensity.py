"""Logistic propensity model: IRLS fit, prediction, and overlap diagnostics."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special

from ._errors import DimensionMismatchError, SeparationError, ValidationError

#: Linear predictors beyond this magnitude count as saturated.
SEPARATION_ETA = 30.0
MAX_HALVINGS = 10


@dataclass(frozen=True, eq=False)
class PropensityModel:
    gamma: np.ndarray
    converged: bool
    iterations: int
    final_gradient_norm: float
    std_errors: np.ndarray | None = None
    loglik_trace: tuple[float, ...] = field(default_factory=tuple)

    @property
    def log_likelihood(self) -> float:
        return self.loglik_trace[-1] if self.loglik_trace else float("nan")


@dataclass(frozen=True)
class OverlapReport:
    min_pi_treated: float
    max_pi_treated: float
    min_pi_control: float
    max_pi_control: float
    bin_edges: np.ndarray
    histogram_treated: np.ndarray
    histogram_control: np.ndarray


def _loglik(eta, z):
    return float(np.sum(z * eta - np.logaddexp(0.0, eta)))


def _separated(eta, z):
    for cls in (0, 1):
        sel = eta[z == cls]
        if sel.size and np.all(np.abs(sel) > SEPARATION_ETA):
            return True
    return False


def _improves_along_ray(gamma, eta, z, objective):
    """Whether stretching ``gamma`` until one class saturates still raises the objective.

    At a finite maximum this is impossible (strict concavity); under
    separation the score vanishes numerically well before |eta| = 30, so a
    small score alone cannot distinguish the two.
    """
    ll = objective(gamma, eta)
    for cls in (0, 1):
        m = np.min(np.abs(eta[z == cls]))
        if m <= 1.0:
            continue
        scale = max(1.0, (SEPARATION_ETA + 1.0) / m)
        if objective(scale * gamma, scale * eta) > ll:
            return True
    return False


def fit_logistic(X, z, max_iter: int = 50, tol: float = 1e-8,
                 ridge: float = 0.0) -> PropensityModel:
    """Maximum-likelihood logistic regression by iteratively reweighted least squares.

    Each Newton step is halved (at most 10 times) while it lowers the
    log-likelihood.  Convergence is declared when the max-norm of the score
    falls below ``tol``.  A positive ``ridge`` adds ``ridge * |gamma|^2 / 2``
    (intercept excluded) to the objective; it is off by default.

    Raises
    ------
    SeparationError
        When every observation of one class has ``|x^T gamma| > 30`` while the
        likelihood is still improving.  The last iterate is attached.
    """
    X = np.asarray(X, dtype=float)
    z = np.asarray(z, dtype=float)
    if X.ndim != 2 or z.shape != (X.shape[0],):
        raise DimensionMismatchError("X must be n x p and z of length n")
    if not np.all((z == 0) | (z == 1)):
        raise ValidationError("z must be binary")
    if z.min() == z.max():
        raise ValidationError("both classes must be present")
    if not np.all(X[:, 0] == 1.0):
        raise ValidationError("column 0 of X must be the intercept")

    p = X.shape[1]
    penalty = np.full(p, float(ridge))
    penalty[0] = 0.0

    def objective(g, eta):
        return _loglik(eta, z) - 0.5 * float(penalty @ (g * g))

    gamma = np.zeros(p)
    eta = X @ gamma
    ll = objective(gamma, eta)
    trace = [ll]
    converged = False
    grad_norm = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        pi = special.expit(eta)
        score = X.T @ (z - pi) - penalty * gamma
        grad_norm = float(np.max(np.abs(score)))
        if grad_norm < tol:
            converged = True
            it -= 1
            break
        w = pi * (1.0 - pi)
        info = (X * w[:, None]).T @ X + np.diag(penalty)
        try:
            step = linalg.solve(info, score, assume_a="pos")
        except linalg.LinAlgError:
            step = linalg.lstsq(info, score)[0]
        for _ in range(MAX_HALVINGS + 1):
            cand = gamma + step
            eta_c = X @ cand
            ll_c = objective(cand, eta_c)
            if ll_c >= ll:
                break
            step = step / 2
        else:
            # no ascent direction found; keep the current iterate
            break
        improved = ll_c > ll
        gamma, eta, ll = cand, eta_c, ll_c
        trace.append(ll)
        if improved and _separated(eta, z):
            model = _finish(X, gamma, False, it, grad_norm, trace, penalty)
            raise SeparationError(
                "quasi-separation: all observations of one class have "
                f"|linear predictor| > {SEPARATION_ETA:g}",
                model=model,
            )
    else:
        pi = special.expit(eta)
        grad_norm = float(np.max(np.abs(X.T @ (z - pi) - penalty * gamma)))
        converged = grad_norm < tol

    if converged and _improves_along_ray(gamma, eta, z, objective):
        model = _finish(X, gamma, False, it, grad_norm, trace, penalty)
        raise SeparationError(
            "quasi-separation: the likelihood keeps increasing as the linear "
            f"predictor of one class is pushed beyond |{SEPARATION_ETA:g}|",
            model=model,
        )
    if not converged:
        warnings.warn(
            f"IRLS did not converge in {max_iter} iterations "
            f"(score norm {grad_norm:.3g})",
            RuntimeWarning,
            stacklevel=2,
        )
    return _finish(X, gamma, converged, it, grad_norm, trace, penalty)


def _finish(X, gamma, converged, iterations, grad_norm, trace, penalty):
    pi = special.expit(X @ gamma)
    w = pi * (1.0 - pi)
    info = (X * w[:, None]).T @ X + np.diag(penalty)
    try:
        se = np.sqrt(np.diag(linalg.inv(info)))
    except linalg.LinAlgError:
        se = np.full(gamma.shape, np.nan)
    return PropensityModel(
        gamma=gamma,
        converged=bool(converged),
        iterations=int(iterations),
        final_gradient_norm=float(grad_norm),
        std_errors=se,
        loglik_trace=tuple(trace),
    )


def predict_propensity(model: PropensityModel | np.ndarray, X) -> np.ndarray:
    """Logistic of ``X @ gamma`` (``scipy.special.expit``, safe for any magnitude)."""
    gamma = model.gamma if isinstance(model, PropensityModel) else np.asarray(model, float)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != gamma.size:
        raise DimensionMismatchError(
            f"X has {X.shape[-1]} columns, model has {gamma.size} coefficients"
        )
    return special.expit(X @ gamma)


def overlap_report(pi, z, n_bins: int = 20) -> OverlapReport:
    """Per-arm support and equal-width histograms of propensity scores on [0, 1]."""
    pi = np.asarray(pi, dtype=float)
    z = np.asarray(z)
    if pi.shape != z.shape:
        raise DimensionMismatchError("pi and z lengths differ")
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    treated, control = pi[z == 1], pi[z == 0]

    def ext(a, f):
        return float(f(a)) if a.size else float("nan")

    return OverlapReport(
        min_pi_treated=ext(treated, np.min),
        max_pi_treated=ext(treated, np.max),
        min_pi_control=ext(control, np.min),
        max_pi_control=ext(control, np.max),
        bin_edges=edges,
        histogram_treated=np.histogram(treated, bins=edges)[0],
        histogram_control=np.histogram(control, bins=edges)[0],
    )
