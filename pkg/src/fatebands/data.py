"""Core containers: the time grid and the observed functional sample."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._errors import EmptyArmError, ValidationError


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing evaluation points on [0, 1]."""

    points: np.ndarray

    def __post_init__(self):
        pts = _frozen(self.points)
        if pts.ndim != 1 or pts.size < 2:
            raise ValidationError("a time grid needs at least 2 points")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("time grid contains non-finite points")
        if np.any(np.diff(pts) <= 0):
            raise ValidationError("time grid must be strictly increasing")
        if pts[0] < 0 or pts[-1] > 1:
            raise ValidationError("time grid must lie inside [0, 1]")
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, size: int = 43) -> TimeGrid:
        return cls(np.linspace(0.0, 1.0, size))

    def __len__(self) -> int:
        return self.points.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeGrid):
            return NotImplemented
        return self.points.shape == other.points.shape and bool(
            np.array_equal(self.points, other.points)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class FunctionalSample:
    """n curves on a shared grid with treatment indicators and covariates.

    ``X`` includes the intercept as column 0.
    """

    grid: TimeGrid
    Y: np.ndarray
    z: np.ndarray
    X: np.ndarray
    covariate_names: tuple[str, ...] | None = None

    def __post_init__(self):
        Y = _frozen(self.Y)
        X = _frozen(self.X)
        z = np.asarray(self.z)
        if Y.ndim != 2 or X.ndim != 2 or z.ndim != 1:
            raise ValidationError("Y and X must be 2-d and z 1-d")
        n = Y.shape[0]
        if X.shape[0] != n or z.shape[0] != n:
            raise ValidationError(
                f"row counts disagree: Y={n}, X={X.shape[0]}, z={z.shape[0]}"
            )
        if Y.shape[1] != len(self.grid):
            raise ValidationError(
                f"Y has {Y.shape[1]} columns but the grid has {len(self.grid)} points"
            )
        if not (np.all(np.isfinite(Y)) and np.all(np.isfinite(X))):
            raise ValidationError("non-finite values in Y or X")
        if not np.all(X[:, 0] == 1.0):
            raise ValidationError("column 0 of X must be the intercept (all ones)")
        if not np.all((z == 0) | (z == 1)):
            raise ValidationError("treatment indicator must be binary")
        z = _frozen(z, dtype=np.int8)
        if z.sum() == 0 or z.sum() == n:
            raise EmptyArmError("both treatment arms must be non-empty")
        if self.covariate_names is not None:
            names = tuple(self.covariate_names)
            if len(names) != X.shape[1] - 1:
                raise ValidationError("need one name per non-intercept covariate")
            object.__setattr__(self, "covariate_names", names)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def n1(self) -> int:
        return int(self.z.sum())

    @property
    def n0(self) -> int:
        return self.n - self.n1

    @property
    def K(self) -> int:
        return self.X.shape[1] - 1

    def arm(self, z: int) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(X_z, Y_z)`` for one treatment arm."""
        mask = self.z == z
        return self.X[mask], self.Y[mask]
