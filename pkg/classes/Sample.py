"""Observed data: i.i.d. points for density work and covariate/response pairs for regression."""
from dataclasses import dataclass

import numpy as np

from classes.Errors import InvalidParameterError


@dataclass(frozen=True)
class Sample:
    points: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        if points.ndim != 2 or points.shape[1] not in (1, 2):
            raise InvalidParameterError(
                f"Sample points must be n x d with d in (1, 2), got shape {points.shape}"
            )
        if points.shape[0] < 2:
            raise InvalidParameterError(
                f"Sample needs at least 2 points, got {points.shape[0]}"
            )
        if not np.all(np.isfinite(points)):
            raise InvalidParameterError("Sample contains non-finite values")
        object.__setattr__(self, "points", points)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def take(self, indices: np.ndarray) -> "Sample":
        """Sample made of the rows at indices (repeats allowed)"""
        return Sample(self.points[indices])


@dataclass(frozen=True)
class PairedSample:
    x: np.ndarray
    y: np.ndarray

    MIN_SIZE = 5
    MIN_DISTINCT_X = 4

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        if x.shape != y.shape:
            raise InvalidParameterError(
                f"x and y lengths differ ({x.size} vs {y.size})"
            )
        if x.size < self.MIN_SIZE:
            raise InvalidParameterError(
                f"Paired sample needs at least {self.MIN_SIZE} rows, got {x.size}"
            )
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidParameterError("Paired sample contains non-finite values")
        if np.unique(x).size < self.MIN_DISTINCT_X:
            raise InvalidParameterError(
                f"Paired sample needs at least {self.MIN_DISTINCT_X} distinct x values"
            )
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.size

    def take(self, indices: np.ndarray) -> "PairedSample":
        """Rows at indices, pairs kept together"""
        return PairedSample(self.x[indices], self.y[indices])
