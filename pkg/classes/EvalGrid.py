"""Evaluation grids. Suprema over the support are approximated by maxima over these points."""
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

import config
from classes.Errors import InvalidParameterError


@dataclass(frozen=True)
class EvalGrid:
    axes: Tuple[np.ndarray, ...]

    def __post_init__(self):
        axes = tuple(np.asarray(axis, dtype=float).ravel() for axis in self.axes)
        if len(axes) not in (1, 2):
            raise InvalidParameterError(f"Grid must have 1 or 2 axes, got {len(axes)}")
        for axis in axes:
            if axis.size < 2:
                raise InvalidParameterError("Each grid axis needs at least 2 points")
            if not np.all(np.isfinite(axis)) or np.any(np.diff(axis) <= 0):
                raise InvalidParameterError(
                    "Grid coordinates must be finite and strictly increasing"
                )
        object.__setattr__(self, "axes", axes)

    @classmethod
    def from_range(
        cls,
        lower: Sequence[float],
        upper: Sequence[float],
        num: Optional[int] = None,
    ) -> "EvalGrid":
        """Equispaced grid between lower and upper along every axis

        Args:
            lower (Sequence[float]): Lower bound per axis (a scalar for d = 1)
            upper (Sequence[float]): Upper bound per axis
            num (Optional[int]): Points per axis. Defaults to 512 for d = 1 and
                128 for d = 2.
        """
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if num is None:
            num = (
                config.DEFAULT_GRID_SIZE_1D
                if lower.size == 1
                else config.DEFAULT_GRID_SIZE_2D
            )
        return cls(tuple(np.linspace(lo, hi, num) for lo, hi in zip(lower, upper)))

    @classmethod
    def default_for(
        cls, points: np.ndarray, h: float, num: Optional[int] = None
    ) -> "EvalGrid":
        """Data range extended by 3h on each side"""
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        pad = config.GRID_PADDING_BANDWIDTHS * h
        return cls.from_range(points.min(axis=0) - pad, points.max(axis=0) + pad, num)

    @property
    def dimension(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(axis.size for axis in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> Tuple[float, ...]:
        """Largest gap between neighbouring coordinates, per axis"""
        return tuple(float(np.max(np.diff(axis))) for axis in self.axes)

    @property
    def lower(self) -> np.ndarray:
        return np.array([axis[0] for axis in self.axes])

    @property
    def upper(self) -> np.ndarray:
        return np.array([axis[-1] for axis in self.axes])

    @property
    def points(self) -> np.ndarray:
        """All grid points as a (size, d) array in row-major order of `shape`"""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def integrate(self, values: np.ndarray) -> float:
        """Trapezoid rule of grid values over the grid box"""
        result = np.asarray(values, dtype=float).reshape(self.shape)
        for axis in reversed(self.axes):
            result = integrate.trapezoid(result, axis, axis=-1)
        return float(result)

    def refine(self, factor: int) -> "EvalGrid":
        """Grid over the same box with `factor` times as many intervals per axis"""
        return EvalGrid(
            tuple(
                np.linspace(axis[0], axis[-1], (axis.size - 1) * factor + 1)
                for axis in self.axes
            )
        )

    def shifted(self, offset: Sequence[float]) -> "EvalGrid":
        offset = np.atleast_1d(np.asarray(offset, dtype=float))
        return EvalGrid(tuple(axis + c for axis, c in zip(self.axes, offset)))
