"""Level-set extraction on grids, Hausdorff distance and dilation membership.

Level sets are finite point clouds: roots of the piecewise-linear interpolant
in d = 1, densified marching-squares contours in d = 2.
"""
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from classes.Errors import EmptySetError, InvalidParameterError
from classes.EvalGrid import EvalGrid

DUPLICATE_TOLERANCE = 1e-12

# Cell corners are numbered 00 -> bit 1, 10 -> bit 2, 11 -> bit 4, 01 -> bit 8.
# Edges: B = 00-10, R = 10-11, T = 01-11, L = 00-01.
MARCHING_SQUARES_TABLE = {
    1: [("L", "B")],
    2: [("B", "R")],
    3: [("L", "R")],
    4: [("R", "T")],
    6: [("B", "T")],
    7: [("L", "T")],
    8: [("L", "T")],
    9: [("B", "T")],
    11: [("R", "T")],
    12: [("L", "R")],
    13: [("B", "R")],
    14: [("L", "B")],
}
# Saddles, keyed by whether the cell-centre average is above the level
SADDLE_TABLE = {
    5: {True: [("B", "R"), ("L", "T")], False: [("L", "B"), ("R", "T")]},
    10: {True: [("L", "B"), ("R", "T")], False: [("B", "R"), ("L", "T")]},
}


def _deduplicate(points: np.ndarray) -> np.ndarray:
    if points.shape[0] < 2:
        return points
    order = np.lexsort(points.T[::-1])
    points = points[order]
    gaps = np.linalg.norm(np.diff(points, axis=0), axis=1)
    keep = np.concatenate([[True], gaps > DUPLICATE_TOLERANCE])
    return points[keep]


@dataclass(frozen=True)
class PointSet:
    points: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        if points.ndim != 2 or points.shape[1] not in (1, 2):
            raise InvalidParameterError(f"Point set must be m x d, got shape {points.shape}")
        if not np.all(np.isfinite(points)):
            raise InvalidParameterError("Point set contains non-finite coordinates")
        object.__setattr__(self, "points", _deduplicate(points))

    @classmethod
    def empty(cls, dimension: int) -> "PointSet":
        return cls(np.empty((0, dimension)))

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def is_empty(self) -> bool:
        return self.size == 0


def _edge_crossings(f0, f1, c0, c1):
    """Where the linear interpolant between two corners meets zero"""
    with np.errstate(invalid="ignore", divide="ignore"):
        t = f0 / (f0 - f1)
    return c0 + np.clip(t, 0.0, 1.0) * (c1 - c0)


class LevelSet:
    @staticmethod
    def extract_level_set_1d(values: np.ndarray, grid: EvalGrid, level: float) -> PointSet:
        """Roots of values - level on the piecewise-linear interpolant.

        Grid points within 1e-10 * max|values| of the level count as exact hits;
        non-finite values break the curve.
        """
        if grid.dimension != 1:
            raise InvalidParameterError("extract_level_set_1d needs a 1-d grid")
        xs = grid.axes[0]
        values = np.asarray(values, dtype=float).ravel()
        finite = np.isfinite(values)
        if not np.any(finite):
            return PointSet.empty(1)

        f = values - level
        tolerance = 1e-10 * np.max(np.abs(values[finite]))
        hits = finite & (np.abs(f) <= tolerance)

        left, right = f[:-1], f[1:]
        crossing = (
            finite[:-1] & finite[1:] & ~hits[:-1] & ~hits[1:] & (np.sign(left) != np.sign(right))
        )
        i = np.nonzero(crossing)[0]
        roots = xs[i] + left[i] / (left[i] - right[i]) * (xs[i + 1] - xs[i])

        points = np.sort(np.concatenate([xs[hits], roots]))
        return PointSet(points[:, None])

    @staticmethod
    def extract_level_set_2d(values: np.ndarray, grid: EvalGrid, level: float) -> PointSet:
        """Marching-squares contour of values at level, densified to one grid spacing.

        Saddle cells are resolved by the average of the four corner values.
        Cells with a non-finite corner are skipped.
        """
        if grid.dimension != 2:
            raise InvalidParameterError("extract_level_set_2d needs a 2-d grid")
        xs, ys = grid.axes
        f = np.asarray(values, dtype=float).reshape(grid.shape) - level

        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        # crossing points on every horizontal (x-direction) and vertical edge
        horizontal_x = _edge_crossings(f[:-1, :], f[1:, :], gx[:-1, :], gx[1:, :])
        vertical_y = _edge_crossings(f[:, :-1], f[:, 1:], gy[:, :-1], gy[:, 1:])

        def edge_points(name, i, j):
            if name == "B":
                return np.stack([horizontal_x[i, j], ys[j]], axis=-1)
            if name == "T":
                return np.stack([horizontal_x[i, j + 1], ys[j + 1]], axis=-1)
            if name == "L":
                return np.stack([xs[i], vertical_y[i, j]], axis=-1)
            return np.stack([xs[i + 1], vertical_y[i + 1, j]], axis=-1)

        above = f > 0
        corners = (f[:-1, :-1], f[1:, :-1], f[1:, 1:], f[:-1, 1:])
        case = (
            above[:-1, :-1] * 1 + above[1:, :-1] * 2 + above[1:, 1:] * 4 + above[:-1, 1:] * 8
        )
        valid = np.all([np.isfinite(c) for c in corners], axis=0)
        centre_above = (sum(corners) / 4.0) > 0

        starts, ends = [], []
        for index, segments in MARCHING_SQUARES_TABLE.items():
            i, j = np.nonzero(valid & (case == index))
            for a, b in segments:
                starts.append(edge_points(a, i, j))
                ends.append(edge_points(b, i, j))
        for index, resolution in SADDLE_TABLE.items():
            for centre, segments in resolution.items():
                i, j = np.nonzero(valid & (case == index) & (centre_above == centre))
                for a, b in segments:
                    starts.append(edge_points(a, i, j))
                    ends.append(edge_points(b, i, j))

        if not starts:
            return PointSet.empty(2)
        start = np.concatenate(starts).reshape(-1, 2)
        end = np.concatenate(ends).reshape(-1, 2)
        if start.shape[0] == 0:
            return PointSet.empty(2)

        spacing = min(grid.spacing)
        pieces = np.maximum(1, np.ceil(np.linalg.norm(end - start, axis=1) / spacing)).astype(int)
        points = [start, end]
        for count in np.unique(pieces[pieces > 1]):
            chosen = pieces == count
            fractions = np.arange(1, count) / count
            inner = start[chosen, None, :] + fractions[None, :, None] * (
                end[chosen] - start[chosen]
            )[:, None, :]
            points.append(inner.reshape(-1, 2))
        return PointSet(np.concatenate(points))

    @staticmethod
    def extract(values: np.ndarray, grid: EvalGrid, level: float) -> PointSet:
        if grid.dimension == 1:
            return LevelSet.extract_level_set_1d(values, grid, level)
        return LevelSet.extract_level_set_2d(values, grid, level)

    @staticmethod
    def hausdorff(a: PointSet, b: PointSet) -> float:
        """Exact Hausdorff distance between two finite point sets

        Raises:
            EmptySetError: When either set is empty
        """
        if a.is_empty() or b.is_empty():
            raise EmptySetError("Hausdorff distance needs two non-empty sets")
        distances = cdist(a.points, b.points)
        return float(max(distances.min(axis=1).max(), distances.min(axis=0).max()))

    @staticmethod
    def dilation_covers(center: PointSet, radius: float, query: PointSet) -> bool:
        """True iff every query point lies within radius of some center point"""
        if radius < 0:
            raise InvalidParameterError(f"radius must be non-negative, got {radius}")
        if query.is_empty():
            return True
        if center.is_empty():
            raise EmptySetError("Dilation of an empty set")
        distances = cdist(query.points, center.points)
        return bool(np.all(distances.min(axis=1) <= radius))
