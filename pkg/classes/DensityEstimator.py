"""Kernel density estimator, its Laplacian estimator and the debiased KDE.

All estimators are evaluated directly, O(n * grid size), in blocks of grid
points. Each grid value is the sum over the sample in sample order, so values
do not depend on how the grid is partitioned.
"""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from classes.Errors import InvalidParameterError
from classes.EvalGrid import EvalGrid
from classes.Kernel import DebiasedKernel, KernelSpec
from classes.Sample import Sample

# Upper bound on the number of (grid point, observation) pairs held at once
BLOCK_ELEMENTS = 1 << 21


@dataclass(frozen=True)
class DensityEstimate:
    grid: EvalGrid
    values: np.ndarray
    h: float
    kernel: KernelSpec
    debiased: bool = False
    tau: Optional[float] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(self.grid.shape)
        object.__setattr__(self, "values", values)

    def integral(self) -> float:
        return self.grid.integrate(self.values)


def kernel_sums(
    query: np.ndarray,
    data: np.ndarray,
    bandwidth: float,
    kernel_fn: Callable[[np.ndarray], np.ndarray],
) -> np.ndarray:
    """For every query point x, sum_i kernel_fn((x - X_i) / bandwidth)

    Args:
        query (np.ndarray): (m, d) query points
        data (np.ndarray): (n, d) observations
        bandwidth (float): Scale applied to the differences
        kernel_fn (Callable): Function of an (..., d) array of scaled differences

    Returns:
        np.ndarray: (m,) sums
    """
    query = np.asarray(query, dtype=float)
    data = np.asarray(data, dtype=float)
    sums = np.empty(query.shape[0])
    rows = max(1, BLOCK_ELEMENTS // max(1, data.shape[0]))
    for start in range(0, query.shape[0], rows):
        stop = start + rows
        scaled = (query[start:stop, None, :] - data[None, :, :]) / bandwidth
        sums[start:stop] = np.sum(kernel_fn(scaled), axis=1)
    return sums


class DensityEstimator:
    @staticmethod
    def _check(sample: Sample, bandwidth: float, kernel: KernelSpec, grid: EvalGrid):
        if not np.isfinite(bandwidth) or bandwidth <= 0:
            raise InvalidParameterError(f"Bandwidth must be positive, got {bandwidth}")
        if not (sample.d == kernel.dimension == grid.dimension):
            raise InvalidParameterError(
                f"Dimension mismatch: sample d={sample.d}, kernel"
                f" d={kernel.dimension}, grid d={grid.dimension}"
            )

    @staticmethod
    def kde_eval(
        sample: Sample, h: float, kernel: KernelSpec, grid: EvalGrid
    ) -> DensityEstimate:
        """Plain KDE, (1 / (n h^d)) sum_i K((x - X_i) / h)"""
        DensityEstimator._check(sample, h, kernel, grid)
        sums = kernel_sums(grid.points, sample.points, h, kernel.evaluate)
        values = sums / (sample.n * h**sample.d)
        return DensityEstimate(grid=grid, values=values, h=h, kernel=kernel)

    @staticmethod
    def kde_laplacian_eval(
        sample: Sample, b: float, kernel: KernelSpec, grid: EvalGrid
    ) -> DensityEstimate:
        """Laplacian estimator, (1 / (n b^(d+2))) sum_i Laplacian K((x - X_i) / b)"""
        DensityEstimator._check(sample, b, kernel, grid)
        sums = kernel_sums(grid.points, sample.points, b, kernel.laplacian)
        values = sums / (sample.n * b ** (sample.d + 2))
        return DensityEstimate(grid=grid, values=values, h=b, kernel=kernel)

    @staticmethod
    def debiased_kde_eval(
        sample: Sample, h: float, tau: float, kernel: KernelSpec, grid: EvalGrid
    ) -> DensityEstimate:
        """Debiased KDE, (1 / (n h^d)) sum_i M_tau((x - X_i) / h).

        Equal to kde_eval(h) - 1/2 c_K h^2 kde_laplacian_eval(h / tau).
        """
        DensityEstimator._check(sample, h, kernel, grid)
        debiased_kernel = DebiasedKernel(kernel, tau)
        sums = kernel_sums(grid.points, sample.points, h, debiased_kernel.evaluate)
        values = sums / (sample.n * h**sample.d)
        return DensityEstimate(
            grid=grid, values=values, h=h, kernel=kernel, debiased=True, tau=tau
        )

    @staticmethod
    def estimate(
        sample: Sample,
        h: float,
        tau: float,
        kernel: KernelSpec,
        grid: EvalGrid,
        debiased: bool = True,
    ) -> DensityEstimate:
        """Debiased or plain KDE depending on the flag"""
        if debiased:
            return DensityEstimator.debiased_kde_eval(sample, h, tau, kernel, grid)
        return DensityEstimator.kde_eval(sample, h, kernel, grid)

    @staticmethod
    def leave_one_out(sample: Sample, h: float, kernel: KernelSpec) -> np.ndarray:
        """p_{h,-i}(X_i) for every observation"""
        if not np.isfinite(h) or h <= 0:
            raise InvalidParameterError(f"Bandwidth must be positive, got {h}")
        sums = kernel_sums(sample.points, sample.points, h, kernel.evaluate)
        self_term = kernel.evaluate(np.zeros((1, sample.d)))[0]
        return (sums - self_term) / ((sample.n - 1) * h**sample.d)
