"""Kernel functions, their Laplacians and the debiased kernel M_tau.

Kernels are product kernels built from a one-dimensional profile, so the same
code serves d = 1 and d = 2. The gaussian product kernel is the isotropic
gaussian. Points are passed as arrays whose last axis holds the d coordinates
(for d = 1 a plain array of scalars is also accepted).
"""
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Callable, Union

import numpy as np
from scipy import integrate

from classes.Errors import InvalidParameterError, QuadratureError

QUADRATURE_TOLERANCE = 1e-10
GAUSSIAN_NORMALIZER = 1.0 / np.sqrt(2.0 * np.pi)

ArrayLike = Union[float, np.ndarray]


class KernelKind(str, Enum):
    gaussian = "gaussian"
    biweight = "biweight"


def _gaussian_profile(u: np.ndarray) -> np.ndarray:
    return GAUSSIAN_NORMALIZER * np.exp(-0.5 * u * u)


def _gaussian_profile_dd(u: np.ndarray) -> np.ndarray:
    return (u * u - 1.0) * _gaussian_profile(u)


def _biweight_profile(u: np.ndarray) -> np.ndarray:
    inside = np.abs(u) <= 1.0
    return np.where(inside, 15.0 / 16.0 * (1.0 - u * u) ** 2, 0.0)


def _biweight_profile_dd(u: np.ndarray) -> np.ndarray:
    inside = np.abs(u) <= 1.0
    return np.where(inside, 15.0 / 16.0 * (12.0 * u * u - 4.0), 0.0)


PROFILES = {
    KernelKind.gaussian: (_gaussian_profile, _gaussian_profile_dd, 10.0),
    KernelKind.biweight: (_biweight_profile, _biweight_profile_dd, 1.0),
}


def integrate_1d(fn: Callable[[float], float], half_width: float) -> float:
    """Adaptive Gauss-Kronrod quadrature of fn on [-half_width, half_width]

    Raises:
        QuadratureError: When the error estimate exceeds the tolerance
    """
    value, abserr = integrate.quad(
        fn,
        -half_width,
        half_width,
        epsabs=QUADRATURE_TOLERANCE,
        epsrel=QUADRATURE_TOLERANCE,
        limit=200,
    )
    if not np.isfinite(value) or abserr > 100 * QUADRATURE_TOLERANCE:
        raise QuadratureError(
            f"Quadrature did not converge (value={value}, error={abserr})"
        )
    return value


def integrate_2d(fn: Callable[[float, float], float], half_width: float) -> float:
    """Nested adaptive quadrature of fn(x, y) over the square [-half_width, half_width]^2"""
    value, abserr = integrate.dblquad(
        lambda y, x: fn(x, y),
        -half_width,
        half_width,
        -half_width,
        half_width,
        epsabs=QUADRATURE_TOLERANCE,
        epsrel=QUADRATURE_TOLERANCE,
    )
    if not np.isfinite(value) or abserr > 1e-8:
        raise QuadratureError(
            f"Quadrature did not converge (value={value}, error={abserr})"
        )
    return value


@lru_cache(maxsize=None)
def _profile_moment(kind: KernelKind, power: int) -> float:
    if kind is KernelKind.gaussian:
        if power % 2:
            return 0.0
        # (power - 1)!!, with the empty product for power 0
        return float(np.prod(np.arange(power - 1, 0, -2), dtype=float))

    profile, _, half_width = PROFILES[kind]
    return integrate_1d(lambda u: u**power * float(profile(u)), half_width)


@dataclass(frozen=True)
class MomentMatrix:
    order: int
    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        expected = (self.order + 1, self.order + 1)
        if entries.shape != expected:
            raise InvalidParameterError(
                f"Moment matrix of order {self.order} needs shape {expected}"
            )
        object.__setattr__(self, "entries", entries)


@dataclass(frozen=True)
class KernelSpec:
    kind: KernelKind = KernelKind.gaussian
    dimension: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))
        if self.dimension not in (1, 2):
            raise InvalidParameterError(
                f"Kernel dimension must be 1 or 2, got {self.dimension}"
            )

    @property
    def support(self) -> float:
        """Half width of the per-axis integration window"""
        return PROFILES[self.kind][2]

    def _split_axes(self, x: ArrayLike):
        x = np.asarray(x, dtype=float)
        if self.dimension == 1:
            # (m, 1) arrays carry an explicit coordinate axis
            if x.ndim >= 2 and x.shape[-1] == 1:
                x = x[..., 0]
            return [x]

        if x.shape[-1] != 2:
            raise InvalidParameterError(
                f"Expected points with 2 coordinates, got shape {x.shape}"
            )
        return [x[..., 0], x[..., 1]]

    def evaluate(self, x: ArrayLike) -> ArrayLike:
        """Kernel value K(x)

        Args:
            x (ArrayLike): Point(s), coordinates along the last axis

        Returns:
            ArrayLike: K(x) >= 0, one value per point
        """
        profile = PROFILES[self.kind][0]
        value = np.ones(())
        for axis in self._split_axes(x):
            value = value * profile(axis)
        return value[()] if np.ndim(value) == 0 else value

    def laplacian(self, x: ArrayLike) -> ArrayLike:
        """Laplacian of the kernel. For the gaussian it equals (|x|^2 - d) K(x)

        Args:
            x (ArrayLike): Point(s), coordinates along the last axis

        Returns:
            ArrayLike: sum of second partial derivatives at each point
        """
        profile, profile_dd, _ = PROFILES[self.kind]
        axes = self._split_axes(x)
        values = [profile(axis) for axis in axes]
        second = [profile_dd(axis) for axis in axes]

        total = np.zeros(())
        for j in range(len(axes)):
            term = second[j]
            for i, value in enumerate(values):
                if i != j:
                    term = term * value
            total = total + term
        return total[()] if np.ndim(total) == 0 else total

    @property
    def ck(self) -> float:
        """c_K, the second moment of one coordinate of the kernel"""
        return _profile_moment(self.kind, 2)

    def moment_matrix(self, order: int) -> MomentMatrix:
        """Matrix of kernel moments with entry (i, j) = int u^(i+j) K(u) du (0-indexed)

        Args:
            order (int): Polynomial order, 1 or 3

        Returns:
            MomentMatrix: (order + 1) x (order + 1) symmetric matrix
        """
        if self.dimension != 1:
            raise InvalidParameterError("Moment matrices are defined for d = 1")
        if order not in (1, 3):
            raise InvalidParameterError(f"Order must be 1 or 3, got {order}")

        size = order + 1
        entries = np.empty((size, size))
        for i in range(size):
            for j in range(size):
                entries[i, j] = _profile_moment(self.kind, i + j)
        return MomentMatrix(order=order, entries=entries)


@dataclass(frozen=True)
class DebiasedKernel:
    """M_tau(x) = K(x) - 1/2 c_K tau^(d+2) Laplacian K(tau x), a fourth-order kernel"""

    base: KernelSpec
    tau: float = 1.0
    c_k: float = field(init=False)

    def __post_init__(self):
        if not np.isfinite(self.tau) or self.tau <= 0:
            raise InvalidParameterError(f"tau must be positive, got {self.tau}")
        object.__setattr__(self, "c_k", self.base.ck)

    def evaluate(self, x: ArrayLike) -> ArrayLike:
        x = np.asarray(x, dtype=float)
        d = self.base.dimension
        correction = self.base.laplacian(self.tau * x)
        return self.base.evaluate(x) - 0.5 * self.c_k * self.tau ** (d + 2) * correction
