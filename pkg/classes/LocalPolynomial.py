"""Local linear smoother, local cubic second-derivative estimator and the debiased smoother.

Fits are computed in the scaled design, columns ((X_i - x) / h)^j, and mapped
back with Gamma_h = diag(1, h^-1, h^-2, h^-3). Grid points whose local window
is degenerate are returned as NaN; a call fails once more than 5% of the grid
is degenerate.
"""
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

import config
from classes.Errors import DegenerateFitError, InvalidParameterError
from classes.EvalGrid import EvalGrid
from classes.Kernel import KernelSpec
from classes.Sample import PairedSample

MIN_WEIGHT_MASS = 1e-12
# Windows whose unridged gram matrix is worse conditioned than this are degenerate
MAX_CONDITION = 1e12
BLOCK_ELEMENTS = 1 << 20

log = config.log


@dataclass(frozen=True)
class RegressionEstimate:
    grid: EvalGrid
    values: np.ndarray
    h: float
    kernel: KernelSpec
    debiased: bool = False
    tau: Optional[float] = None
    derivative: int = 0

    def __post_init__(self):
        if self.grid.dimension != 1:
            raise InvalidParameterError("Regression grids are one-dimensional")
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float).ravel())

    @property
    def degenerate(self) -> np.ndarray:
        """Mask of grid points without an estimate"""
        return ~np.isfinite(self.values)


def _check_bandwidth(name: str, value: float):
    if not np.isfinite(value) or value <= 0:
        raise InvalidParameterError(f"{name} must be positive, got {value}")


def _check_kernel(kernel: KernelSpec):
    if kernel.dimension != 1:
        raise InvalidParameterError("Regression needs a one-dimensional kernel")


def _scaled_window(
    covariates: np.ndarray, query: np.ndarray, bandwidth: float, kernel: KernelSpec
) -> Tuple[np.ndarray, np.ndarray]:
    """Scaled offsets u = (X_i - x) / bandwidth and weights K(u), both (m, n)"""
    u = (covariates[None, :] - query[:, None]) / bandwidth
    return u, kernel.evaluate(u[..., None])


def _local_linear_at(
    ps: PairedSample, query: np.ndarray, h: float, kernel: KernelSpec
) -> np.ndarray:
    """Weight form r_h(x) = sum_i l_i(x) Y_i, NaN where the window is degenerate"""
    query = np.asarray(query, dtype=float).ravel()
    values = np.full(query.size, np.nan)
    rows = max(1, BLOCK_ELEMENTS // ps.n)
    for start in range(0, query.size, rows):
        stop = start + rows
        u, weights = _scaled_window(ps.x, query[start:stop], h, kernel)
        s0 = weights.sum(axis=1)
        s1 = (weights * u).sum(axis=1)
        s2 = (weights * u * u).sum(axis=1)
        omega = weights * (s2[:, None] - u * s1[:, None])
        mass = omega.sum(axis=1)

        ok = (s0 >= MIN_WEIGHT_MASS) & (mass > config.RIDGE * s0 * s2)
        with np.errstate(invalid="ignore", divide="ignore"):
            fitted = (omega * ps.y[None, :]).sum(axis=1) / mass
        values[start:stop] = np.where(ok, fitted, np.nan)
    return values


def _local_poly_coefficients(
    ps: PairedSample,
    query: np.ndarray,
    bandwidth: float,
    kernel: KernelSpec,
    degree: int,
) -> np.ndarray:
    """Scaled-design WLS coefficients gamma_j, shape (m, degree + 1), NaN rows if degenerate"""
    query = np.asarray(query, dtype=float).ravel()
    size = degree + 1
    gammas = np.full((query.size, size), np.nan)
    powers = np.arange(size)
    rows = max(1, BLOCK_ELEMENTS // (ps.n * size))
    for start in range(0, query.size, rows):
        stop = start + rows
        u, weights = _scaled_window(ps.x, query[start:stop], bandwidth, kernel)
        design = u[..., None] ** powers  # (m, n, size)
        weighted = design * weights[..., None]
        gram = np.einsum("mni,mnj->mij", weighted, design)
        rhs = np.einsum("mni,n->mi", weighted, ps.y)

        mass = weights.sum(axis=1)
        with np.errstate(invalid="ignore", over="ignore"):
            condition = np.linalg.cond(gram)
        ok = (mass >= MIN_WEIGHT_MASS) & np.isfinite(condition)
        ok &= condition < MAX_CONDITION
        if not np.any(ok):
            continue

        gram_ok, rhs_ok = gram[ok], rhs[ok]
        ridge = config.RIDGE * np.trace(gram_ok, axis1=1, axis2=2) / size
        ridged = gram_ok + ridge[:, None, None] * np.eye(size)
        solution = np.linalg.solve(ridged, rhs_ok[..., None])
        # one refinement step against the unridged system removes the ridge bias
        residual = rhs_ok[..., None] - gram_ok @ solution
        solution = solution + np.linalg.solve(ridged, residual)

        block = np.full((ok.size, size), np.nan)
        block[ok] = solution[..., 0]
        gammas[start:stop] = block
    return gammas


def _wls_intercept_at(
    ps: PairedSample, query: np.ndarray, h: float, kernel: KernelSpec
) -> np.ndarray:
    return _local_poly_coefficients(ps, query, h, kernel, degree=1)[:, 0]


def _second_derivative_at(
    ps: PairedSample, query: np.ndarray, b: float, kernel: KernelSpec
) -> np.ndarray:
    # r''(x) = 2 * beta_2 and beta_2 = gamma_2 / b^2
    return 2.0 * _local_poly_coefficients(ps, query, b, kernel, degree=3)[:, 2] / b**2


def _enforce_degeneracy_budget(values: np.ndarray, what: str):
    bad = int(np.count_nonzero(~np.isfinite(values)))
    if bad:
        log.debug(f"{what}: {bad} of {values.size} grid points degenerate")
    if bad > config.DEGENERATE_POINT_BUDGET * values.size:
        raise DegenerateFitError(
            f"{what}: {bad} of {values.size} grid points have a degenerate local design"
        )


class LocalPolynomial:
    @staticmethod
    def local_linear_fit(
        ps: PairedSample, h: float, kernel: KernelSpec, grid: EvalGrid
    ) -> RegressionEstimate:
        """Local linear smoother r_h on the grid

        Args:
            ps (PairedSample): Covariate/response pairs
            h (float): Bandwidth
            kernel (KernelSpec): One-dimensional kernel
            grid (EvalGrid): One-dimensional evaluation grid

        Returns:
            RegressionEstimate: Fitted values, NaN at degenerate grid points
        """
        _check_bandwidth("h", h)
        _check_kernel(kernel)
        values = _local_linear_at(ps, grid.axes[0], h, kernel)
        _enforce_degeneracy_budget(values, "local linear fit")
        return RegressionEstimate(grid=grid, values=values, h=h, kernel=kernel)

    @staticmethod
    def local_linear_wls(
        ps: PairedSample, h: float, kernel: KernelSpec, grid: EvalGrid
    ) -> RegressionEstimate:
        """Local linear smoother computed as the intercept of the weighted least squares line"""
        _check_bandwidth("h", h)
        _check_kernel(kernel)
        values = _wls_intercept_at(ps, grid.axes[0], h, kernel)
        _enforce_degeneracy_budget(values, "local linear fit")
        return RegressionEstimate(grid=grid, values=values, h=h, kernel=kernel)

    @staticmethod
    def local_poly3_second_deriv(
        ps: PairedSample, b: float, kernel: KernelSpec, grid: EvalGrid
    ) -> RegressionEstimate:
        """Second derivative r'' from a local cubic fit with bandwidth b"""
        _check_bandwidth("b", b)
        _check_kernel(kernel)
        values = _second_derivative_at(ps, grid.axes[0], b, kernel)
        _enforce_degeneracy_budget(values, "local cubic fit")
        return RegressionEstimate(
            grid=grid, values=values, h=b, kernel=kernel, derivative=2
        )

    @staticmethod
    def debiased_local_linear(
        ps: PairedSample, h: float, tau: float, kernel: KernelSpec, grid: EvalGrid
    ) -> RegressionEstimate:
        """r_h(x) - 1/2 c_K h^2 r''_{h/tau}(x)"""
        _check_bandwidth("tau", tau)
        fit = LocalPolynomial.local_linear_fit(ps, h, kernel, grid)
        curvature = LocalPolynomial.local_poly3_second_deriv(ps, h / tau, kernel, grid)
        values = fit.values - 0.5 * kernel.ck * h**2 * curvature.values
        _enforce_degeneracy_budget(values, "debiased local linear fit")
        return RegressionEstimate(
            grid=grid, values=values, h=h, kernel=kernel, debiased=True, tau=tau
        )

    @staticmethod
    def estimate(
        ps: PairedSample,
        h: float,
        tau: float,
        kernel: KernelSpec,
        grid: EvalGrid,
        debiased: bool = True,
    ) -> RegressionEstimate:
        if debiased:
            return LocalPolynomial.debiased_local_linear(ps, h, tau, kernel, grid)
        return LocalPolynomial.local_linear_fit(ps, h, kernel, grid)

    @staticmethod
    def predict(
        ps: PairedSample, query: np.ndarray, h: float, kernel: KernelSpec
    ) -> np.ndarray:
        """Local linear predictions at arbitrary points, NaN where degenerate"""
        _check_bandwidth("h", h)
        _check_kernel(kernel)
        return _local_linear_at(ps, query, h, kernel)

    @staticmethod
    def scaled_gram(
        ps: Union[PairedSample, np.ndarray], x: float, h: float, kernel: KernelSpec
    ) -> np.ndarray:
        """(1 / (n h)) X_{x,h}^T W_x X_{x,h} for the cubic design, a 4 x 4 matrix

        Args:
            ps (Union[PairedSample, np.ndarray]): Sample or bare covariate values
            x (float): Query point
            h (float): Bandwidth
            kernel (KernelSpec): One-dimensional kernel
        """
        _check_bandwidth("h", h)
        _check_kernel(kernel)
        covariates = ps.x if isinstance(ps, PairedSample) else np.asarray(ps, float).ravel()
        u = (covariates - x) / h
        weights = kernel.evaluate(u[:, None])
        moments = np.array([np.sum(u**p * weights) for p in range(7)])
        index = np.add.outer(np.arange(4), np.arange(4))
        return moments[index] / (covariates.size * h)
