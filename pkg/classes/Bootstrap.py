"""Empirical bootstrap engine and the confidence band / set constructors.

Replicate r resamples with the stream derived from (seed, r) and is compared
with the estimate from the original sample, never with the truth. Replicates
that fail (empty level set, degenerate fit) are dropped; more than 10% dropped
is an error.
"""
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import partial
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import norm

import config
from classes.DensityEstimator import DensityEstimator
from classes.Errors import (
    DebiasError,
    EmptySetError,
    InvalidParameterError,
    ReplicateBudgetError,
)
from classes.EvalGrid import EvalGrid
from classes.Kernel import KernelSpec
from classes.LevelSet import LevelSet, PointSet
from classes.LocalPolynomial import LocalPolynomial
from classes.RandomStreams import RandomStreams
from classes.ReplicatePool import ReplicatePool
from classes.Sample import PairedSample, Sample

log = config.log


class Metric(str, Enum):
    sup = "sup"
    weighted_sup = "weighted_sup"
    hausdorff = "hausdorff"


class BandKind(str, Enum):
    fixed = "fixed"
    variable = "variable"


@dataclass(frozen=True)
class BootstrapConfig:
    B: int = config.DEFAULT_BOOTSTRAP_REPLICATES
    alpha: float = config.DEFAULT_ALPHA
    seed: int = config.DEFAULT_SEED
    metric: Metric = Metric.sup

    def __post_init__(self):
        object.__setattr__(self, "metric", Metric(self.metric))
        if int(self.B) < 1:
            raise InvalidParameterError(f"B must be at least 1, got {self.B}")
        if not 0 < self.alpha < 1:
            raise InvalidParameterError(f"alpha must lie in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class QuantileEstimate:
    t_hat: float
    replicate_stats: np.ndarray
    alpha: float
    dropped: int = 0

    def at_level(self, alpha: float) -> "QuantileEstimate":
        """Same replicate statistics read at another alpha"""
        return replace(self, t_hat=_order_statistic(self.replicate_stats, alpha), alpha=alpha)


@dataclass(frozen=True)
class ConfidenceBand:
    grid: EvalGrid
    center: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    t_hat: float
    kind: BandKind = BandKind.fixed
    scale: Optional[np.ndarray] = None
    quantile: Optional[QuantileEstimate] = None

    @classmethod
    def build(
        cls,
        grid: EvalGrid,
        center: np.ndarray,
        quantile: QuantileEstimate,
        kind: BandKind = BandKind.fixed,
        scale: Optional[np.ndarray] = None,
    ) -> "ConfidenceBand":
        """center +- t_hat, or center +- t_hat * scale for the variable kind"""
        kind = BandKind(kind)
        center = np.asarray(center, dtype=float)
        if kind is BandKind.variable:
            if scale is None:
                raise InvalidParameterError("A variable-width band needs a scale")
            half_width = quantile.t_hat * np.asarray(scale, dtype=float)
        else:
            half_width = np.full(center.shape, quantile.t_hat)
        return cls(
            grid=grid,
            center=center,
            lower=center - half_width,
            upper=center + half_width,
            t_hat=quantile.t_hat,
            kind=kind,
            scale=scale,
            quantile=quantile,
        )

    def at_level(self, alpha: float) -> "ConfidenceBand":
        if self.quantile is None:
            raise InvalidParameterError("Band has no replicate statistics to re-read")
        return ConfidenceBand.build(
            self.grid, self.center, self.quantile.at_level(alpha), self.kind, self.scale
        )


@dataclass(frozen=True)
class RegionSet:
    center: PointSet
    radius: float
    quantile: Optional[QuantileEstimate] = None
    replicate_sets: Tuple[PointSet, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if not self.radius >= 0:
            raise InvalidParameterError(f"radius must be non-negative, got {self.radius}")

    def at_level(self, alpha: float) -> "RegionSet":
        if self.quantile is None:
            raise InvalidParameterError("Set has no replicate statistics to re-read")
        quantile = self.quantile.at_level(alpha)
        return replace(self, radius=quantile.t_hat, quantile=quantile)


@dataclass(frozen=True)
class NormalInterval:
    lower: float
    upper: float
    center: float
    sigma: float
    nonsingleton_fraction: float


def _order_statistic(sorted_stats: np.ndarray, alpha: float) -> float:
    """Element at rank ceil((1 - alpha) B), 1-indexed"""
    if not 0 < alpha < 1:
        raise InvalidParameterError(f"alpha must lie in (0, 1), got {alpha}")
    count = sorted_stats.size
    # the offset keeps e.g. (1 - 0.1) * 10 = 9.000000000000002 at rank 9
    rank = int(np.ceil((1.0 - alpha) * count - 1e-9))
    rank = min(max(rank, 1), count)
    return float(sorted_stats[rank - 1])


@dataclass(frozen=True)
class _ReplicateJob:
    sample: Union[Sample, PairedSample]
    h: float
    tau: float
    kernel: KernelSpec
    grid: EvalGrid
    debiased: bool
    seed: int
    center: np.ndarray
    scale: Optional[np.ndarray] = None
    level: Optional[float] = None
    center_set: Optional[PointSet] = None

    def estimate(self, sample):
        if isinstance(sample, PairedSample):
            return LocalPolynomial.estimate(
                sample, self.h, self.tau, self.kernel, self.grid, self.debiased
            )
        return DensityEstimator.estimate(
            sample, self.h, self.tau, self.kernel, self.grid, self.debiased
        )


def _run_replicate(job: _ReplicateJob, replicate: int):
    """(statistic, level set or None) for one replicate, NaN statistic when it fails"""
    rng = RandomStreams.stream(job.seed, RandomStreams.BOOTSTRAP, replicate)
    try:
        resampled = job.sample.take(RandomStreams.resample(job.sample.n, rng))
        values = job.estimate(resampled).values
        if job.level is None:
            return Bootstrap.sup_distance(values, job.center, job.scale), None
        found = LevelSet.extract(values, job.grid, job.level)
        if found.is_empty():
            return np.nan, found
        return LevelSet.hausdorff(found, job.center_set), found
    except DebiasError as error:
        log.debug(f"Replicate {replicate} dropped: {error}")
        return np.nan, None


def _bootstrap(job: _ReplicateJob, cfg: BootstrapConfig, workers: Optional[int]):
    results = ReplicatePool(workers).map(partial(_run_replicate, job), range(cfg.B))
    stats = np.array([stat for stat, _ in results], dtype=float)
    quantile = Bootstrap.bootstrap_quantile(stats, cfg.alpha)
    if quantile.dropped:
        log.info(f"{quantile.dropped} of {cfg.B} bootstrap replicates dropped")
    return quantile, [found for _, found in results]


class Bootstrap:
    @staticmethod
    def resample(n: int, rng: np.random.Generator) -> np.ndarray:
        """n i.i.d. uniform indices in 0..n-1; paired data is resampled by row"""
        return RandomStreams.resample(n, rng)

    @staticmethod
    def sup_distance(
        f1: np.ndarray,
        f2: np.ndarray,
        scale: Optional[np.ndarray] = None,
        floor: float = config.WEIGHTED_BAND_FLOOR,
    ) -> float:
        """max |f1 - f2|, or max |f1 - f2| / sqrt(scale) over points with
        scale >= floor * max(scale). Non-finite points are ignored.

        Raises:
            EmptySetError: When no grid point is admissible
        """
        f1 = np.asarray(f1, dtype=float).ravel()
        f2 = np.asarray(f2, dtype=float).ravel()
        if f1.shape != f2.shape:
            raise InvalidParameterError(f"Length mismatch: {f1.size} vs {f2.size}")
        difference = np.abs(f1 - f2)
        admissible = np.isfinite(difference)
        if scale is not None:
            scale = np.asarray(scale, dtype=float).ravel()
            if scale.shape != f1.shape:
                raise InvalidParameterError("Scale length differs from the values")
            usable = np.isfinite(scale) & (scale > 0)
            if np.any(usable):
                usable &= scale >= floor * np.max(scale[usable])
            admissible &= usable
            difference = difference / np.sqrt(np.where(admissible, scale, 1.0))
        if not np.any(admissible):
            raise EmptySetError("No admissible grid points for the sup distance")
        return float(np.max(difference[admissible]))

    @staticmethod
    def bootstrap_quantile(
        stat_per_replicate: Sequence[float],
        alpha: float,
        budget: float = config.REPLICATE_DROP_BUDGET,
    ) -> QuantileEstimate:
        """Upper order statistic at rank ceil((1 - alpha) B) of the finite statistics

        Raises:
            ReplicateBudgetError: When more than the budgeted share is non-finite
        """
        stats = np.asarray(stat_per_replicate, dtype=float).ravel()
        if stats.size < 1:
            raise InvalidParameterError("Need at least one replicate statistic")
        finite = np.sort(stats[np.isfinite(stats)])
        dropped = stats.size - finite.size
        if dropped > budget * stats.size or finite.size == 0:
            raise ReplicateBudgetError(
                f"{dropped} of {stats.size} replicates failed (budget {budget:.0%})"
            )
        return QuantileEstimate(
            t_hat=_order_statistic(finite, alpha),
            replicate_stats=finite,
            alpha=alpha,
            dropped=dropped,
        )

    @staticmethod
    def density_confidence_band(
        sample: Sample,
        h: float,
        tau: float,
        kernel: KernelSpec,
        grid: EvalGrid,
        cfg: BootstrapConfig,
        debiased: bool = True,
        workers: Optional[int] = 1,
    ) -> ConfidenceBand:
        """Bootstrap L-infinity band for the density.

        Metric sup gives center +- t_hat. Metric weighted_sup divides the
        distances by sqrt(p_h) of the plain KDE and gives center +- t_hat sqrt(p_h).
        """
        if cfg.metric is Metric.hausdorff:
            raise InvalidParameterError("Density bands use the sup or weighted_sup metric")
        center = DensityEstimator.estimate(sample, h, tau, kernel, grid, debiased).values
        kind, scale, weight = BandKind.fixed, None, None
        if cfg.metric is Metric.weighted_sup:
            weight = DensityEstimator.kde_eval(sample, h, kernel, grid).values
            kind, scale = BandKind.variable, np.sqrt(np.clip(weight, 0.0, None))

        job = _ReplicateJob(
            sample, h, tau, kernel, grid, debiased, cfg.seed, center, scale=weight
        )
        quantile, _ = _bootstrap(job, cfg, workers)
        return ConfidenceBand.build(grid, center, quantile, kind, scale)

    @staticmethod
    def regression_confidence_band(
        ps: PairedSample,
        h: float,
        tau: float,
        kernel: KernelSpec,
        grid: EvalGrid,
        cfg: BootstrapConfig,
        debiased: bool = True,
        workers: Optional[int] = 1,
    ) -> ConfidenceBand:
        """Debiased local linear smoother +- the bootstrap sup quantile (paired bootstrap)"""
        if cfg.metric is not Metric.sup:
            raise InvalidParameterError("Regression bands use the sup metric")
        center = LocalPolynomial.estimate(ps, h, tau, kernel, grid, debiased).values
        job = _ReplicateJob(ps, h, tau, kernel, grid, debiased, cfg.seed, center)
        quantile, _ = _bootstrap(job, cfg, workers)
        return ConfidenceBand.build(grid, center, quantile)

    @staticmethod
    def levelset_confidence_set(
        sample: Sample,
        level: float,
        h: float,
        tau: float,
        kernel: KernelSpec,
        grid: EvalGrid,
        cfg: BootstrapConfig,
        debiased: bool = True,
        workers: Optional[int] = 1,
    ) -> RegionSet:
        """D_hat dilated by the bootstrap quantile of Haus(D_hat*, D_hat)

        Raises:
            EmptySetError: When the estimated level set is empty on the grid
        """
        if cfg.metric is not Metric.hausdorff:
            raise InvalidParameterError("Level-set confidence sets use the hausdorff metric")
        center = DensityEstimator.estimate(sample, h, tau, kernel, grid, debiased).values
        center_set = LevelSet.extract(center, grid, level)
        if center_set.is_empty():
            raise EmptySetError(f"Estimated level set at {level} is empty on the grid")

        job = _ReplicateJob(
            sample, h, tau, kernel, grid, debiased, cfg.seed, center,
            level=level, center_set=center_set,
        )
        quantile, _ = _bootstrap(job, cfg, workers)
        return RegionSet(center=center_set, radius=quantile.t_hat, quantile=quantile)

    @staticmethod
    def levelset_inversion_set(density_band: ConfidenceBand, level: float) -> np.ndarray:
        """Grid mask of |center - level| < t_hat"""
        if density_band.kind is not BandKind.fixed:
            raise InvalidParameterError("Inversion sets need a fixed-width band")
        with np.errstate(invalid="ignore"):
            return np.abs(density_band.center - level) < density_band.t_hat

    @staticmethod
    def invreg_confidence_set(
        ps: PairedSample,
        r0: float,
        h: float,
        tau: float,
        kernel: KernelSpec,
        grid: EvalGrid,
        cfg: BootstrapConfig,
        debiased: bool = True,
        workers: Optional[int] = 1,
    ) -> RegionSet:
        """Roots of r_hat - r0 dilated by the bootstrap Hausdorff quantile.

        The replicate root sets are kept for the normal-approximation interval.
        """
        if cfg.metric is not Metric.hausdorff:
            raise InvalidParameterError("Inverse-regression sets use the hausdorff metric")
        center = LocalPolynomial.estimate(ps, h, tau, kernel, grid, debiased).values
        roots = LevelSet.extract_level_set_1d(center, grid, r0)
        if roots.is_empty():
            raise EmptySetError(f"The regression estimate never reaches {r0} on the grid")

        job = _ReplicateJob(
            ps, h, tau, kernel, grid, debiased, cfg.seed, center,
            level=r0, center_set=roots,
        )
        quantile, replicate_sets = _bootstrap(job, cfg, workers)
        replicate_sets = tuple(s if s is not None else PointSet.empty(1) for s in replicate_sets)
        return RegionSet(
            center=roots,
            radius=quantile.t_hat,
            quantile=quantile,
            replicate_sets=replicate_sets,
        )

    @staticmethod
    def invreg_normal_ci(
        center_root: float,
        bootstrap_roots: Sequence[Union[float, np.ndarray, PointSet]],
        alpha: float,
    ) -> NormalInterval:
        """x0 +- z_{1-alpha/2} sigma_R with sigma_R the sd of the bootstrap roots.

        A replicate with several roots contributes the one closest to x0; one
        with none is skipped. Both count toward nonsingleton_fraction.
        """
        if not 0 < alpha < 1:
            raise InvalidParameterError(f"alpha must lie in (0, 1), got {alpha}")
        chosen, nonsingleton = [], 0
        for roots in bootstrap_roots:
            if isinstance(roots, PointSet):
                roots = roots.points
            roots = np.atleast_1d(np.asarray(roots, dtype=float)).ravel()
            roots = roots[np.isfinite(roots)]
            if roots.size != 1:
                nonsingleton += 1
            if roots.size:
                chosen.append(roots[np.argmin(np.abs(roots - center_root))])

        if len(chosen) < 2:
            raise InvalidParameterError("Need at least 2 finite bootstrap roots")
        sigma = float(np.std(chosen, ddof=1))
        z = float(norm.ppf(1.0 - alpha / 2.0))
        total = len(bootstrap_roots)
        return NormalInterval(
            lower=center_root - z * sigma,
            upper=center_root + z * sigma,
            center=center_root,
            sigma=sigma,
            nonsingleton_fraction=nonsingleton / total,
        )

    @staticmethod
    def invreg_inversion_set(regression_band: ConfidenceBand, r0: float) -> np.ndarray:
        """Grid mask of |center - r0| < t_hat, inverting a regression band"""
        return Bootstrap.levelset_inversion_set(regression_band, r0)

    @staticmethod
    def center_root(region: RegionSet) -> float:
        """The estimated root; with several, the one nearest the median bootstrap root"""
        roots = region.center.points[:, 0]
        found = [s.points[:, 0] for s in region.replicate_sets if not s.is_empty()]
        if roots.size == 1 or not found:
            return float(roots[0])
        median = np.median(np.concatenate(found))
        return float(roots[np.argmin(np.abs(roots - median))])
