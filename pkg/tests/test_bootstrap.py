import numpy as np
import pytest

from classes.Bootstrap import (
    BandKind,
    Bootstrap,
    BootstrapConfig,
    ConfidenceBand,
    Metric,
    QuantileEstimate,
    RegionSet,
)
from classes.DensityEstimator import DensityEstimate, DensityEstimator
from classes.Errors import EmptySetError, InvalidParameterError, ReplicateBudgetError
from classes.EvalGrid import EvalGrid
from classes.Kernel import KernelSpec
from classes.LevelSet import PointSet
from classes.RandomStreams import RandomStreams
from classes.Sample import PairedSample, Sample

KERNEL = KernelSpec()


@pytest.fixture
def normal_sample():
    return Sample(np.random.default_rng(21).standard_normal(150))


@pytest.fixture
def grid():
    return EvalGrid.from_range(-3.0, 3.0, 61)


def quantile_of(t_hat):
    return QuantileEstimate(t_hat=t_hat, replicate_stats=np.array([t_hat]), alpha=0.05)


def test_resample_single_row():
    np.testing.assert_array_equal(Bootstrap.resample(1, np.random.default_rng(0)), [0])


def test_resample_is_deterministic_per_stream():
    first = Bootstrap.resample(100, RandomStreams.stream(42, RandomStreams.BOOTSTRAP, 7))
    again = Bootstrap.resample(100, RandomStreams.stream(42, RandomStreams.BOOTSTRAP, 7))
    other = Bootstrap.resample(100, RandomStreams.stream(42, RandomStreams.BOOTSTRAP, 8))
    np.testing.assert_array_equal(first, again)
    assert not np.array_equal(first, other)


def test_resample_is_uniform():
    # 10^4 resamples of size 10, so each index is Binomial(10^5, 0.1)
    rng = np.random.default_rng(3)
    draws = np.concatenate([Bootstrap.resample(10, rng) for _ in range(10_000)])
    counts = np.bincount(draws, minlength=10)
    assert draws.size == 100_000 and counts.size == 10
    sigma = np.sqrt(100_000 * 0.1 * 0.9)
    assert np.all(np.abs(counts - 10_000) <= 3 * sigma)


def test_derived_seeds_differ_by_purpose():
    seeds = {RandomStreams.derive_seed(42, purpose, 0) for purpose in range(4)}
    assert len(seeds) == 4
    assert RandomStreams.derive_seed(42, 3, 5) == RandomStreams.derive_seed(42, 3, 5)


def test_sup_distance_examples():
    assert Bootstrap.sup_distance([0, 1, 2], [0, 0, 0]) == 2
    assert Bootstrap.sup_distance([0.5, 1.5], [0.5, 1.5]) == 0
    assert Bootstrap.sup_distance([0, 1, 2], [0, 0, 0], scale=[1, 1, 4]) == 1


def test_sup_distance_skips_low_weight_and_nan_points():
    # the last point sits below 5% of the largest weight
    assert Bootstrap.sup_distance([0, 1, 9], [0, 0, 0], scale=[1, 1, 0.01]) == 1
    assert Bootstrap.sup_distance([np.nan, 1, 2], [0, 0, 0]) == 2


def test_sup_distance_errors():
    with pytest.raises(EmptySetError):
        Bootstrap.sup_distance([0, 1], [0, 0], scale=[0, 0])
    with pytest.raises(InvalidParameterError):
        Bootstrap.sup_distance([0, 1], [0, 0, 0])


def test_quantile_examples():
    assert Bootstrap.bootstrap_quantile(np.full(20, 0.7), 0.3).t_hat == 0.7
    values = np.arange(1, 11, dtype=float)
    assert Bootstrap.bootstrap_quantile(values, 0.05).t_hat == 10
    assert Bootstrap.bootstrap_quantile(values, 0.5).t_hat == 5
    assert Bootstrap.bootstrap_quantile(values, 0.1).t_hat == 9


def test_quantile_drop_budget():
    values = np.arange(1, 11, dtype=float)
    values[3] = np.nan
    estimate = Bootstrap.bootstrap_quantile(values, 0.5)
    assert estimate.dropped == 1
    assert estimate.replicate_stats.size == 9

    values[4] = np.inf
    with pytest.raises(ReplicateBudgetError):
        Bootstrap.bootstrap_quantile(values, 0.5)


def test_quantile_at_level_is_monotone():
    estimate = Bootstrap.bootstrap_quantile(np.random.default_rng(0).random(200), 0.05)
    levels = [0.01, 0.05, 0.1, 0.2, 0.5]
    t_hats = [estimate.at_level(alpha).t_hat for alpha in levels]
    assert t_hats == sorted(t_hats, reverse=True)


def test_config_validation():
    assert BootstrapConfig(metric="hausdorff").metric is Metric.hausdorff
    with pytest.raises(InvalidParameterError):
        BootstrapConfig(B=0)
    with pytest.raises(InvalidParameterError):
        BootstrapConfig(alpha=1.0)


def test_single_replicate_band(normal_sample, grid):
    band = Bootstrap.density_confidence_band(
        normal_sample, 0.4, 1.0, KERNEL, grid, BootstrapConfig(B=1, seed=3)
    )
    assert band.quantile.replicate_stats.size == 1
    assert band.t_hat == band.quantile.replicate_stats[0]
    np.testing.assert_allclose(band.upper - band.lower, 2 * band.t_hat)
    assert np.all(band.lower <= band.center) and np.all(band.center <= band.upper)


def test_band_center_is_the_estimate(normal_sample, grid):
    cfg = BootstrapConfig(B=20, seed=5)
    debiased = Bootstrap.density_confidence_band(normal_sample, 0.4, 1.0, KERNEL, grid, cfg)
    plain = Bootstrap.density_confidence_band(
        normal_sample, 0.4, 1.0, KERNEL, grid, cfg, debiased=False
    )
    expected = DensityEstimator.debiased_kde_eval(normal_sample, 0.4, 1.0, KERNEL, grid).values
    np.testing.assert_array_equal(debiased.center, expected)
    np.testing.assert_array_equal(plain.center, DensityEstimator.kde_eval(normal_sample, 0.4, KERNEL, grid).values)


def test_variable_width_band(normal_sample, grid):
    cfg = BootstrapConfig(B=20, seed=5, metric=Metric.weighted_sup)
    band = Bootstrap.density_confidence_band(normal_sample, 0.4, 1.0, KERNEL, grid, cfg)
    plain = DensityEstimator.kde_eval(normal_sample, 0.4, KERNEL, grid).values
    assert band.kind is BandKind.variable
    np.testing.assert_allclose(band.upper - band.lower, 2 * band.t_hat * np.sqrt(plain))
    with pytest.raises(InvalidParameterError):
        Bootstrap.levelset_inversion_set(band, 0.1)


def test_bands_nest_across_levels(normal_sample, grid):
    band = Bootstrap.density_confidence_band(
        normal_sample, 0.4, 1.0, KERNEL, grid, BootstrapConfig(B=50, seed=1, alpha=0.05)
    )
    narrower = band.at_level(0.2)
    assert narrower.t_hat <= band.t_hat
    assert np.all(band.lower <= narrower.lower) and np.all(narrower.upper <= band.upper)


def test_band_does_not_depend_on_workers(normal_sample, grid):
    cfg = BootstrapConfig(B=16, seed=11)
    serial = Bootstrap.density_confidence_band(normal_sample, 0.4, 1.0, KERNEL, grid, cfg, workers=1)
    parallel = Bootstrap.density_confidence_band(normal_sample, 0.4, 1.0, KERNEL, grid, cfg, workers=2)
    assert serial.t_hat == parallel.t_hat
    np.testing.assert_array_equal(serial.quantile.replicate_stats, parallel.quantile.replicate_stats)


def test_replicates_compare_with_the_original_estimate(monkeypatch, normal_sample, grid):
    """With an estimator returning the sample mean, replicate r scores |mean* - mean|"""

    def mean_estimate(sample, h, tau, kernel, grid, debiased=True):
        return DensityEstimate(grid, np.full(grid.shape, sample.points.mean()), h, kernel)

    monkeypatch.setattr(DensityEstimator, "estimate", staticmethod(mean_estimate))
    cfg = BootstrapConfig(B=10, seed=4)
    band = Bootstrap.density_confidence_band(normal_sample, 0.4, 1.0, KERNEL, grid, cfg)

    mean = normal_sample.points.mean()
    expected = []
    for replicate in range(10):
        rng = RandomStreams.stream(4, RandomStreams.BOOTSTRAP, replicate)
        expected.append(abs(normal_sample.take(Bootstrap.resample(normal_sample.n, rng)).points.mean() - mean))
    np.testing.assert_allclose(band.quantile.replicate_stats, np.sort(expected), rtol=0, atol=1e-15)


def test_regression_band_on_noiseless_line():
    x = np.linspace(0.0, 1.0, 40)
    ps = PairedSample(x, 2 * x - 1)
    grid = EvalGrid.from_range(0.0, 1.0, 21)
    band = Bootstrap.regression_confidence_band(ps, 0.2, 1.0, KERNEL, grid, BootstrapConfig(B=20))
    assert band.t_hat < 1e-8
    truth = 2 * grid.axes[0] - 1
    assert np.all(band.lower - 1e-8 <= truth) and np.all(truth <= band.upper + 1e-8)


def test_levelset_above_maximum_is_empty(normal_sample, grid):
    cfg = BootstrapConfig(B=5, metric=Metric.hausdorff)
    with pytest.raises(EmptySetError):
        Bootstrap.levelset_confidence_set(normal_sample, 5.0, 0.4, 1.0, KERNEL, grid, cfg)


def test_levelset_set_contains_its_center(normal_sample, grid):
    cfg = BootstrapConfig(B=20, seed=2, metric=Metric.hausdorff)
    region = Bootstrap.levelset_confidence_set(normal_sample, 0.1, 0.4, 1.0, KERNEL, grid, cfg)
    assert region.center.size >= 2
    assert region.radius > 0
    assert region.at_level(0.5).radius <= region.radius


def test_metric_must_match_the_construction(normal_sample, grid):
    with pytest.raises(InvalidParameterError):
        Bootstrap.density_confidence_band(
            normal_sample, 0.4, 1.0, KERNEL, grid, BootstrapConfig(metric=Metric.hausdorff)
        )
    with pytest.raises(InvalidParameterError):
        Bootstrap.levelset_confidence_set(normal_sample, 0.1, 0.4, 1.0, KERNEL, grid, BootstrapConfig())


def test_invreg_on_noiseless_identity():
    x = np.linspace(0.0, 1.0, 50)
    ps = PairedSample(x, x)
    grid = EvalGrid.from_range(0.0, 1.0, 101)
    cfg = BootstrapConfig(B=20, metric=Metric.hausdorff)
    region = Bootstrap.invreg_confidence_set(ps, 0.5, 0.1, 1.0, KERNEL, grid, cfg)
    np.testing.assert_allclose(region.center.points[:, 0], [0.5], atol=1e-9)
    assert region.radius < 1e-8
    assert len(region.replicate_sets) == 20
    assert Bootstrap.center_root(region) == pytest.approx(0.5, abs=1e-9)


def test_invreg_without_roots_fails():
    x = np.linspace(0.0, 1.0, 50)
    cfg = BootstrapConfig(B=5, metric=Metric.hausdorff)
    with pytest.raises(EmptySetError):
        Bootstrap.invreg_confidence_set(
            PairedSample(x, x), 3.0, 0.1, 1.0, KERNEL, EvalGrid.from_range(0.0, 1.0, 51), cfg
        )


def test_normal_interval_example():
    spread = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    roots = 0.7 + 0.01 * spread / spread.std(ddof=1)
    interval = Bootstrap.invreg_normal_ci(0.7, roots, 0.05)
    assert interval.sigma == pytest.approx(0.01)
    assert interval.lower == pytest.approx(0.68040, abs=1e-5)
    assert interval.upper == pytest.approx(0.71960, abs=1e-5)
    assert interval.nonsingleton_fraction == 0


def test_normal_interval_with_equal_roots():
    interval = Bootstrap.invreg_normal_ci(0.4, [0.4] * 10, 0.05)
    assert interval.lower == interval.upper == 0.4


def test_normal_interval_picks_the_nearest_root():
    sets = [PointSet([0.5, 0.9]), PointSet([0.52]), PointSet.empty(1), PointSet([0.48])]
    interval = Bootstrap.invreg_normal_ci(0.5, sets, 0.05)
    assert interval.sigma == pytest.approx(np.std([0.5, 0.52, 0.48], ddof=1))
    assert interval.nonsingleton_fraction == 0.5


def test_center_root_follows_the_bootstrap_median():
    region = RegionSet(
        center=PointSet([0.2, 0.8]),
        radius=0.1,
        replicate_sets=(PointSet([0.75]), PointSet([0.78, 0.3]), PointSet([0.81])),
    )
    assert Bootstrap.center_root(region) == 0.8


def test_inversion_masks():
    grid = EvalGrid.from_range(0.0, 1.0, 11)
    flat = ConfidenceBand.build(grid, np.full(11, 0.3), quantile_of(0.1))
    assert Bootstrap.levelset_inversion_set(flat, 0.3).all()

    ramp = ConfidenceBand.build(grid, grid.axes[0], quantile_of(0.0))
    assert not Bootstrap.invreg_inversion_set(ramp, 0.55).any()

    wide = ConfidenceBand.build(grid, grid.axes[0], quantile_of(0.25))
    narrow = ConfidenceBand.build(grid, grid.axes[0], quantile_of(0.1))
    wide_mask = Bootstrap.invreg_inversion_set(wide, 0.5)
    narrow_mask = Bootstrap.invreg_inversion_set(narrow, 0.5)
    assert np.all(wide_mask[narrow_mask])
    assert narrow_mask.sum() < wide_mask.sum()
