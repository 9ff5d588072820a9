import numpy as np
import pytest

from classes.Bandwidth import Bandwidth, BandwidthChoice, BandwidthMethod
from classes.Errors import InvalidParameterError
from classes.Kernel import KernelSpec
from classes.Sample import PairedSample, Sample


def standardized(values):
    values = np.asarray(values, dtype=float)
    return (values - values.mean()) / values.std(ddof=1)


def test_rule_of_thumb_1d():
    # wide tails keep IQR / 1.34 above the unit standard deviation
    values = standardized(np.concatenate([np.full(50, -1.0), np.full(50, 1.0)]))
    choice = Bandwidth.rule_of_thumb(Sample(values))
    assert choice.method is BandwidthMethod.rot
    assert choice.h == pytest.approx(0.9 * 100 ** (-0.2), rel=1e-12)
    assert choice.h == pytest.approx(0.35830, abs=1e-5)


def test_rule_of_thumb_2d():
    rng = np.random.default_rng(0)
    points = np.column_stack([0.3 * standardized(rng.normal(size=1000)) for _ in range(2)])
    choice = Bandwidth.rule_of_thumb(Sample(points))
    assert choice.h == pytest.approx(0.09487, abs=1e-5)


@pytest.mark.parametrize("scale", [0.1, 3.0, 250.0])
def test_rule_of_thumb_is_scale_equivariant(scale):
    values = np.random.default_rng(1).normal(size=300)
    base = Bandwidth.rule_of_thumb(Sample(values)).h
    assert Bandwidth.rule_of_thumb(Sample(values * scale)).h == pytest.approx(base * scale, rel=1e-12)


def test_rule_of_thumb_rejects_constant_data():
    with pytest.raises(InvalidParameterError):
        Bandwidth.rule_of_thumb(Sample(np.ones(10)))


def test_choice_validation():
    with pytest.raises(InvalidParameterError):
        BandwidthChoice(h=0.0, method="rot")
    assert BandwidthChoice(h=0.2, method="fixed").scaled(2.0).h == 0.4


def test_lscv_single_candidate():
    sample = Sample(np.random.default_rng(2).normal(size=200))
    choice = Bandwidth.lscv_bandwidth(sample, [0.3])
    assert choice.h == 0.3
    assert len(choice.diagnostics) == 1


def test_lscv_minimum_is_reported():
    sample = Sample(np.random.default_rng(3).normal(size=400))
    choice = Bandwidth.lscv_bandwidth(sample)
    scores = dict(choice.diagnostics)
    assert scores[choice.h] == min(scores.values())
    absurd = 10 * np.ptp(sample.points)
    assert Bandwidth.lscv_score(sample, absurd, KernelSpec()) > scores[choice.h]


def test_lscv_agrees_with_rule_of_thumb():
    agree = 0
    for seed in range(10):
        sample = Sample(np.random.default_rng(seed).normal(size=1000))
        rot = Bandwidth.rule_of_thumb(sample).h
        lscv = Bandwidth.lscv_bandwidth(sample, np.geomspace(0.05, 1.0, 20)).h
        agree += rot / 2 <= lscv <= rot * 2
    assert agree > 5


def test_lscv_rejects_bad_candidates():
    sample = Sample(np.random.default_rng(4).normal(size=50))
    with pytest.raises(InvalidParameterError):
        Bandwidth.lscv_bandwidth(sample, [])
    with pytest.raises(InvalidParameterError):
        Bandwidth.lscv_bandwidth(sample, [0.2, -0.1])


def test_kfold_cv_breaks_ties_toward_smallest_h():
    x = np.linspace(0.0, 1.0, 60)
    ps = PairedSample(x, 3 * x - 1)
    candidates = [0.2, 0.1, 0.4]
    choice = Bandwidth.kfold_cv_bandwidth(ps, candidates=candidates, repeats=2)
    assert choice.h == 0.1
    assert all(score < 1e-12 for _, score in choice.diagnostics)


def sine_sample(seed, n=500):
    rng = np.random.default_rng(seed)
    x = rng.random(n)
    return PairedSample(x, np.sin(np.pi * x) + 0.1 * rng.standard_normal(n))


def test_kfold_cv_is_deterministic_and_order_free():
    ps = sine_sample(5, 200)
    first = Bandwidth.kfold_cv_bandwidth(ps, seed=9)
    again = Bandwidth.kfold_cv_bandwidth(ps, seed=9)
    order = np.random.default_rng(0).permutation(ps.n)
    shuffled = Bandwidth.kfold_cv_bandwidth(ps.take(order), seed=9)
    assert first == again
    assert shuffled.h == first.h
    assert shuffled.diagnostics == first.diagnostics


def test_kfold_cv_on_sine_model():
    candidates = np.geomspace(0.01, 0.5, 20)
    hits = 0
    for seed in range(20):
        choice = Bandwidth.kfold_cv_bandwidth(sine_sample(seed), candidates=candidates, seed=seed)
        hits += 0.02 <= choice.h <= 0.2
    assert hits >= 18


def test_kfold_cv_validates_arguments():
    ps = sine_sample(1, 20)
    with pytest.raises(InvalidParameterError):
        Bandwidth.kfold_cv_bandwidth(ps, folds=1)
    with pytest.raises(InvalidParameterError):
        Bandwidth.kfold_cv_bandwidth(ps, folds=15)
    with pytest.raises(InvalidParameterError):
        Bandwidth.kfold_cv_bandwidth(ps, repeats=0)
