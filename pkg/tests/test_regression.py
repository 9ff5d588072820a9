import numpy as np
import pytest

from classes.Errors import DegenerateFitError, InvalidParameterError
from classes.EvalGrid import EvalGrid
from classes.Kernel import KernelSpec
from classes.LocalPolynomial import LocalPolynomial
from classes.Sample import PairedSample

KERNEL = KernelSpec()
OMEGA_3 = KERNEL.moment_matrix(3).entries


@pytest.fixture
def noisy_sample():
    rng = np.random.default_rng(8)
    x = rng.random(300)
    return PairedSample(x, np.sin(np.pi * x) + 0.1 * rng.standard_normal(300))


def test_paired_sample_validation():
    with pytest.raises(InvalidParameterError):
        PairedSample([0, 1, 2, 3], [0, 1, 2, 3])
    with pytest.raises(InvalidParameterError):
        PairedSample([0, 1, 2, 3, 4], [0, 1, 2])
    with pytest.raises(InvalidParameterError):
        PairedSample([0, 0, 1, 1, 2], [0, 1, 2, 3, 4])
    with pytest.raises(InvalidParameterError):
        PairedSample([0, 1, 2, 3, np.inf], [0, 1, 2, 3, 4])


def test_constant_reproduction(noisy_sample):
    ps = PairedSample(noisy_sample.x, np.full(noisy_sample.n, 3.0))
    grid = EvalGrid.from_range(0.0, 1.0, 50)
    fit = LocalPolynomial.local_linear_fit(ps, 0.1, KERNEL, grid)
    np.testing.assert_allclose(fit.values, 3.0, atol=1e-9)


@pytest.mark.parametrize("h", [0.1, 0.5, 2.0])
def test_linear_reproduction(h):
    x = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
    ps = PairedSample(x, 2 * x + 1)
    grid = EvalGrid.from_range(0.0, 1.0, 21)
    fit = LocalPolynomial.local_linear_fit(ps, h, KERNEL, grid)
    np.testing.assert_allclose(fit.values, 2 * grid.axes[0] + 1, atol=1e-9)

    if h >= 0.5:
        # the cubic pilot needs more than three points per window
        debiased = LocalPolynomial.debiased_local_linear(ps, h, 1.0, KERNEL, grid)
        np.testing.assert_allclose(debiased.values, fit.values, atol=1e-8)


def test_weight_form_matches_least_squares(noisy_sample):
    query = np.sort(np.random.default_rng(2).random(100))
    grid = EvalGrid((query,))
    weight_form = LocalPolynomial.local_linear_fit(noisy_sample, 0.08, KERNEL, grid).values
    wls_form = LocalPolynomial.local_linear_wls(noisy_sample, 0.08, KERNEL, grid).values
    np.testing.assert_allclose(weight_form, wls_form, rtol=0, atol=1e-9)


@pytest.mark.parametrize("b", [0.5, 1.0])
def test_second_derivative_is_exact_on_polynomials(b):
    x = np.linspace(-1.0, 1.0, 9)
    grid = EvalGrid.from_range(-1.0, 1.0, 21)
    xs = grid.axes[0]

    cubic = LocalPolynomial.local_poly3_second_deriv(PairedSample(x, x**3), b, KERNEL, grid)
    np.testing.assert_allclose(cubic.values, 6 * xs, atol=1e-6)
    assert cubic.derivative == 2

    linear = LocalPolynomial.local_poly3_second_deriv(PairedSample(x, 4 - 3 * x), b, KERNEL, grid)
    np.testing.assert_allclose(linear.values, 0.0, atol=1e-8)

    quadratic = LocalPolynomial.local_poly3_second_deriv(PairedSample(x, x**2), b, KERNEL, grid)
    np.testing.assert_allclose(quadratic.values, 2.0, atol=1e-6)


def test_debiased_smoother_identity(noisy_sample):
    grid = EvalGrid.from_range(0.05, 0.95, 64)
    h, tau = 0.1, 1.3
    debiased = LocalPolynomial.debiased_local_linear(noisy_sample, h, tau, KERNEL, grid)
    fit = LocalPolynomial.local_linear_fit(noisy_sample, h, KERNEL, grid).values
    curvature = LocalPolynomial.local_poly3_second_deriv(noisy_sample, h / tau, KERNEL, grid).values
    np.testing.assert_allclose(debiased.values, fit - 0.5 * KERNEL.ck * h**2 * curvature, rtol=0, atol=1e-12)
    assert debiased.debiased and debiased.tau == tau


def test_debiasing_cancels_curvature_bias():
    x = np.linspace(0.0, 1.0, 41)
    ps = PairedSample(x, x**2)
    grid = EvalGrid.from_range(0.2, 0.8, 25)
    truth = grid.axes[0] ** 2
    plain = LocalPolynomial.local_linear_fit(ps, 0.2, KERNEL, grid).values
    debiased = LocalPolynomial.debiased_local_linear(ps, 0.2, 1.0, KERNEL, grid).values
    assert np.max(np.abs(debiased - truth)) < np.max(np.abs(plain - truth))


def test_affine_equivariance_in_response(noisy_sample):
    grid = EvalGrid.from_range(0.1, 0.9, 40)
    base = LocalPolynomial.estimate(noisy_sample, 0.1, 1.0, KERNEL, grid).values
    moved = PairedSample(noisy_sample.x, 4.0 * noisy_sample.y - 1.0)
    transformed = LocalPolynomial.estimate(moved, 0.1, 1.0, KERNEL, grid).values
    np.testing.assert_allclose(transformed, 4.0 * base - 1.0, rtol=0, atol=1e-12)


def test_sine_fit_is_accurate():
    grid = EvalGrid.from_range(0.1, 0.9, 81)
    good = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        x = rng.random(500)
        ps = PairedSample(x, np.sin(np.pi * x) + 0.1 * rng.standard_normal(500))
        fit = LocalPolynomial.local_linear_fit(ps, 0.08, KERNEL, grid).values
        good += np.max(np.abs(fit - np.sin(np.pi * grid.axes[0]))) < 0.1
    assert good >= 18


def test_too_many_degenerate_points_fail():
    x = np.linspace(0.0, 0.1, 20)
    ps = PairedSample(x, x)
    grid = EvalGrid.from_range(0.0, 1.0, 50)
    with pytest.raises(DegenerateFitError):
        LocalPolynomial.local_linear_fit(ps, 0.01, KERNEL, grid)


def test_predict_marks_degenerate_points():
    x = np.linspace(0.0, 0.1, 20)
    predicted = LocalPolynomial.predict(PairedSample(x, x), np.array([0.05, 5.0]), 0.01, KERNEL)
    assert predicted[0] == pytest.approx(0.05)
    assert np.isnan(predicted[1])


def test_scaled_gram_single_point():
    gram = LocalPolynomial.scaled_gram(np.array([0.3]), 0.3, 1.0, KERNEL)
    assert gram[0, 0] == pytest.approx(0.3989423, abs=1e-7)
    mask = np.add.outer(np.arange(4), np.arange(4)) > 0
    np.testing.assert_array_equal(gram[mask], 0.0)


def test_scaled_gram_symmetric_design():
    x = np.linspace(0.0, 1.0, 101)
    gram = LocalPolynomial.scaled_gram(PairedSample(x, x), 0.5, 0.1, KERNEL)
    odd = np.add.outer(np.arange(4), np.arange(4)) % 2 == 1
    np.testing.assert_allclose(gram[odd], 0.0, atol=1e-12)


def test_scaled_gram_approaches_moment_matrix():
    x = np.random.default_rng(0).random(50_000)
    gram = LocalPolynomial.scaled_gram(x, 0.5, 0.05, KERNEL)
    # entries compared on the scale of the matching diagonal moments
    scale = np.sqrt(np.outer(np.diag(OMEGA_3), np.diag(OMEGA_3)))
    assert np.max(np.abs(gram - OMEGA_3) / scale) < 0.05


def test_scaled_gram_error_decreases():
    errors = []
    for n, h in ((1_000, 0.2), (10_000, 0.1), (100_000, 0.05)):
        runs = [
            np.max(np.abs(LocalPolynomial.scaled_gram(np.random.default_rng(seed).random(n), 0.5, h, KERNEL) - OMEGA_3))
            for seed in range(5)
        ]
        errors.append(np.mean(runs))
    assert errors[0] > errors[1] > errors[2]


def test_rejects_bad_arguments(noisy_sample):
    grid = EvalGrid.from_range(0.0, 1.0, 10)
    with pytest.raises(InvalidParameterError):
        LocalPolynomial.local_linear_fit(noisy_sample, 0.0, KERNEL, grid)
    with pytest.raises(InvalidParameterError):
        LocalPolynomial.debiased_local_linear(noisy_sample, 0.1, -1.0, KERNEL, grid)
    with pytest.raises(InvalidParameterError):
        LocalPolynomial.local_linear_fit(noisy_sample, 0.1, KernelSpec(dimension=2), grid)
