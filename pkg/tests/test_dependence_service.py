import math

import numpy as np
import pytest

from src.models.errors import DomainError, DimensionMismatch, DegenerateCorrelation
from src.models.models import CorrelationSpec, QmcSettings
from src.services.dependence_service import dependence_engine
from src.services.diagnostics_service import diagnostics_service
from src.services.sampler_service import RandomStream, sampler_service
from src.utils.numerics import cholesky_with_jitter

from tests.conftest import THETA_INDEPENDENT_ALPHA_1

CORR_3 = np.array([[1.0, 0.5, 0.3], [0.5, 1.0, 0.4], [0.3, 0.4, 1.0]])


def test_univariate_cdf_is_exact():
    result = dependence_engine.mvt_cdf([1.0], 1.0, [[1.0]])
    assert result.value == pytest.approx(0.75, abs=1e-12)
    assert result.error_estimate == 0.0


def test_independent_orthant_probability():
    result = dependence_engine.mvt_cdf([0.0, 0.0], 3.0, np.eye(2))
    assert result.value == pytest.approx(0.25, abs=1e-6)


@pytest.mark.parametrize('rho, df', [(0.5, 4.0), (-0.7, 2.5), (0.9, 8.0)])
def test_correlated_orthant_probability(rho, df):
    result = dependence_engine.mvt_cdf([0.0, 0.0], df, [[1.0, rho], [rho, 1.0]])
    expected = 0.25 + math.asin(rho) / (2.0 * math.pi)
    assert abs(result.value - expected) <= result.error_estimate + 5e-4


def test_trivariate_orthant_probability():
    # P(all three <= 0) for an elliptical law: 1/8 + (asin r12 + asin r13 + asin r23) / (4 pi)
    result = dependence_engine.mvt_cdf(np.zeros(3), 5.0, CORR_3)
    expected = 0.125 + (math.asin(0.5) + math.asin(0.3) + math.asin(0.4)) / (4.0 * math.pi)
    assert abs(result.value - expected) <= result.error_estimate + 5e-4
    assert result.points_used > 0


def test_cdf_dispersion_is_standardized():
    # Scaling the dispersion by s^2 and the point by s leaves the probability unchanged
    base = dependence_engine.mvt_cdf([0.4, -0.2], 3.0, [[1.0, 0.3], [0.3, 1.0]])
    scaled = dependence_engine.mvt_cdf([0.8, -0.4], 3.0, [[4.0, 1.2], [1.2, 4.0]])
    assert scaled.value == pytest.approx(base.value, abs=1e-12)


def test_cdf_infinite_limits():
    assert dependence_engine.mvt_cdf([1.0, -math.inf], 2.0, np.eye(2)).value == 0.0
    assert dependence_engine.mvt_cdf([math.inf, math.inf], 2.0, np.eye(2)).value == 1.0
    assert dependence_engine.mvt_cdf([1.0, math.inf], 1.0, [[1.0, 0.3], [0.3, 1.0]]).value == pytest.approx(0.75)


def test_cdf_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        dependence_engine.mvt_cdf([0.0, 0.0, 0.0], 2.0, np.eye(2))


def test_cdf_is_reproducible_for_a_fixed_seed(fast_qmc):
    first = dependence_engine.mvt_cdf([0.3, 1.1, -0.2], 2.0, CORR_3, fast_qmc)
    second = dependence_engine.mvt_cdf([0.3, 1.1, -0.2], 2.0, CORR_3, fast_qmc)
    assert first == second


def test_exponent_known_values():
    assert dependence_engine.exponent_function([1.0, 1.0], 1.0, np.eye(2)).value == pytest.approx(
        THETA_INDEPENDENT_ALPHA_1, abs=1e-9)
    assert dependence_engine.exponent_function([1.0, 1.0], 0.01, np.eye(2)).value == pytest.approx(1.5, abs=0.01)


@pytest.mark.parametrize('alpha', [0.5, 1.0, 2.0, 5.0])
@pytest.mark.parametrize('rho', [-0.5, 0.0, 0.5, 0.9])
def test_bivariate_exponent_matches_closed_form(alpha, rho):
    corr = np.array([[1.0, rho], [rho, 1.0]])
    value = dependence_engine.exponent_function([1.0, 1.0], alpha, corr)
    closed = dependence_engine.bivariate_extremal_coefficient_closed(alpha, rho)
    assert value.value == pytest.approx(closed, abs=value.error_estimate + 1e-9)


def test_exponent_is_homogeneous_of_order_minus_one():
    z = np.array([0.7, 1.3, 2.0])
    value = dependence_engine.exponent_function(z, 2.0, CORR_3)
    doubled = dependence_engine.exponent_function(2.0 * z, 2.0, CORR_3)
    assert doubled.value == pytest.approx(0.5 * value.value, abs=value.error_estimate + doubled.error_estimate + 1e-4)


def test_exponent_zero_and_negative_coordinates():
    assert dependence_engine.exponent_function([0.0, 1.0], 1.0, np.eye(2)).is_infinite
    with pytest.raises(DomainError):
        dependence_engine.exponent_function([0.0, 0.0], 1.0, np.eye(2))
    with pytest.raises(DomainError):
        dependence_engine.exponent_function([-1.0, 1.0], 1.0, np.eye(2))


def test_exponent_rejects_bad_correlation():
    with pytest.raises(DimensionMismatch):
        dependence_engine.exponent_function([1.0, 1.0, 1.0], 1.0, np.eye(2))
    with pytest.raises(DegenerateCorrelation):
        dependence_engine.exponent_function([1.0, 1.0], 1.0, [[1.0, 1.0], [1.0, 1.0]])


def test_exponent_drops_infinite_coordinate():
    full = dependence_engine.exponent_function([1.0, 2.0, math.inf], 2.0, CORR_3)
    reduced = dependence_engine.exponent_function([1.0, 2.0], 2.0, CORR_3[:2, :2])
    assert full.value == pytest.approx(reduced.value, abs=1e-12)


def test_exponent_large_coordinate_approaches_lower_dimension():
    full = dependence_engine.exponent_function([1.0, 2.0, 1e6], 2.0, CORR_3)
    reduced = dependence_engine.exponent_function([1.0, 2.0], 2.0, CORR_3[:2, :2])
    assert abs(full.value - reduced.value) <= 1e-4 + full.error_estimate + reduced.error_estimate


def test_exponent_agrees_with_spectral_moment_oracle():
    z = [1.0, 2.0, 0.5]
    value = dependence_engine.exponent_function(z, 2.0, CORR_3)
    mean, se = diagnostics_service.spectral_moment_exponent(z, 2.0, CORR_3, 400_000, RandomStream(8))
    assert abs(value.value - mean) <= 4 * se + value.error_estimate


def test_extremal_coefficient_bounds():
    value = dependence_engine.extremal_coefficient(1.5, CORR_3)
    assert 1.0 - value.error_estimate <= value.value <= 3.0 + value.error_estimate
    independent = dependence_engine.extremal_coefficient(1.0, np.eye(2))
    assert independent.value == pytest.approx(1.7071, abs=1e-4)


def test_closed_form_limits():
    assert dependence_engine.bivariate_extremal_coefficient_closed(1.0, 0.0) == pytest.approx(THETA_INDEPENDENT_ALPHA_1)
    assert dependence_engine.bivariate_extremal_coefficient_closed(1.0, 0.9999) < 1.05
    assert dependence_engine.bivariate_extremal_coefficient_closed(100.0, 0.0) >= 1.99
    with pytest.raises(DomainError):
        dependence_engine.bivariate_extremal_coefficient_closed(1.0, 1.0)


@pytest.mark.parametrize('rho', [-0.8, 0.0, 0.35, 0.95])
def test_schlather_form_is_the_alpha_one_case(rho):
    assert dependence_engine.schlather_extremal_coefficient(rho) == pytest.approx(
        dependence_engine.bivariate_extremal_coefficient_closed(1.0, rho), abs=1e-12)


def test_extremal_coefficient_function():
    spec = CorrelationSpec.parametric('exponential', 1.0)
    theta = dependence_engine.extremal_coefficient_function(2.0, spec, [0.0, 0.1, 1.0, 10.0])
    assert theta[0] == 1.0
    assert np.all(np.diff(theta) > 0)
    assert theta[2] == pytest.approx(dependence_engine.bivariate_extremal_coefficient_closed(2.0, math.exp(-1.0)))
    with pytest.raises(DomainError):
        dependence_engine.extremal_coefficient_function(2.0, spec, [-1.0])


@pytest.mark.parametrize('alpha', [0.5, 2.0])
def test_univariate_extremal_t_cdf_is_frechet(alpha):
    assert dependence_engine.extremal_t_cdf([1.0], alpha, [[1.0]]).value == pytest.approx(math.exp(-1.0))
    assert dependence_engine.extremal_t_cdf([2.0], alpha, [[1.0]]).value == pytest.approx(math.exp(-2.0 ** -alpha))


def test_bivariate_extremal_t_cdf():
    value = dependence_engine.extremal_t_cdf([1.0, 1.0], 1.0, np.eye(2))
    assert value.value == pytest.approx(0.1813, abs=1e-4)
    with pytest.raises(DomainError):
        dependence_engine.extremal_t_cdf([0.0, 1.0], 1.0, np.eye(2))


def test_closed_form_is_non_decreasing_in_alpha():
    grid = [0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0, 100.0]
    theta = [dependence_engine.bivariate_extremal_coefficient_closed(alpha, 0.0) for alpha in grid]
    assert 1.49 <= theta[0] <= 1.51
    assert theta[-1] >= 1.99
    assert all(b >= a for a, b in zip(theta, theta[1:]))


def test_trivariate_cdf_against_plain_monte_carlo(fast_qmc):
    corr = np.array([[1.0, 0.6, -0.2], [0.6, 1.0, 0.1], [-0.2, 0.1, 1.0]])
    x = np.array([0.5, 1.2, -0.3])
    result = dependence_engine.mvt_cdf(x, 2.5, corr, fast_qmc)
    draws = sampler_service.sample_t_process(cholesky_with_jitter(corr), 2.5, RandomStream(41), 1_000_000)
    p = float(np.mean(np.all(draws <= x, axis=1)))
    oracle_se = math.sqrt(p * (1.0 - p) / draws.shape[0])
    assert abs(result.value - p) <= result.error_estimate + 3 * oracle_se + 1e-4


def test_independent_trivariate_exponent_against_spectral_oracle():
    value = dependence_engine.exponent_function([1.0, 1.0, 1.0], 1.0, np.eye(3))
    mean, se = diagnostics_service.spectral_moment_exponent([1.0, 1.0, 1.0], 1.0, np.eye(3), 400_000, RandomStream(19))
    assert abs(value.value - mean) <= 4 * se + value.error_estimate


def test_exponent_is_permutation_equivariant():
    z = np.array([0.7, 1.3, 2.0])
    order = [2, 0, 1]
    value = dependence_engine.exponent_function(z, 2.0, CORR_3)
    permuted = dependence_engine.exponent_function(z[order], 2.0, CORR_3[np.ix_(order, order)])
    assert abs(value.value - permuted.value) <= value.error_estimate + permuted.error_estimate + 1e-9


@pytest.mark.parametrize('alpha', [0.3, 1.0, 2.5, 8.0])
@pytest.mark.parametrize('z', [[0.2, 1.0, 5.0], [1.5, 0.8, 0.8], [3.0, 3.0, 0.1]])
def test_exponent_lies_between_dependence_bounds(alpha, z):
    value = dependence_engine.exponent_function(z, alpha, CORR_3)
    reciprocal = 1.0 / np.asarray(z)
    assert reciprocal.max() - value.error_estimate <= value.value <= reciprocal.sum() + value.error_estimate


def test_qmc_budget_exhaustion_is_flagged(caplog):
    tight = QmcSettings(n_points=2 ** 6, randomizations=4, target_error=1e-12, max_points=2 ** 7, seed=1)
    corr = [[1.0, 0.5], [0.5, 1.0]]
    with caplog.at_level('WARNING'):
        result = dependence_engine.mvt_cdf([0.3, 0.8], 3.0, corr, tight)
    assert result.budget_exceeded
    assert result.error_estimate > tight.target_error
    assert result.points_used == 2 ** 7 * 4
    assert 0.0 < result.value < 1.0
    assert 'QMC_BUDGET_EXCEEDED' in caplog.text
    assert result.to_dict()['budget_exceeded'] is True

    exponent = dependence_engine.exponent_function([1.0, 1.0, 1.0], 2.0, CORR_3, tight)
    assert exponent.budget_exceeded
    assert exponent.to_dict()['budget_exceeded'] is True


def test_default_settings_meet_the_error_target():
    result = dependence_engine.mvt_cdf([0.3, 0.8], 3.0, [[1.0, 0.5], [0.5, 1.0]])
    assert not result.budget_exceeded
    assert result.error_estimate <= QmcSettings().target_error
