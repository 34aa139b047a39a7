import math

import numpy as np
import pytest
from scipy import stats

from src.models.errors import DomainError, DimensionMismatch
from src.models.models import CorrelationSpec, SiteSet
from src.services.correlation_service import correlation_service
from src.services.diagnostics_service import diagnostics_service
from src.services.sampler_service import sampler_service, RandomStream, PoissonPointIterator
from src.utils.numerics import cholesky_with_jitter, student_t_cdf, normal_cdf


def test_equal_seed_and_stream_id_reproduce_draws():
    first = RandomStream(42, 7).standard_normal(5)
    second = RandomStream(42, 7).standard_normal(5)
    assert np.array_equal(first, second)
    assert not np.array_equal(first, RandomStream(42, 8).standard_normal(5))
    assert not np.array_equal(first, RandomStream(43, 7).standard_normal(5))


def test_stream_rejects_out_of_range_seed():
    with pytest.raises(DomainError):
        RandomStream(-1)
    with pytest.raises(DomainError):
        RandomStream(0, 2 ** 64)


def test_poisson_points_are_decreasing(stream):
    iterator = PoissonPointIterator(2.0)
    first = iterator.next(stream)
    block = iterator.next_block(stream, 500)
    values = np.concatenate([[first], block])
    assert np.all(values > 0)
    assert np.all(np.diff(values) < 0)
    assert iterator.emitted == 501


def test_poisson_points_match_unit_rate_arrivals(stream):
    # V^-alpha are the arrival times of a unit-rate process: gaps are Exp(1)
    alpha = 1.5
    points = PoissonPointIterator(alpha).next_block(stream, 20000)
    gaps = np.diff(np.concatenate([[0.0], points ** -alpha]))
    assert diagnostics_service.ks_against_cdf(gaps, stats.expon.cdf) < 0.015


def test_poisson_iterator_rejects_non_positive_alpha():
    with pytest.raises(DomainError):
        PoissonPointIterator(0.0)


def test_gaussian_field_single_site_shape(stream):
    factor = cholesky_with_jitter(np.eye(1))
    assert sampler_service.sample_gaussian_field(factor, stream).shape == (1,)
    assert sampler_service.sample_gaussian_field(factor, stream, 10).shape == (10, 1)


def test_gaussian_field_correlation(stream, bivariate_factor):
    draws = sampler_service.sample_gaussian_field(bivariate_factor, stream, 200_000)
    assert np.corrcoef(draws.T)[0, 1] == pytest.approx(0.5, abs=0.01)

    independent = sampler_service.sample_gaussian_field(cholesky_with_jitter(np.eye(2)), stream, 200_000)
    assert abs(np.corrcoef(independent.T)[0, 1]) < 0.01


def test_t_process_cauchy_margin(stream, bivariate_factor):
    draws = sampler_service.sample_t_process(bivariate_factor, 1.0, stream, 200_000)
    for j in range(2):
        assert np.mean(draws[:, j] <= 1.0) == pytest.approx(0.75, abs=0.005)


def test_t_process_gaussian_limit(stream):
    draws = sampler_service.sample_t_process(cholesky_with_jitter(np.eye(1)), 1e6, stream, 100_000)
    assert diagnostics_service.ks_against_cdf(draws[:, 0], normal_cdf) < 0.01


def test_t_process_same_stream_identity():
    factor = cholesky_with_jitter(np.eye(3))
    first = sampler_service.sample_t_process(factor, 3.0, RandomStream(9, 2))
    second = sampler_service.sample_t_process(factor, 3.0, RandomStream(9, 2))
    assert first.shape == (3,)
    assert np.array_equal(first, second)


def test_sphere_directions(stream):
    directions = sampler_service.sample_sphere_uniform(3, stream, 1000)
    assert np.allclose(np.linalg.norm(directions, axis=1), 1.0, atol=1e-12)

    signs = sampler_service.sample_sphere_uniform(1, stream, 200_000)
    assert set(np.unique(signs)) == {-1.0, 1.0}
    assert np.mean(signs == 1.0) == pytest.approx(0.5, abs=0.005)


def test_radial_variable_follows_f_distribution(stream):
    d, nu = 3, 4.0
    radii = sampler_service.sample_radial_t(nu, d, stream, 100_000)
    assert diagnostics_service.ks_against_cdf(radii ** 2 / d, stats.f(d, nu).cdf) < 0.01


def test_elliptical_t_margins(stream, bivariate_factor):
    nu = 3.0
    draws = sampler_service.sample_elliptical_t_vector(bivariate_factor, nu, 2, stream, 100_000)
    for j in range(2):
        assert diagnostics_service.ks_against_cdf(draws[:, j], lambda x: student_t_cdf(x, nu)) < 0.01


def test_elliptical_t_single_site(stream):
    factor = cholesky_with_jitter(np.eye(1))
    draws = sampler_service.sample_elliptical_t_vector(factor, 2.0, 1, stream, 100_000)
    assert diagnostics_service.ks_against_cdf(draws[:, 0], lambda x: student_t_cdf(x, 2.0)) < 0.01


def test_elliptical_t_dimension_mismatch(stream, bivariate_factor):
    with pytest.raises(DimensionMismatch):
        sampler_service.sample_elliptical_t_vector(bivariate_factor, 3.0, 3, stream)


@pytest.mark.slow
@pytest.mark.parametrize('alpha', [0.5, 1.0, 3.0])
def test_poisson_exceedances_of_level_one(alpha):
    # Points above v are Poisson with mean v^-alpha, so mean and variance are 1 at v = 1
    n = 100_000
    stream = RandomStream(2718, 0)
    counts = np.empty(n)
    for i in range(n):
        iterator = PoissonPointIterator(alpha)
        count = 0
        while iterator.next(stream) > 1.0:
            count += 1
        counts[i] = count
    assert abs(counts.mean() - 1.0) < 3 * math.sqrt(1.0 / n)
    assert abs(counts.var(ddof=1) - 1.0) < 3 * math.sqrt(3.0 / n)


@pytest.mark.slow
def test_gaussian_field_covariance_five_sites(stream):
    sites = SiteSet([[0.0, 0.0], [0.4, 0.0], [0.0, 1.0], [1.2, 0.7], [2.5, 2.5]])
    corr = correlation_service.build_correlation_matrix(CorrelationSpec.parametric('exponential', 1.0), sites)
    draws = sampler_service.sample_gaussian_field(cholesky_with_jitter(corr), stream, 1_000_000)
    assert np.max(np.abs(np.cov(draws.T) - corr)) < 0.01


@pytest.mark.slow
@pytest.mark.parametrize('nu', [0.5, 1.0, 4.0, 20.0])
def test_t_process_margins_on_integer_grid(stream, nu):
    n = 100_000
    draws = sampler_service.sample_t_process(cholesky_with_jitter(np.eye(1)), nu, stream, n)[:, 0]
    for x in (-2.0, -1.0, 0.0, 1.0, 2.0):
        expected = student_t_cdf(x, nu)
        se = diagnostics_service.binomial_standard_error(expected, n)
        assert abs(np.mean(draws <= x) - expected) < 3 * se
