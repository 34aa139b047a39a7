import math

import numpy as np
import pytest

from src.models.errors import DomainError
from src.services.diagnostics_service import diagnostics_service
from src.services.sampler_service import RandomStream


def test_frechet_pit():
    u = diagnostics_service.frechet_pit([0.5, 1.0, 4.0], 2.0)
    assert np.allclose(u, [math.exp(-4.0), math.exp(-1.0), math.exp(-1.0 / 16.0)])


def test_ks_uniform_of_a_regular_grid():
    n = 1000
    grid = (np.arange(n) + 0.5) / n
    assert diagnostics_service.ks_uniform(grid) == pytest.approx(0.5 / n)


def test_ks_two_sample_of_identical_samples_is_zero():
    sample = np.linspace(0.0, 1.0, 50)
    assert diagnostics_service.ks_two_sample(sample, sample) == 0.0


def test_empirical_extremal_coefficient_by_hand():
    values = np.array([[1.0, 2.0], [4.0, 1.0]])
    assert diagnostics_service.empirical_extremal_coefficient(values, 1.0) == pytest.approx(2.0 / 0.75)
    # alpha rescales to unit Frechet before taking maxima
    assert diagnostics_service.empirical_extremal_coefficient(values, 2.0) == pytest.approx(2.0 / (0.25 + 1.0 / 16.0))
    assert diagnostics_service.empirical_extremal_coefficient(values, 1.0, columns=[0]) == pytest.approx(2.0 / 1.25)


def test_empirical_extremal_coefficient_requires_positive_maxima():
    with pytest.raises(DomainError):
        diagnostics_service.empirical_extremal_coefficient([[0.0, 0.0], [1.0, 2.0]], 1.0)


def test_empirical_joint_cdf():
    values = np.array([[0.5, 0.5], [1.5, 0.5], [0.5, 1.5], [0.9, 0.9]])
    assert diagnostics_service.empirical_joint_cdf(values, [1.0, 1.0]) == 0.5


def test_binomial_standard_error():
    assert diagnostics_service.binomial_standard_error(0.5, 100) == pytest.approx(0.05)
    assert diagnostics_service.binomial_standard_error(1.0, 100) == 0.0


def test_spectral_moment_oracle_single_site():
    mean, se = diagnostics_service.spectral_moment_exponent([2.0], 1.5, [[1.0]], 100_000, RandomStream(4))
    assert se > 0
    assert abs(mean - 0.5) < 4 * se


def test_spectral_moment_oracle_rejects_zero():
    with pytest.raises(DomainError):
        diagnostics_service.spectral_moment_exponent([0.0, 1.0], 1.0, np.eye(2), 10, RandomStream(1))
