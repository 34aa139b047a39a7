"""
Diagnostics service
Empirical checks of simulated extremal t samples: probability-integral
transforms, KS distances, empirical extremal coefficients and a Monte Carlo
spectral-moment oracle for the dependence function
"""

import logging
import math
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from src.models.errors import DomainError
from src.models.models import TailIndex
from src.services.sampler_service import sampler_service, RandomStream
from src.utils.numerics import cholesky_with_jitter, m_alpha_gaussian

logger = logging.getLogger(__name__)


class DiagnosticsService:
    """Empirical summaries used by tests, the MDA harness and the CLI"""

    def __init__(self):
        self.oracle_chunk = 250_000

    def frechet_pit(self, values, alpha) -> np.ndarray:
        """u = exp(-Z^-alpha), uniform on (0, 1) for alpha-Frechet Z"""
        z = np.asarray(values, dtype=float)
        with np.errstate(divide='ignore'):
            return np.exp(-z ** (-float(TailIndex.from_value(alpha))))

    def ks_uniform(self, u) -> float:
        return float(stats.kstest(np.asarray(u, dtype=float), 'uniform').statistic)

    def ks_against_cdf(self, samples, cdf: Callable) -> float:
        return float(stats.kstest(np.asarray(samples, dtype=float), cdf).statistic)

    def ks_two_sample(self, first, second) -> float:
        return float(stats.ks_2samp(np.asarray(first, dtype=float), np.asarray(second, dtype=float)).statistic)

    def empirical_extremal_coefficient(self, values, alpha, columns: Optional[Sequence[int]] = None) -> float:
        """theta-hat = n / sum_i 1 / max_j Z_ij^alpha

        For unit Frechet margins, 1 / max_j Y_j is exponential with rate theta.
        """
        z = np.atleast_2d(np.asarray(values, dtype=float))
        if columns is not None:
            z = z[:, list(columns)]
        unit = z ** float(TailIndex.from_value(alpha))
        maxima = unit.max(axis=1)
        if np.any(~(maxima > 0)):
            raise DomainError('Empirical extremal coefficient needs strictly positive maxima')
        return float(z.shape[0] / np.sum(1.0 / maxima))

    def empirical_joint_cdf(self, values, z) -> float:
        """Fraction of rows with every component <= z"""
        samples = np.atleast_2d(np.asarray(values, dtype=float))
        return float(np.mean(np.all(samples <= np.asarray(z, dtype=float), axis=1)))

    def binomial_standard_error(self, p: float, n: int) -> float:
        return math.sqrt(max(p * (1.0 - p), 0.0) / n)

    def spectral_moment_exponent(self, z, alpha, corr, n: int, stream: RandomStream) -> Tuple[float, float]:
        """
        Monte Carlo M(z) = E max_j z_j^-1 (W_j+)^alpha / m_alpha for W ~ N(0, corr)

        Returns (estimate, standard error).
        """
        alpha = float(TailIndex.from_value(alpha))
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if np.any(~(z > 0)):
            raise DomainError('Spectral-moment oracle requires z > 0')
        chol = cholesky_with_jitter(np.atleast_2d(np.asarray(corr, dtype=float)))
        m_alpha = m_alpha_gaussian(alpha)

        total, total_sq, remaining = 0.0, 0.0, n
        while remaining > 0:
            size = min(self.oracle_chunk, remaining)
            field = sampler_service.sample_gaussian_field(chol, stream, size)
            draws = np.max(np.maximum(field, 0.0) ** alpha / z, axis=1) / m_alpha
            total += float(np.sum(draws))
            total_sq += float(np.sum(draws ** 2))
            remaining -= size
        mean = total / n
        variance = max(total_sq / n - mean ** 2, 0.0) * n / (n - 1)
        return mean, math.sqrt(variance / n)


# Global diagnostics service instance
diagnostics_service = DiagnosticsService()
