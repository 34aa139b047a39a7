"""
Dependence service
Extremal t dependence function M, extremal t CDF and extremal coefficients,
with the multivariate t CDF engine they rest on
"""

import logging
import math
from typing import Optional

import numpy as np
from scipy.stats import qmc

from src.models.errors import DomainError, DimensionMismatch, NotPositiveDefinite, QMC_BUDGET_EXCEEDED
from src.models.models import QmcSettings, TailIndex
from src.models.result_models import MvtCdfResult, ExponentValue, ProbabilityValue
from src.services.correlation_service import correlation_service
from src.utils.numerics import (
    student_t_cdf, normal_cdf, normal_ppf, chi_quantile, cholesky_with_jitter
)

logger = logging.getLogger(__name__)

# Keeps normal quantiles finite inside the separation-of-variables recursion
_PROBABILITY_FLOOR = 1e-300
_PROBABILITY_CEILING = 1.0 - 1e-16
_LIMIT_CLIP = 30.0


class DependenceEngine:
    """Evaluates the extremal t dependence function and related quantities"""

    def __init__(self, default_qmc: Optional[QmcSettings] = None):
        self.default_qmc = default_qmc or QmcSettings()

    # ------------------------------------------------------------------
    # Multivariate t CDF
    # ------------------------------------------------------------------

    def mvt_cdf(self, x, df: float, sigma, q: Optional[QmcSettings] = None) -> MvtCdfResult:
        """
        P(T <= x) for T multivariate t with df, location 0 and dispersion sigma

        Randomized QMC over the separation-of-variables transform: variables are
        prioritized, the correlation is factored, the radial part enters through
        the chi quantile and the remaining coordinates are conditioned in turn.
        """
        q = q or self.default_qmc
        if not df > 0:
            raise DomainError(f"Degrees of freedom must be positive, got {df}")
        limits = np.atleast_1d(np.asarray(x, dtype=float))
        sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
        if sigma.shape != (limits.size, limits.size):
            raise DimensionMismatch(f"Point of length {limits.size} with dispersion of shape {sigma.shape}")
        if np.any(np.isnan(limits)):
            raise DomainError('CDF point contains NaN')
        if np.any(np.isneginf(limits)):
            return MvtCdfResult(value=0.0, error_estimate=0.0, points_used=0)

        # +inf limits marginalize their coordinate out
        keep = ~np.isposinf(limits)
        if not np.any(keep):
            return MvtCdfResult(value=1.0, error_estimate=0.0, points_used=0)
        limits, sigma = limits[keep], sigma[np.ix_(keep, keep)]

        variances = np.diag(sigma)
        if np.any(~(variances > 0)):
            raise NotPositiveDefinite('Dispersion matrix has a non-positive diagonal entry')
        scale = np.sqrt(variances)
        upper = limits / scale
        corr = sigma / np.outer(scale, scale)

        if upper.size == 1:
            return MvtCdfResult(value=student_t_cdf(float(upper[0]), df), error_estimate=0.0, points_used=0)

        order = self._prioritize(upper, corr)
        upper = upper[order]
        lower = cholesky_with_jitter(corr[np.ix_(order, order)]).lower
        return self._qmc_estimate(upper, lower, df, q)

    def _qmc_estimate(self, upper: np.ndarray, lower: np.ndarray, df: float, q: QmcSettings) -> MvtCdfResult:
        k = upper.size
        batch_seeds = np.random.SeedSequence(q.seed).spawn(q.randomizations)
        n_points = q.n_points
        while True:
            estimates = np.empty(q.randomizations)
            for index, batch_seed in enumerate(batch_seeds):
                sampler = qmc.Sobol(d=k, scramble=True, seed=np.random.default_rng(batch_seed))
                points = sampler.random_base2(int(math.log2(n_points)))
                estimates[index] = self._separation_of_variables(upper, lower, df, points)
            value = float(np.mean(estimates))
            error = float(3.0 * np.std(estimates, ddof=1) / math.sqrt(q.randomizations))
            if error <= q.target_error or 2 * n_points > q.max_points:
                break
            n_points *= 2

        budget_exceeded = error > q.target_error
        if budget_exceeded:
            logger.warning(f"{QMC_BUDGET_EXCEEDED}: error {error:.2e} above target {q.target_error:.2e} "
                           f"after {n_points} points x {q.randomizations} randomizations (k={k})")
        return MvtCdfResult(
            value=min(max(value, 0.0), 1.0),
            error_estimate=error,
            points_used=n_points * q.randomizations,
            budget_exceeded=budget_exceeded
        )

    def _separation_of_variables(self, upper: np.ndarray, lower: np.ndarray, df: float,
                                 points: np.ndarray) -> float:
        """Mean over the point set of the sequentially conditioned integrand"""
        n, k = points.shape
        radial = chi_quantile(points[:, 0], df) / math.sqrt(df)
        conditioned = np.zeros((n, k))
        product = np.ones(n)
        for i in range(k):
            shift = conditioned[:, :i] @ lower[i, :i]
            step = normal_cdf((radial * upper[i] - shift) / lower[i, i])
            product *= step
            if i < k - 1:
                draw = np.clip(points[:, i + 1] * step, _PROBABILITY_FLOOR, _PROBABILITY_CEILING)
                conditioned[:, i] = normal_ppf(draw)
        return float(np.mean(product))

    def _prioritize(self, upper: np.ndarray, corr: np.ndarray) -> np.ndarray:
        """Greedy variable order: smallest expected conditional probability first

        Each step standardizes the remaining limits by their conditional
        variance given the variables already placed (ties: smaller variance).
        """
        k = upper.size
        a = corr.copy()
        b = upper.copy()
        order = np.arange(k)
        factor = np.zeros((k, k))
        expected = np.zeros(k)

        for i in range(k):
            remaining = np.arange(i, k)
            cond_var = np.diag(a)[remaining] - np.sum(factor[remaining, :i] ** 2, axis=1)
            cond_sd = np.sqrt(np.maximum(cond_var, 1e-300))
            standardized = (b[remaining] - factor[remaining, :i] @ expected[:i]) / cond_sd
            keys = normal_cdf(np.clip(standardized, -_LIMIT_CLIP, _LIMIT_CLIP))
            pick = int(remaining[np.lexsort((cond_var, keys))[0]])

            if pick != i:
                swap = [pick, i]
                a[[i, pick], :] = a[swap, :]
                a[:, [i, pick]] = a[:, swap]
                b[[i, pick]] = b[swap]
                order[[i, pick]] = order[swap]
                factor[[i, pick], :i] = factor[swap, :i]

            pivot = a[i, i] - np.sum(factor[i, :i] ** 2)
            if pivot <= 1e-14:
                expected[i] = 0.0
                continue
            factor[i, i] = math.sqrt(pivot)
            for r in range(i + 1, k):
                factor[r, i] = (a[r, i] - factor[r, :i] @ factor[i, :i]) / factor[i, i]
            limit = float(np.clip((b[i] - factor[i, :i] @ expected[:i]) / factor[i, i], -_LIMIT_CLIP, _LIMIT_CLIP))
            # Mean of a standard normal truncated to (-inf, limit]
            density = math.exp(-0.5 * limit * limit) / math.sqrt(2.0 * math.pi)
            expected[i] = -density / float(normal_cdf(limit))
        return order

    # ------------------------------------------------------------------
    # Dependence function and derived quantities
    # ------------------------------------------------------------------

    def exponent_function(self, z, alpha, sigma_star, q: Optional[QmcSettings] = None) -> ExponentValue:
        """
        M_{nu, Sigma*}(z) = sum_j z_j^-1 t_{nu+1}((z_-j / z_j)^(1/nu) | Sigma*_-j,j,
                                                  (nu+1)^-1 (Sigma*_-j,-j - Sigma*_-j,j Sigma*_j,-j))

        Each shifted and scaled t CDF is reduced to mvt_cdf at the point minus
        the location; mvt_cdf standardizes the dispersion internally.
        """
        q = q or self.default_qmc
        nu = float(TailIndex.from_value(alpha))
        z = np.atleast_1d(np.asarray(z, dtype=float))
        sigma = self._checked_correlation(sigma_star, z.size)
        if np.any(np.isnan(z)) or np.any(z < 0):
            raise DomainError(f"Dependence function requires z >= 0, got {z.tolist()}")
        if np.all(z == 0):
            raise DomainError('Dependence function is undefined at the zero vector')
        if np.any(z == 0):
            return ExponentValue(value=math.inf)

        d = z.size
        total, error, points_used, budget_exceeded = 0.0, 0.0, 0, False
        for j in range(d):
            if math.isinf(z[j]):
                continue
            if d == 1:
                total += 1.0 / z[j]
                continue
            others = np.arange(d) != j
            location = sigma[others, j]
            dispersion = (sigma[np.ix_(others, others)] - np.outer(location, location)) / (nu + 1.0)
            point = (z[others] / z[j]) ** (1.0 / nu)
            result = self.mvt_cdf(point - location, nu + 1.0, dispersion, q)
            total += result.value / z[j]
            error += result.error_estimate / z[j]
            points_used += result.points_used
            budget_exceeded = budget_exceeded or result.budget_exceeded
        return ExponentValue(value=total, error_estimate=error, points_used=points_used,
                             budget_exceeded=budget_exceeded)

    def bivariate_extremal_coefficient_closed(self, alpha, rho: float) -> float:
        """theta = 2 T_{alpha+1}(sqrt((alpha+1)(1-rho)/(1+rho))), no QMC involved"""
        nu = float(TailIndex.from_value(alpha))
        if not -1.0 < rho < 1.0:
            raise DomainError(f"Bivariate extremal coefficient requires |rho| < 1, got {rho}")
        return 2.0 * student_t_cdf(math.sqrt((nu + 1.0) * (1.0 - rho) / (1.0 + rho)), nu + 1.0)

    def schlather_extremal_coefficient(self, rho: float) -> float:
        """alpha = 1 (extremal Gaussian) closed form 1 + sqrt((1 - rho) / 2)"""
        if not -1.0 <= rho <= 1.0:
            raise DomainError(f"Correlation must lie in [-1, 1], got {rho}")
        return 1.0 + math.sqrt(0.5 * (1.0 - rho))

    def extremal_coefficient_function(self, alpha, spec, distances) -> np.ndarray:
        """theta(h) for a parametric correlation family; theta(0) = 1"""
        lags = np.atleast_1d(np.asarray(distances, dtype=float))
        if np.any(lags < 0):
            raise DomainError('Distances must be non-negative')
        rho = np.atleast_1d(spec.correlation_at(lags))
        return np.array([
            1.0 if h == 0 or r >= 1.0 else self.bivariate_extremal_coefficient_closed(alpha, float(r))
            for h, r in zip(lags, rho)
        ])

    def extremal_t_cdf(self, z, alpha, sigma_star, q: Optional[QmcSettings] = None) -> ProbabilityValue:
        """P(Z <= z) = exp(-M(z^alpha)) for alpha-Frechet margins"""
        nu = float(TailIndex.from_value(alpha))
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if np.any(~(z > 0)):
            raise DomainError(f"Extremal t CDF requires z > 0, got {z.tolist()}")
        exponent = self.exponent_function(z ** nu, nu, sigma_star, q)
        probability = math.exp(-exponent.value)
        return ProbabilityValue(value=probability, error_estimate=exponent.error_estimate * probability,
                                points_used=exponent.points_used)

    def extremal_coefficient(self, alpha, sigma_star, q: Optional[QmcSettings] = None) -> ExponentValue:
        """M(1), in [1, d] up to the error estimate"""
        d = np.atleast_2d(np.asarray(sigma_star, dtype=float)).shape[0]
        return self.exponent_function(np.ones(d), alpha, sigma_star, q)

    def _checked_correlation(self, sigma_star, d: int) -> np.ndarray:
        sigma = np.atleast_2d(np.asarray(sigma_star, dtype=float))
        if sigma.shape != (d, d):
            raise DimensionMismatch(f"z has {d} entries but the correlation matrix has shape {sigma.shape}")
        return correlation_service.require_valid(sigma)


# Global dependence engine instance
dependence_engine = DependenceEngine()
