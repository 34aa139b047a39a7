"""
Spectral simulation service
Simulates extremal t processes (Gaussian spectral fields) and multivariate
extremal t vectors (elliptical t spectral vectors) as m_alpha^(-1/alpha) max_i V_i X_i+
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Any, Optional

import numpy as np

from src.models.errors import DomainError, InfiniteMoment, TRUNCATION_BUDGET_EXCEEDED
from src.models.models import ExtremalTModel, SpectralSettings, TailIndex
from src.models.result_models import FieldReplicate, MAlphaEstimate
from src.services.correlation_service import correlation_service
from src.services.sampler_service import sampler_service, RandomStream, PoissonPointIterator
from src.utils.numerics import cholesky_with_jitter, m_alpha_gaussian, m_alpha_student_t, CholeskyFactor

logger = logging.getLogger(__name__)

# Replicates use stream ids 0..R-1; the Monte Carlo m_alpha draws come from the last id
M_ALPHA_STREAM_ID = 2 ** 64 - 1


class SpectralSimulator:
    """Service implementing the Poisson-point spectral constructions"""

    def __init__(self):
        self.initial_block = 16
        self.max_block = 4096
        # Effective bounds on the spectral vector for the stopping rule
        self.default_truncation = {'gaussian': 6.0, 't': 25.0}
        self.default_m_alpha_samples = 10 ** 6
        self.min_m_alpha_samples = 10 ** 4

    # ------------------------------------------------------------------
    # Single replicates
    # ------------------------------------------------------------------

    def simulate_extremal_t_field(self, model: ExtremalTModel, sites, settings: SpectralSettings,
                                  stream: RandomStream) -> FieldReplicate:
        """One replicate of the extremal t process at the given sites"""
        chol = self._factor_for(model, sites)
        return self.simulate_field_from_factor(model.alpha, chol, settings, stream)

    def simulate_field_from_factor(self, alpha, chol: CholeskyFactor, settings: SpectralSettings,
                                   stream: RandomStream) -> FieldReplicate:
        alpha = float(TailIndex.from_value(alpha))
        m_alpha = m_alpha_gaussian(alpha)
        return self._max_over_points(
            alpha,
            lambda size: sampler_service.sample_gaussian_field(chol, stream, size),
            chol.dimension, m_alpha, settings, stream
        )

    def simulate_extremal_t_mv(self, alpha, spectral_nu: float, corr, m_alpha: MAlphaEstimate,
                               settings: SpectralSettings, stream: RandomStream) -> FieldReplicate:
        """One extremal t vector built from elliptical t spectral vectors with spectral_nu df"""
        alpha = float(TailIndex.from_value(alpha))
        self._require_finite_moment(alpha, spectral_nu)
        chol = self._factor_for_matrix(corr)
        return self._max_over_points(
            alpha,
            lambda size: sampler_service.sample_t_process(chol, spectral_nu, stream, size),
            chol.dimension, m_alpha.value, settings, stream
        )

    def _max_over_points(self, alpha: float, draw_spectral: Callable[[int], np.ndarray], d: int,
                         m_alpha: float, settings: SpectralSettings, stream: RandomStream) -> FieldReplicate:
        """Running componentwise max of V_i X_i+ with the truncation stopping rule

        Point i is not used once V_i * c falls below the smallest running
        (un-normalized) maximum; V is decreasing so the rule stays satisfied.
        """
        points = PoissonPointIterator(alpha)
        running = np.zeros(d)
        scale = m_alpha ** (-1.0 / alpha)
        used = 0
        block = self.initial_block

        while used < settings.max_points:
            size = min(block, settings.max_points - used)
            v = points.next_block(stream, size)
            spectral = np.maximum(draw_spectral(size), 0.0)
            candidates = np.vstack([running[None, :], v[:, None] * spectral])
            cumulative = np.maximum.accumulate(candidates, axis=0)
            prior_min = cumulative[:-1].min(axis=1)
            stops = np.nonzero(v * settings.truncation_c < prior_min)[0]
            if stops.size:
                k = int(stops[0])
                return FieldReplicate(values=cumulative[k] * scale, points_used=used + k,
                                      truncation_triggered=False)
            running = cumulative[-1]
            used += size
            block = min(2 * block, self.max_block)

        return FieldReplicate(values=running * scale, points_used=used, truncation_triggered=True)

    # ------------------------------------------------------------------
    # Replicate batches
    # ------------------------------------------------------------------

    def simulate_field_replicates(self, model: ExtremalTModel, sites, settings: SpectralSettings,
                                  threads: int = 1) -> List[FieldReplicate]:
        """settings.replicates replicates, replicate r drawn from stream (seed, r)"""
        corr = correlation_service.build_correlation_matrix(model.correlation, sites)
        return self.simulate_matrix_replicates(model.alpha, corr, settings, threads)

    def simulate_matrix_replicates(self, alpha, corr, settings: SpectralSettings,
                                   threads: int = 1) -> List[FieldReplicate]:
        """Replicates of the extremal t process for an explicit correlation matrix"""
        chol = self._factor_for_matrix(corr)
        logger.info(f"Simulating {settings.replicates} extremal t replicates at {chol.dimension} sites "
                    f"(alpha={float(alpha)}, c={settings.truncation_c})")
        replicates = self._run_replicates(
            lambda stream: self.simulate_field_from_factor(alpha, chol, settings, stream),
            settings, threads
        )
        self._report_truncation(replicates, settings)
        return replicates

    def simulate_mv_replicates(self, alpha, spectral_nu: float, corr, m_alpha: MAlphaEstimate,
                               settings: SpectralSettings, threads: int = 1) -> List[FieldReplicate]:
        self._require_finite_moment(float(alpha), spectral_nu)
        chol = self._factor_for_matrix(corr)
        logger.info(f"Simulating {settings.replicates} extremal t vectors of dimension {chol.dimension} "
                    f"(alpha={float(alpha)}, spectral nu={spectral_nu}, m_alpha={m_alpha.value:.6g} [{m_alpha.method}])")

        def one(stream):
            return self._max_over_points(
                float(alpha),
                lambda size: sampler_service.sample_t_process(chol, spectral_nu, stream, size),
                chol.dimension, m_alpha.value, settings, stream
            )

        replicates = self._run_replicates(one, settings, threads)
        self._report_truncation(replicates, settings)
        return replicates

    def _run_replicates(self, simulate_one: Callable[[RandomStream], FieldReplicate],
                        settings: SpectralSettings, threads: int) -> List[FieldReplicate]:
        streams = (RandomStream(settings.seed, r) for r in range(settings.replicates))
        if threads <= 1:
            return [simulate_one(stream) for stream in streams]
        # map keeps replicate order regardless of completion order
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(simulate_one, streams))

    def _report_truncation(self, replicates: List[FieldReplicate], settings: SpectralSettings):
        truncated = sum(1 for r in replicates if r.truncation_triggered)
        if truncated:
            logger.warning(f"{TRUNCATION_BUDGET_EXCEEDED}: {truncated} of {len(replicates)} replicates "
                           f"hit max_points={settings.max_points}")
        unreached = sum(1 for r in replicates if r.unreached_sites)
        if unreached:
            logger.warning(f"{unreached} truncated replicates left at least one site at 0")

    # ------------------------------------------------------------------
    # m_alpha
    # ------------------------------------------------------------------

    def estimate_m_alpha_mc(self, alpha, spectral_nu: float, n: int, stream: RandomStream) -> MAlphaEstimate:
        """Monte Carlo mean and standard error of (max(T, 0))^alpha over n standard t draws"""
        alpha = float(TailIndex.from_value(alpha))
        self._require_finite_moment(alpha, spectral_nu)
        if n < self.min_m_alpha_samples:
            raise DomainError(f"Monte Carlo m_alpha needs at least {self.min_m_alpha_samples} draws, got {n}")
        if 2 * alpha >= spectral_nu:
            logger.warning(f"(T+)^alpha has infinite variance for alpha={alpha}, nu={spectral_nu}; "
                           f"the standard error is unreliable")
        draws = np.maximum(stream.standard_t(spectral_nu, n), 0.0) ** alpha
        value = float(np.mean(draws))
        std_error = float(np.std(draws, ddof=1) / math.sqrt(n))
        return MAlphaEstimate(value=value, std_error=std_error, method='monte_carlo')

    def resolve_m_alpha(self, alpha, spectral_nu: Optional[float] = None, method: str = 'analytic',
                        n: Optional[int] = None, stream: Optional[RandomStream] = None) -> MAlphaEstimate:
        """m_alpha for Gaussian (spectral_nu None) or t spectral vectors

        Closed forms exist for both families; monte_carlo is only available
        for t spectral vectors and requires a stream.
        """
        alpha = float(TailIndex.from_value(alpha))
        if spectral_nu is None:
            if method != 'analytic':
                raise DomainError('Gaussian spectral fields always use the analytic m_alpha')
            return MAlphaEstimate(value=m_alpha_gaussian(alpha))
        self._require_finite_moment(alpha, spectral_nu)
        if method == 'analytic':
            return MAlphaEstimate(value=m_alpha_student_t(alpha, spectral_nu))
        if method == 'monte_carlo':
            if stream is None:
                raise DomainError('Monte Carlo m_alpha requires a random stream')
            return self.estimate_m_alpha_mc(alpha, spectral_nu, n or self.default_m_alpha_samples, stream)
        raise DomainError(f"Unknown m_alpha method {method!r}")

    # ------------------------------------------------------------------
    # Transforms and diagnostics
    # ------------------------------------------------------------------

    def to_unit_frechet(self, values, alpha) -> np.ndarray:
        """Z^alpha: maps alpha-Frechet margins to unit Frechet margins"""
        return np.asarray(values, dtype=float) ** float(TailIndex.from_value(alpha))

    def feasibility_sweep(self, alphas: List[float], corr, settings: SpectralSettings,
                          threads: int = 1) -> List[Dict[str, Any]]:
        """Truncation rate and Poisson-point cost of the Gaussian construction per alpha"""
        chol = self._factor_for_matrix(corr)
        rows = []
        for alpha in alphas:
            replicates = self._run_replicates(
                lambda stream: self.simulate_field_from_factor(alpha, chol, settings, stream),
                settings, threads
            )
            points = np.array([r.points_used for r in replicates])
            truncated = sum(1 for r in replicates if r.truncation_triggered)
            rows.append({
                'alpha': float(alpha),
                'replicates': len(replicates),
                'truncated_fraction': truncated / len(replicates),
                'mean_points_used': float(points.mean()),
                'max_points_used': int(points.max())
            })
            logger.info(f"alpha={alpha}: mean points {points.mean():.1f}, truncated {truncated}/{len(replicates)}")
        return rows

    # ------------------------------------------------------------------
    # Helpers
    # ------------------------------------------------------------------

    def _require_finite_moment(self, alpha: float, spectral_nu: float):
        if not spectral_nu > 0:
            raise DomainError(f"Spectral degrees of freedom must be positive, got {spectral_nu}")
        if alpha >= spectral_nu:
            raise InfiniteMoment(
                f"m_alpha = E[(X+)^alpha] is infinite for alpha={alpha} >= spectral nu={spectral_nu}"
            )

    def _factor_for(self, model: ExtremalTModel, sites) -> CholeskyFactor:
        corr = correlation_service.build_correlation_matrix(model.correlation, sites)
        return cholesky_with_jitter(corr)

    def _factor_for_matrix(self, corr) -> CholeskyFactor:
        return cholesky_with_jitter(correlation_service.require_valid(corr))


# Global spectral simulator instance
spectral_simulator = SpectralSimulator()
