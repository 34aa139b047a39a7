"""
MDA harness
Monte Carlo check that normalized block maxima of t processes converge
to the extremal t law with the same degree of freedom and correlation
"""

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Dict, Any

import numpy as np

from src.models.errors import DomainError
from src.models.models import QmcSettings
from src.models.result_models import MdaReport
from src.services.correlation_service import correlation_service
from src.services.dependence_service import dependence_engine
from src.services.diagnostics_service import diagnostics_service
from src.services.sampler_service import sampler_service, RandomStream
from src.utils.numerics import cholesky_with_jitter, frechet_norming_a_n

logger = logging.getLogger(__name__)

CONSTRUCTIONS = ('variance_mixture', 'radial')


class MdaHarness:
    """Service comparing empirical block-maximum CDFs with the extremal t CDF"""

    def __init__(self):
        self.default_block_size = 10 ** 4
        self.default_bias_allowance = 0.01
        self.tensor_levels = (0.5, 1.0, 2.0)
        self.max_tensor_dimension = 3
        self.chunk_rows = 10 ** 6

    def block_max_normalized(self, nu: float, corr, n: int, stream: RandomStream,
                             construction: str = 'variance_mixture',
                             convention: str = 'tail_matched') -> np.ndarray:
        """Componentwise max of n iid t vectors divided by a_n (b_n = 0)"""
        chol = self._factor(corr)
        return self._block_max(nu, chol, n, stream, construction, convention)

    def _block_max(self, nu: float, chol, n: int, stream: RandomStream, construction: str,
                   convention: str) -> np.ndarray:
        if n < 1:
            raise DomainError(f"Block size must be at least 1, got {n}")
        if construction not in CONSTRUCTIONS:
            raise DomainError(f"Unknown construction {construction!r}, expected one of {CONSTRUCTIONS}")
        maximum = np.full(chol.dimension, -np.inf)
        remaining = n
        while remaining > 0:
            size = min(self.chunk_rows, remaining)
            if construction == 'variance_mixture':
                draws = sampler_service.sample_t_process(chol, nu, stream, size)
            else:
                draws = sampler_service.sample_elliptical_t_vector(chol, nu, chol.dimension, stream, size)
            maximum = np.maximum(maximum, draws.max(axis=0))
            remaining -= size
        return maximum / frechet_norming_a_n(n, nu, convention)

    def block_maxima(self, nu: float, corr, n: int, replicates: int, seed: int, threads: int = 1,
                     construction: str = 'variance_mixture', convention: str = 'tail_matched') -> np.ndarray:
        """(replicates, d) normalized block maxima; replicate r uses stream (seed, r)"""
        chol = self._factor(corr)

        def one(replicate: int) -> np.ndarray:
            return self._block_max(nu, chol, n, RandomStream(seed, replicate), construction, convention)

        if threads <= 1:
            rows = [one(r) for r in range(replicates)]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                rows = list(pool.map(one, range(replicates)))
        return np.vstack(rows)

    def default_grid(self, d: int) -> List[List[float]]:
        """Tensor grid {0.5, 1, 2}^d for d <= 3"""
        if d > self.max_tensor_dimension:
            raise DomainError(f"No default grid for d={d} > {self.max_tensor_dimension}; supply z vectors")
        return [list(point) for point in itertools.product(self.tensor_levels, repeat=d)]

    def run_mda_check(self, nu: float, corr, n: int, replicates: int, grid: Optional[Sequence[Sequence[float]]],
                      q: Optional[QmcSettings], seed: int, threads: int = 1,
                      bias_allowance: Optional[float] = None, construction: str = 'variance_mixture',
                      convention: str = 'tail_matched') -> MdaReport:
        """
        Empirical CDF of normalized block maxima against extremal_t_cdf(z, alpha=nu, Sigma*=corr)

        A grid point passes when |gap| <= 3 se + QMC error + bias allowance.
        """
        corr = np.atleast_2d(np.asarray(corr, dtype=float))
        grid = self._checked_grid(grid, corr.shape[0])
        theoretical = self._theoretical(nu, corr, grid, q)
        logger.info(f"MDA check: nu={nu}, d={corr.shape[0]}, block size {n}, {replicates} replicates, "
                    f"{len(grid)} grid points")
        maxima = self.block_maxima(nu, corr, n, replicates, seed, threads, construction, convention)
        report = self._report(nu, n, maxima, grid, theoretical, bias_allowance, construction)
        logger.info(f"MDA check finished: max |gap| {report.max_abs_gap:.4f}, passed={report.passed}")
        return report

    def run_block_size_sweep(self, nu: float, corr, block_sizes: Sequence[int], replicates: int,
                             grid: Optional[Sequence[Sequence[float]]], q: Optional[QmcSettings], seed: int,
                             threads: int = 1, bias_allowance: Optional[float] = None,
                             construction: str = 'variance_mixture') -> List[Dict[str, Any]]:
        """Max |gap| per block size, exposing the pre-asymptotic bias trend"""
        corr = np.atleast_2d(np.asarray(corr, dtype=float))
        grid = self._checked_grid(grid, corr.shape[0])
        theoretical = self._theoretical(nu, corr, grid, q)
        rows = []
        for n in block_sizes:
            maxima = self.block_maxima(nu, corr, n, replicates, seed, threads, construction)
            report = self._report(nu, n, maxima, grid, theoretical, bias_allowance, construction)
            rows.append({'block_size': int(n), 'max_abs_gap': report.max_abs_gap, 'passed': report.passed})
            logger.info(f"Block size {n}: max |gap| {report.max_abs_gap:.4f}")
        return rows

    def _theoretical(self, nu: float, corr: np.ndarray, grid: List[List[float]], q: Optional[QmcSettings]):
        return [dependence_engine.extremal_t_cdf(z, nu, corr, q) for z in grid]

    def _report(self, nu: float, n: int, maxima: np.ndarray, grid: List[List[float]], theoretical,
                bias_allowance: Optional[float], construction: str) -> MdaReport:
        replicates = maxima.shape[0]
        empirical = [diagnostics_service.empirical_joint_cdf(maxima, z) for z in grid]
        return MdaReport(
            block_size=n,
            replicates=replicates,
            grid=[[float(v) for v in z] for z in grid],
            empirical_cdf=empirical,
            theoretical_cdf=[t.value for t in theoretical],
            theoretical_error=[t.error_estimate for t in theoretical],
            binomial_3se=[3.0 * diagnostics_service.binomial_standard_error(t.value, replicates) for t in theoretical],
            bias_allowance=self.default_bias_allowance if bias_allowance is None else bias_allowance,
            nu=float(nu),
            construction=construction
        )

    def _checked_grid(self, grid, d: int) -> List[List[float]]:
        if grid is None or len(grid) == 0:
            return self.default_grid(d)
        checked = []
        for z in grid:
            point = [float(v) for v in z]
            if len(point) != d:
                raise DomainError(f"Grid point {point} does not have {d} coordinates")
            if any(not v > 0 for v in point):
                raise DomainError(f"Grid points must be strictly positive, got {point}")
            checked.append(point)
        return checked

    def _factor(self, corr):
        return cholesky_with_jitter(correlation_service.require_valid(corr))


# Global MDA harness instance
mda_harness = MdaHarness()
