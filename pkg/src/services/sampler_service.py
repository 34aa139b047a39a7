"""
Sampler service
Reproducible random streams and samplers for Poisson points, Gaussian fields,
t processes and elliptical t vectors
"""

import logging
from typing import Optional

import numpy as np

from src.models.errors import DomainError, DimensionMismatch

logger = logging.getLogger(__name__)

GENERATOR_NAME = 'numpy Philox4x64-10 (SeedSequence(seed, spawn_key=(stream_id,)))'


class RandomStream:
    """Counter-based random stream keyed by (seed, stream_id)

    Single-owner mutable state: never share one stream between workers.
    """

    generator_name = GENERATOR_NAME

    def __init__(self, seed: int, stream_id: int = 0):
        if not (0 <= int(seed) < 2 ** 64) or not (0 <= int(stream_id) < 2 ** 64):
            raise DomainError(f"Seed and stream id must be 64-bit unsigned integers, got {seed}, {stream_id}")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.Philox(sequence))

    def standard_normal(self, size=None):
        return self.generator.standard_normal(size)

    def standard_exponential(self, size=None):
        return self.generator.standard_exponential(size)

    def gamma(self, shape: float, scale: float, size=None):
        return self.generator.gamma(shape, scale, size)

    def standard_t(self, df: float, size=None):
        return self.generator.standard_t(df, size)

    def spawn(self, stream_id: int) -> 'RandomStream':
        return RandomStream(self.seed, stream_id)

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id})"


class PoissonPointIterator:
    """Points V_1 >= V_2 >= ... of a Poisson process with intensity alpha v^-(alpha+1) dv

    V_i = Gamma_i^(-1/alpha) with Gamma_i the arrival times of a unit-rate process.
    """

    def __init__(self, alpha):
        self.alpha = float(alpha)
        if not self.alpha > 0:
            raise DomainError(f"Poisson points require alpha > 0, got {alpha}")
        self.cumulative_arrival = 0.0
        self.emitted = 0

    def next(self, stream: RandomStream) -> float:
        self.cumulative_arrival += float(stream.standard_exponential())
        self.emitted += 1
        return self.cumulative_arrival ** (-1.0 / self.alpha)

    def next_block(self, stream: RandomStream, size: int) -> np.ndarray:
        """The next `size` points in one draw"""
        arrivals = self.cumulative_arrival + np.cumsum(stream.standard_exponential(size))
        self.cumulative_arrival = float(arrivals[-1])
        self.emitted += size
        return arrivals ** (-1.0 / self.alpha)


class SamplerService:
    """Samplers for every stochastic object of the spectral construction"""

    def next_poisson_point(self, iterator: PoissonPointIterator, stream: RandomStream) -> float:
        return iterator.next(stream)

    def sample_gaussian_field(self, chol, stream: RandomStream, size: Optional[int] = None) -> np.ndarray:
        """L g with g iid standard normal; shape (d,) or (size, d)"""
        lower = chol.lower
        normals = stream.standard_normal((1 if size is None else size, lower.shape[0]))
        field = normals @ lower.T
        return field[0] if size is None else field

    def sample_t_process(self, chol, nu: float, stream: RandomStream, size: Optional[int] = None) -> np.ndarray:
        """sqrt(Y) L g with nu / Y ~ Gamma(nu/2, 2): margins standard t with nu df"""
        if not nu > 0:
            raise DomainError(f"t process requires nu > 0, got {nu}")
        count = 1 if size is None else size
        field = self.sample_gaussian_field(chol, stream, count)
        mixing = nu / stream.gamma(0.5 * nu, 2.0, count)
        values = np.sqrt(mixing)[:, None] * field
        return values[0] if size is None else values

    def sample_sphere_uniform(self, d: int, stream: RandomStream, size: Optional[int] = None) -> np.ndarray:
        """Uniform direction on the unit sphere of R^d"""
        if d < 1:
            raise DomainError(f"Sphere dimension must be at least 1, got {d}")
        count = 1 if size is None else size
        normals = stream.standard_normal((count, d))
        norms = np.linalg.norm(normals, axis=1)
        zero_rows = np.nonzero(norms == 0.0)[0]
        while zero_rows.size:
            normals[zero_rows] = stream.standard_normal((zero_rows.size, d))
            norms[zero_rows] = np.linalg.norm(normals[zero_rows], axis=1)
            zero_rows = zero_rows[norms[zero_rows] == 0.0]
        directions = normals / norms[:, None]
        return directions[0] if size is None else directions

    def sample_radial_t(self, nu: float, d: int, stream: RandomStream, count: int) -> np.ndarray:
        """R_d with R_d^2 / d ~ F(d, nu), built from two Gamma variates"""
        numerator = stream.gamma(0.5 * d, 2.0, count) / d
        denominator = stream.gamma(0.5 * nu, 2.0, count) / nu
        return np.sqrt(d * numerator / denominator)

    def sample_elliptical_t_vector(self, chol, nu: float, d: int, stream: RandomStream,
                                   size: Optional[int] = None) -> np.ndarray:
        """R_d L U with U uniform on the sphere: a t_nu(0, L L^T) vector"""
        if not nu > 0:
            raise DomainError(f"Elliptical t requires nu > 0, got {nu}")
        if d != chol.dimension:
            raise DimensionMismatch(f"Requested dimension {d} but the factor is {chol.dimension}x{chol.dimension}")
        count = 1 if size is None else size
        directions = self.sample_sphere_uniform(d, stream, count)
        radii = self.sample_radial_t(nu, d, stream, count)
        values = radii[:, None] * (directions @ chol.lower.T)
        return values[0] if size is None else values


# Global sampler service instance
sampler_service = SamplerService()
