"""
Core domain types for extremal t models
Tail index, correlation specification, site sets and run settings
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Dict, Any, List

import numpy as np

from src.models.errors import DomainError, DegenerateCorrelation

CORRELATION_FAMILIES = ['exponential', 'gaussian', 'powered_exponential']
DUPLICATE_SITES = 'Sites must be pairwise distinct'


def _raise_on_errors(kind: str, errors: Dict[str, str]):
    if errors:
        details = '; '.join(f"{name}: {message}" for name, message in errors.items())
        raise DomainError(f"Invalid {kind}: {details}")


def _frozen_array(values, ndim: int) -> np.ndarray:
    array = np.array(values, dtype=float, copy=True)
    if array.ndim != ndim:
        raise DomainError(f"Expected a {ndim}-dimensional array, got shape {array.shape}")
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class TailIndex:
    """Tail index alpha, identical to the general degree of freedom nu"""
    alpha: float

    def __post_init__(self):
        _raise_on_errors('tail index', self.validate())

    def validate(self) -> Dict[str, str]:
        errors = {}
        try:
            value = float(self.alpha)
        except (TypeError, ValueError):
            return {'alpha': 'Tail index must be a real number'}
        if not math.isfinite(value):
            errors['alpha'] = 'Tail index must be finite'
        elif value <= 0:
            errors['alpha'] = 'Tail index must be positive'
        return errors

    def __float__(self) -> float:
        return float(self.alpha)

    def to_dict(self) -> Dict[str, Any]:
        return {'alpha': float(self.alpha)}

    @classmethod
    def from_value(cls, value) -> 'TailIndex':
        if isinstance(value, TailIndex):
            return value
        return cls(alpha=float(value))


@dataclass(frozen=True, eq=False)
class CorrelationSpec:
    """Either a parametric isotropic correlation function or an explicit matrix"""
    variant: str
    family: Optional[str] = None
    range: Optional[float] = None
    power: Optional[float] = None
    matrix: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.matrix is not None:
            object.__setattr__(self, 'matrix', _frozen_array(self.matrix, 2))
        _raise_on_errors('correlation specification', self.validate())

    @classmethod
    def parametric(cls, family: str, range: float, power: Optional[float] = None) -> 'CorrelationSpec':
        return cls(variant='parametric', family=family, range=range, power=power)

    @classmethod
    def explicit(cls, matrix) -> 'CorrelationSpec':
        return cls(variant='explicit', matrix=matrix)

    @property
    def is_parametric(self) -> bool:
        return self.variant == 'parametric'

    def validate(self) -> Dict[str, str]:
        errors = {}
        if self.variant == 'parametric':
            if self.family not in CORRELATION_FAMILIES:
                errors['family'] = f'Family must be one of: {", ".join(CORRELATION_FAMILIES)}'
            if self.range is None or not math.isfinite(self.range) or self.range <= 0:
                errors['range'] = 'Range must be a positive finite number'
            if self.family == 'powered_exponential':
                if self.power is None or not (0 < self.power <= 2):
                    errors['power'] = 'Power must lie in (0, 2]'
            elif self.power is not None:
                errors['power'] = 'Power applies to the powered_exponential family only'
        elif self.variant == 'explicit':
            if self.matrix is None:
                errors['matrix'] = 'Explicit correlation requires a matrix'
            elif self.matrix.shape[0] != self.matrix.shape[1] or self.matrix.shape[0] == 0:
                errors['matrix'] = f'Matrix must be square and non-empty, got shape {self.matrix.shape}'
            else:
                # Full checks (symmetry, PSD) are done by validate_correlation_matrix
                from src.services.correlation_service import correlation_service
                outcome = correlation_service.validate_correlation_matrix(self.matrix)
                if not outcome.passed:
                    errors['matrix'] = outcome.reason
        else:
            errors['variant'] = 'Variant must be parametric or explicit'
        return errors

    def correlation_at(self, lag):
        """Correlation at Euclidean lag h for parametric families"""
        if not self.is_parametric:
            raise DomainError('Explicit correlation matrices have no lag function')
        h = np.asarray(lag, dtype=float) / self.range
        if self.family == 'exponential':
            return np.exp(-h)
        if self.family == 'gaussian':
            return np.exp(-h ** 2)
        return np.exp(-h ** self.power)

    def to_dict(self) -> Dict[str, Any]:
        if self.is_parametric:
            return {'variant': 'parametric', 'family': self.family, 'range': self.range, 'power': self.power}
        return {'variant': 'explicit', 'matrix': self.matrix.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CorrelationSpec':
        if data.get('variant') == 'explicit':
            return cls.explicit(data['matrix'])
        return cls.parametric(data['family'], data['range'], data.get('power'))


@dataclass(frozen=True, eq=False)
class SiteSet:
    """Ordered, duplicate-free sites in R^p"""
    coordinates: np.ndarray
    ids: List[str] = field(default_factory=list)

    def __post_init__(self):
        coordinates = np.asarray(self.coordinates, dtype=float)
        if coordinates.ndim == 1:
            coordinates = coordinates[:, None]
        object.__setattr__(self, 'coordinates', _frozen_array(coordinates, 2))
        if not self.ids:
            object.__setattr__(self, 'ids', [str(i + 1) for i in range(coordinates.shape[0])])
        errors = self.validate()
        if errors.get('coordinates') == DUPLICATE_SITES:
            # Coincident sites would have correlation 1
            raise DegenerateCorrelation(f"Invalid site set: {DUPLICATE_SITES}")
        _raise_on_errors('site set', errors)

    def validate(self) -> Dict[str, str]:
        errors = {}
        if self.coordinates.shape[0] == 0 or self.coordinates.shape[1] == 0:
            errors['coordinates'] = 'At least one site with at least one coordinate is required'
            return errors
        if not np.all(np.isfinite(self.coordinates)):
            errors['coordinates'] = 'All coordinates must be finite'
        elif np.unique(self.coordinates, axis=0).shape[0] != self.coordinates.shape[0]:
            errors['coordinates'] = DUPLICATE_SITES
        if len(self.ids) != self.coordinates.shape[0]:
            errors['ids'] = 'One id per site is required'
        return errors

    def __len__(self) -> int:
        return self.coordinates.shape[0]

    @property
    def dimension(self) -> int:
        return self.coordinates.shape[1]

    def permuted(self, order) -> 'SiteSet':
        order = list(order)
        return SiteSet(self.coordinates[order], [self.ids[i] for i in order])

    def to_dict(self) -> Dict[str, Any]:
        return {'ids': list(self.ids), 'coordinates': self.coordinates.tolist()}


@dataclass(frozen=True)
class ExtremalTModel:
    """Extremal t dependence: tail index plus correlation specification"""
    alpha: TailIndex
    correlation: CorrelationSpec

    def __post_init__(self):
        if not isinstance(self.alpha, TailIndex):
            object.__setattr__(self, 'alpha', TailIndex.from_value(self.alpha))

    def to_dict(self) -> Dict[str, Any]:
        return {'alpha': float(self.alpha), 'correlation': self.correlation.to_dict()}


@dataclass(frozen=True)
class SpectralSettings:
    """Truncation and replication settings for the spectral simulator"""
    truncation_c: float = 6.0
    max_points: int = 100_000
    replicates: int = 1
    seed: int = 0

    def __post_init__(self):
        _raise_on_errors('spectral settings', self.validate())

    def validate(self) -> Dict[str, str]:
        errors = {}
        if not (math.isfinite(self.truncation_c) and self.truncation_c > 0):
            errors['truncation_c'] = 'Truncation constant must be positive'
        if self.max_points < 1:
            errors['max_points'] = 'At least one Poisson point is required'
        if self.replicates < 1:
            errors['replicates'] = 'At least one replicate is required'
        if not (0 <= self.seed < 2 ** 64):
            errors['seed'] = 'Seed must be a 64-bit unsigned integer'
        return errors

    def to_dict(self) -> Dict[str, Any]:
        return {
            'truncation_c': self.truncation_c,
            'max_points': self.max_points,
            'replicates': self.replicates,
            'seed': self.seed
        }


@dataclass(frozen=True)
class QmcSettings:
    """Randomized quasi-Monte Carlo settings for multivariate t probabilities"""
    n_points: int = 2 ** 13
    randomizations: int = 12
    target_error: float = 5e-5
    max_points: int = 2 ** 17
    seed: int = 0

    def __post_init__(self):
        _raise_on_errors('QMC settings', self.validate())

    def validate(self) -> Dict[str, str]:
        errors = {}
        if self.n_points < 2 or self.n_points & (self.n_points - 1):
            errors['n_points'] = 'Points per randomization must be a power of two'
        if self.max_points < self.n_points:
            errors['max_points'] = 'Point budget must be at least n_points'
        if self.randomizations < 2:
            errors['randomizations'] = 'At least two randomizations are required for an error estimate'
        if not self.target_error > 0:
            errors['target_error'] = 'Target error must be positive'
        if not (0 <= self.seed < 2 ** 64):
            errors['seed'] = 'Seed must be a 64-bit unsigned integer'
        return errors

    def to_dict(self) -> Dict[str, Any]:
        return {
            'n_points': self.n_points,
            'randomizations': self.randomizations,
            'target_error': self.target_error,
            'max_points': self.max_points,
            'seed': self.seed
        }
