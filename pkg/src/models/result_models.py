"""
Result models for simulations, dependence evaluations and MDA reports
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Dict, Any, List

import numpy as np


def _json_float(value: float):
    """JSON has no infinity; encode it as the string 'inf'"""
    value = float(value)
    if math.isinf(value):
        return 'inf' if value > 0 else '-inf'
    return value


@dataclass(frozen=True)
class ValidationOutcome:
    """Pass/fail verdict of a matrix check with a diagnostic"""
    passed: bool
    reason: Optional[str] = None
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {'passed': self.passed, 'reason': self.reason, 'details': self.details}


@dataclass(frozen=True, eq=False)
class FieldReplicate:
    """One replicate of the spectral construction (alpha-Frechet margins)

    Values are strictly positive unless the point cap stopped the replicate
    before every site received a positive spectral value. Such sites keep the
    value 0 and the replicate is truncation_triggered.
    """
    values: np.ndarray
    points_used: int
    truncation_triggered: bool

    @property
    def unreached_sites(self) -> int:
        return int(np.count_nonzero(self.values <= 0.0))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'values': self.values.tolist(),
            'points_used': self.points_used,
            'truncation_triggered': self.truncation_triggered,
            'unreached_sites': self.unreached_sites
        }


@dataclass(frozen=True)
class MAlphaEstimate:
    """m_alpha = E[(X+)^alpha] with its provenance"""
    value: float
    std_error: float = 0.0
    method: str = 'analytic'

    def __post_init__(self):
        if self.method not in ('analytic', 'monte_carlo'):
            raise ValueError(f"Unknown m_alpha method: {self.method}")
        if self.method == 'analytic' and self.std_error != 0.0:
            raise ValueError('Analytic m_alpha carries no standard error')
        if not self.value > 0:
            raise ValueError('m_alpha must be positive')

    def to_dict(self) -> Dict[str, Any]:
        return {'value': self.value, 'std_error': self.std_error, 'method': self.method}


@dataclass(frozen=True)
class MvtCdfResult:
    """Multivariate t probability with its QMC error estimate"""
    value: float
    error_estimate: float
    points_used: int
    budget_exceeded: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            'value': self.value,
            'error_estimate': self.error_estimate,
            'points_used': self.points_used,
            'budget_exceeded': self.budget_exceeded
        }


@dataclass(frozen=True)
class ExponentValue:
    """Value of the dependence function M (possibly +inf)"""
    value: float
    error_estimate: float = 0.0
    points_used: int = 0
    budget_exceeded: bool = False

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.value)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'value': _json_float(self.value),
            'error_estimate': self.error_estimate,
            'points_used': self.points_used,
            'budget_exceeded': self.budget_exceeded
        }


@dataclass(frozen=True)
class ProbabilityValue:
    """A probability with a propagated error estimate"""
    value: float
    error_estimate: float = 0.0
    points_used: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {'value': self.value, 'error_estimate': self.error_estimate, 'points_used': self.points_used}


@dataclass
class MdaReport:
    """Empirical vs theoretical extremal t CDF on an evaluation grid"""
    block_size: int
    replicates: int
    grid: List[List[float]]
    empirical_cdf: List[float]
    theoretical_cdf: List[float]
    theoretical_error: List[float]
    binomial_3se: List[float]
    bias_allowance: float
    nu: float = 0.0
    construction: str = 'variance_mixture'

    @property
    def gaps(self) -> List[float]:
        return [e - t for e, t in zip(self.empirical_cdf, self.theoretical_cdf)]

    @property
    def max_abs_gap(self) -> float:
        return max(abs(g) for g in self.gaps)

    @property
    def bands(self) -> List[float]:
        return [se + qe + self.bias_allowance for se, qe in zip(self.binomial_3se, self.theoretical_error)]

    @property
    def point_passes(self) -> List[bool]:
        return [abs(g) <= b for g, b in zip(self.gaps, self.bands)]

    @property
    def passed(self) -> bool:
        return all(self.point_passes)

    def grid_rows(self) -> List[Dict[str, Any]]:
        """Rows of the grid table: z, empirical, theoretical, gap, band, pass"""
        rows = []
        for z, emp, theo, gap, band, ok in zip(self.grid, self.empirical_cdf, self.theoretical_cdf,
                                               self.gaps, self.bands, self.point_passes):
            rows.append({
                'z': ' '.join(repr(float(v)) for v in z),
                'empirical': emp,
                'theoretical': theo,
                'gap': gap,
                'band': band,
                'pass': ok
            })
        return rows

    def to_dict(self) -> Dict[str, Any]:
        return {
            'nu': self.nu,
            'construction': self.construction,
            'block_size': self.block_size,
            'replicates': self.replicates,
            'grid': self.grid,
            'empirical_cdf': self.empirical_cdf,
            'theoretical_cdf': self.theoretical_cdf,
            'theoretical_error': self.theoretical_error,
            'binomial_3se': self.binomial_3se,
            'bias_allowance': self.bias_allowance,
            'max_abs_gap': self.max_abs_gap,
            'passed': self.passed
        }
