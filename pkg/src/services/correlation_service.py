"""
Correlation service
Builds and validates the correlation matrices Sigma* used by every other service
"""

import logging

import numpy as np
from scipy.spatial.distance import pdist, squareform

from src.models.errors import DimensionMismatch, DegenerateCorrelation
from src.models.result_models import ValidationOutcome

logger = logging.getLogger(__name__)


class CorrelationService:
    """Service to turn correlation specifications into checked matrices"""

    def __init__(self):
        self.symmetry_tolerance = 1e-12
        self.diagonal_tolerance = 1e-12
        self.eigenvalue_floor = -1e-10

    def build_correlation_matrix(self, spec, sites) -> np.ndarray:
        """
        Correlation matrix of a specification over a site set

        Args:
            spec: CorrelationSpec (parametric or explicit)
            sites: SiteSet; for explicit specs only its size is used

        Returns:
            d x d correlation matrix passing validate_correlation_matrix
        """
        d = len(sites)
        if spec.is_parametric:
            lags = squareform(pdist(sites.coordinates)) if d > 1 else np.zeros((1, 1))
            matrix = np.asarray(spec.correlation_at(lags), dtype=float)
            np.fill_diagonal(matrix, 1.0)
        else:
            if spec.matrix.shape[0] != d:
                raise DimensionMismatch(
                    f"Explicit correlation matrix is {spec.matrix.shape[0]}x{spec.matrix.shape[0]} but there are {d} sites"
                )
            matrix = np.array(spec.matrix, dtype=float)

        off_diagonal = matrix[~np.eye(d, dtype=bool)]
        if off_diagonal.size and np.max(np.abs(off_diagonal)) >= 1.0:
            raise DegenerateCorrelation(
                'Correlation of magnitude 1 between distinct sites; sites too close for the correlation range'
            )

        outcome = self.validate_correlation_matrix(matrix)
        if not outcome.passed:
            raise DegenerateCorrelation(f"Correlation matrix rejected: {outcome.reason}")
        logger.debug(f"Built {d}x{d} correlation matrix ({spec.variant})")
        return matrix

    def validate_correlation_matrix(self, m) -> ValidationOutcome:
        """Check symmetry, unit diagonal, |off-diagonal| < 1 and positive semi-definiteness"""
        matrix = np.asarray(m, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            return ValidationOutcome(False, 'Matrix is not square', {'shape': list(matrix.shape)})
        d = matrix.shape[0]
        if not np.all(np.isfinite(matrix)):
            return ValidationOutcome(False, 'Matrix has non-finite entries')

        asymmetry = float(np.max(np.abs(matrix - matrix.T))) if d else 0.0
        if asymmetry > self.symmetry_tolerance:
            return ValidationOutcome(False, 'Matrix is not symmetric', {'max_asymmetry': asymmetry})

        diagonal_error = float(np.max(np.abs(np.diag(matrix) - 1.0))) if d else 0.0
        if diagonal_error > self.diagonal_tolerance:
            return ValidationOutcome(False, 'Diagonal entries are not 1', {'max_diagonal_error': diagonal_error})

        off_diagonal = matrix[~np.eye(d, dtype=bool)]
        if off_diagonal.size and np.max(np.abs(off_diagonal)) >= 1.0:
            index = np.unravel_index(np.argmax(np.abs(matrix - np.eye(d))), matrix.shape)
            return ValidationOutcome(
                False, 'Off-diagonal entry outside (-1, 1)',
                {'row': int(index[0]), 'column': int(index[1]), 'value': float(matrix[index])}
            )

        # Smallest eigenvalue >= floor iff m - floor * I admits a Cholesky factor
        try:
            np.linalg.cholesky(matrix - self.eigenvalue_floor * np.eye(d))
        except np.linalg.LinAlgError:
            return ValidationOutcome(
                False, 'Matrix is not positive semi-definite',
                {'eigenvalue_floor': self.eigenvalue_floor}
            )
        return ValidationOutcome(True)

    def require_valid(self, m) -> np.ndarray:
        """m as a float array, or DegenerateCorrelation naming the failed check"""
        matrix = np.atleast_2d(np.asarray(m, dtype=float))
        outcome = self.validate_correlation_matrix(matrix)
        if not outcome.passed:
            raise DegenerateCorrelation(f"Correlation matrix rejected: {outcome.reason}")
        return matrix


# Global correlation service instance
correlation_service = CorrelationService()
