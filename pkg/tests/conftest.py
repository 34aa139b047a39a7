import math

import numpy as np
import pytest

from src.models.models import QmcSettings
from src.services.sampler_service import RandomStream
from src.utils.numerics import cholesky_with_jitter

THETA_INDEPENDENT_ALPHA_1 = 1.0 + 0.5 * math.sqrt(2.0)


@pytest.fixture
def stream():
    return RandomStream(20240517, 0)


@pytest.fixture
def bivariate_factor():
    return cholesky_with_jitter(np.array([[1.0, 0.5], [0.5, 1.0]]))


@pytest.fixture
def fast_qmc():
    return QmcSettings(n_points=2 ** 10, randomizations=8, target_error=1e-3, max_points=2 ** 12, seed=7)


@pytest.fixture
def sites_csv(tmp_path):
    """Writes a sites file and returns its path"""

    def write(coordinates, name='sites.csv'):
        coordinates = np.atleast_2d(np.asarray(coordinates, dtype=float))
        header = ','.join(['id'] + [f'x{i + 1}' for i in range(coordinates.shape[1])])
        lines = [header] + [
            ','.join([f's{row + 1}'] + [repr(float(v)) for v in coordinates[row]])
            for row in range(coordinates.shape[0])
        ]
        path = tmp_path / name
        path.write_text('\n'.join(lines) + '\n', encoding='utf-8')
        return path

    return write
