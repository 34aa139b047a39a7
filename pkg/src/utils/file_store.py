"""
File store for sites, correlation matrices, simulation tables, reports and metadata
All outputs resolve inside the run's output directory
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Any, Sequence

import numpy as np
import pandas as pd

from src.models.errors import ConfigError
from src.models.models import SiteSet

logger = logging.getLogger(__name__)


def read_sites(path) -> SiteSet:
    """Sites CSV with header id,x1,...,xp"""
    frame = pd.read_csv(path, dtype={'id': str}, encoding='utf-8')
    if frame.columns[0] != 'id':
        raise ConfigError(f"Sites file {path} must start with an 'id' column")
    coordinate_columns = [c for c in frame.columns[1:]]
    expected = [f'x{i + 1}' for i in range(len(coordinate_columns))]
    if not coordinate_columns or coordinate_columns != expected:
        raise ConfigError(f"Sites file {path} must have columns id,{','.join(expected) or 'x1'}")
    coordinates = frame[coordinate_columns].to_numpy(dtype=float)
    logger.info(f"Loaded {len(frame)} sites in R^{len(coordinate_columns)} from {path}")
    return SiteSet(coordinates, ids=frame['id'].tolist())


def read_matrix(path) -> np.ndarray:
    """Headerless CSV of d rows x d columns"""
    matrix = pd.read_csv(path, header=None, encoding='utf-8').to_numpy(dtype=float)
    if matrix.shape[0] != matrix.shape[1]:
        raise ConfigError(f"Matrix file {path} is {matrix.shape[0]}x{matrix.shape[1]}, expected square")
    return matrix


def read_json(path) -> Dict[str, Any]:
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


def output_path(output_dir, name: str) -> Path:
    """Path of an output file, refusing anything that escapes output_dir"""
    root = Path(output_dir).resolve()
    target = (root / name).resolve()
    if root != target.parent:
        raise ConfigError(f"Output name {name!r} escapes the output directory {root}")
    root.mkdir(parents=True, exist_ok=True)
    return target


def write_json(path, data: Dict[str, Any]) -> Path:
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(data, f, indent=2)
        f.write('\n')
    logger.info(f"Wrote {path}")
    return Path(path)


def write_table(path, rows: List[Dict[str, Any]], columns: Sequence[str] = None) -> Path:
    frame = pd.DataFrame(rows, columns=columns)
    frame.to_csv(path, index=False, lineterminator='\n')
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return Path(path)


def write_replicates(path, replicates) -> Path:
    """One row per replicate: replicate, points_used, truncated, z_1..z_d"""
    d = replicates[0].values.size if replicates else 0
    frame = pd.DataFrame(
        np.vstack([r.values for r in replicates]) if replicates else np.empty((0, d)),
        columns=[f'z_{j + 1}' for j in range(d)]
    )
    frame.insert(0, 'truncated', [int(r.truncation_triggered) for r in replicates])
    frame.insert(0, 'points_used', [r.points_used for r in replicates])
    frame.insert(0, 'replicate', list(range(len(replicates))))
    frame.to_csv(path, index=False, lineterminator='\n', float_format='%.17g')
    logger.info(f"Wrote {len(frame)} replicates to {path}")
    return Path(path)
