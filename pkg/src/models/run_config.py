"""
Run configuration for the command-line entry point
Every numeric field is checked against the owning service's preconditions
before any computation starts
"""

import math
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.models.errors import DomainError, InfiniteMoment
from src.models.models import QmcSettings, SpectralSettings

COMMANDS = ('simulate', 'simulate-mv', 'exponent', 'extremal-coeff', 'cdf', 'm-alpha',
            'mda-check', 'mda-sweep', 'feasibility')

SEEDED_COMMANDS = {'simulate', 'simulate-mv', 'mda-check', 'mda-sweep', 'feasibility'}
CORRELATED_COMMANDS = {'simulate', 'simulate-mv', 'exponent', 'extremal-coeff', 'cdf',
                       'mda-check', 'mda-sweep', 'feasibility'}

DEFAULT_TRUNCATION = {'simulate': 6.0, 'feasibility': 6.0, 'simulate-mv': 25.0}

# Fields taken verbatim from the environment, never JSON-decoded
TEXT_FIELDS = ('matrix', 'sites', 'output_dir', 'output_prefix', 'corr', 'construction', 'm_alpha_method')


class RunConfig(BaseModel):
    """Validated configuration of one CLI run"""

    model_config = ConfigDict(extra='forbid')

    command: Literal['simulate', 'simulate-mv', 'exponent', 'extremal-coeff', 'cdf', 'm-alpha',
                     'mda-check', 'mda-sweep', 'feasibility']

    # model
    alpha: Optional[float] = None
    corr: Optional[Literal['exponential', 'gaussian', 'powered_exponential']] = None
    range: Optional[float] = None
    power: Optional[float] = None
    matrix: Optional[str] = None
    rho: Optional[float] = None
    sites: Optional[str] = None
    spectral_nu: Optional[float] = None
    m_alpha_method: Literal['analytic', 'monte_carlo'] = 'analytic'
    m_alpha_samples: int = Field(default=10 ** 6, ge=10 ** 4)

    # spectral settings
    replicates: int = Field(default=1000, ge=1)
    truncation_c: Optional[float] = None
    max_points: int = Field(default=100_000, ge=1)
    seed: Optional[int] = Field(default=None, ge=0, lt=2 ** 64)
    threads: int = Field(default=1, ge=1)

    # evaluation points and MDA settings
    z: Optional[List[List[float]]] = None
    block_size: int = Field(default=10 ** 4, ge=1)
    block_sizes: List[int] = Field(default_factory=lambda: [10, 100, 1000, 10000])
    bias_allowance: float = Field(default=0.01, ge=0)
    construction: Literal['variance_mixture', 'radial'] = 'variance_mixture'
    alphas: List[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0, 5.0, 10.0])

    # QMC settings
    qmc_points: int = 2 ** 13
    qmc_randomizations: int = 12
    qmc_target_error: float = 5e-5
    qmc_max_points: int = 2 ** 17
    qmc_seed: int = Field(default=0, ge=0, lt=2 ** 64)

    # outputs
    output_dir: str = '.'
    output_prefix: Optional[str] = None

    @field_validator('alpha', 'spectral_nu', 'range', 'truncation_c')
    @classmethod
    def _positive_finite(cls, value, info):
        if value is not None and not (math.isfinite(value) and value > 0):
            raise ValueError(f"{info.field_name} must be a positive finite number")
        return value

    @field_validator('rho')
    @classmethod
    def _open_unit_interval(cls, value):
        if value is not None and not -1.0 < value < 1.0:
            raise ValueError('rho must lie strictly inside (-1, 1)')
        return value

    @field_validator('alphas')
    @classmethod
    def _positive_alphas(cls, values):
        if not values or any(not (math.isfinite(v) and v > 0) for v in values):
            raise ValueError('alphas must be a non-empty list of positive numbers')
        return values

    @field_validator('block_sizes')
    @classmethod
    def _positive_block_sizes(cls, values):
        if not values or any(v < 1 for v in values):
            raise ValueError('block_sizes must be a non-empty list of positive integers')
        return values

    @field_validator('output_prefix')
    @classmethod
    def _plain_prefix(cls, value):
        if value is not None and (not value or '/' in value or '\\' in value or value in ('.', '..')):
            raise ValueError('output_prefix must be a plain file name without path separators')
        return value

    @model_validator(mode='after')
    def _command_requirements(self):
        command = self.command
        if command != 'feasibility' and self.alpha is None:
            raise ValueError(f"alpha is required for {command}")
        if command in SEEDED_COMMANDS and self.seed is None:
            raise ValueError(f"seed is required for {command} (no silent nondeterminism)")
        if command == 'm-alpha' and self.m_alpha_method == 'monte_carlo' and self.seed is None:
            raise ValueError('seed is required for a Monte Carlo m_alpha')

        if command in ('simulate-mv',) and self.spectral_nu is None:
            raise ValueError('spectral_nu is required for simulate-mv')
        if self.spectral_nu is not None and self.alpha is not None and self.alpha >= self.spectral_nu:
            raise ValueError(f"{InfiniteMoment.code}: alpha={self.alpha} must be below spectral_nu={self.spectral_nu}")
        if command == 'm-alpha' and self.spectral_nu is None and self.m_alpha_method != 'analytic':
            raise ValueError('Gaussian spectral fields only support the analytic m_alpha')

        if command in CORRELATED_COMMANDS:
            self._check_correlation_source()
        if command in ('exponent', 'cdf'):
            if not self.z:
                raise ValueError(f"z is required for {command}")
            for point in self.z:
                if any(v < 0 or math.isnan(v) for v in point) or (command == 'cdf' and any(v <= 0 for v in point)):
                    raise ValueError(f"z={point} outside the domain of {command}")
        if command in ('mda-check', 'mda-sweep') and self.z:
            if any(any(not v > 0 for v in point) for point in self.z):
                raise ValueError('MDA grid points must be strictly positive')

        try:
            self.qmc_settings()
            if command in ('simulate', 'simulate-mv', 'feasibility'):
                self.spectral_settings()
        except DomainError as error:
            raise ValueError(error.message)
        return self

    def _check_correlation_source(self):
        sources = [self.corr is not None, self.matrix is not None, self.rho is not None]
        if sum(sources) != 1:
            raise ValueError('Give exactly one correlation source: corr (with range), matrix or rho')
        if self.corr is not None:
            if self.range is None:
                raise ValueError(f"range is required for the {self.corr} family")
            if self.corr == 'powered_exponential' and self.power is None:
                raise ValueError('power is required for the powered_exponential family')
            if self.sites is None:
                raise ValueError('sites is required with a parametric correlation family')
        if self.power is not None and self.corr != 'powered_exponential':
            raise ValueError('power applies to the powered_exponential family only')

    @property
    def prefix(self) -> str:
        return self.output_prefix or self.command.replace('-', '_')

    def spectral_settings(self) -> SpectralSettings:
        truncation = self.truncation_c if self.truncation_c is not None else DEFAULT_TRUNCATION.get(self.command, 6.0)
        return SpectralSettings(truncation_c=truncation, max_points=self.max_points,
                                replicates=self.replicates, seed=self.seed or 0)

    def qmc_settings(self) -> QmcSettings:
        return QmcSettings(n_points=self.qmc_points, randomizations=self.qmc_randomizations,
                           target_error=self.qmc_target_error, max_points=self.qmc_max_points,
                           seed=self.qmc_seed)

    def to_file_dict(self):
        """Config file form; feeding it back through --config reproduces the run"""
        return self.model_dump(mode='json', exclude_none=True)
