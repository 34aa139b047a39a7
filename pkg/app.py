"""
xtproc command-line entry point
Parses a run configuration, dispatches to the services and writes results
with a metadata sidecar into the output directory
"""

import argparse
import json
import logging
import platform
import sys
import time
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import pydantic
import scipy
from pydantic import ValidationError

from src import __version__
from src.config.settings import settings
from src.models.errors import XtprocError, ConfigError
from src.models.models import CorrelationSpec, SiteSet
from src.models.run_config import RunConfig, COMMANDS, TEXT_FIELDS
from src.services.correlation_service import correlation_service
from src.services.dependence_service import dependence_engine
from src.services.mda_service import mda_harness
from src.services.sampler_service import GENERATOR_NAME, RandomStream
from src.services.spectral_service import spectral_simulator, M_ALPHA_STREAM_ID
from src.utils import file_store

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR')


# =====================
# Configuration
# =====================

def build_parser() -> argparse.ArgumentParser:
    """Flags default to SUPPRESS so that only flags actually given override file and env values"""
    parser = argparse.ArgumentParser(
        prog='xtproc',
        description='Simulate extremal t max-stable processes and evaluate their dependence functions.',
        argument_default=argparse.SUPPRESS
    )
    parser.add_argument('command', nargs='?', metavar='COMMAND', help=f"One of: {', '.join(COMMANDS)}")
    parser.add_argument('--config', help='JSON config file (or a .meta.json sidecar of an earlier run)')
    parser.add_argument('--log-level', choices=LOG_LEVELS, help='Logging level (default XTPROC_LOG_LEVEL or INFO)')

    model = parser.add_argument_group('model')
    model.add_argument('--alpha', type=float, help='Tail index / degrees of freedom')
    model.add_argument('--corr', choices=('exponential', 'gaussian', 'powered_exponential'),
                       help='Parametric correlation family (needs --range and --sites)')
    model.add_argument('--range', type=float, help='Correlation range')
    model.add_argument('--power', type=float, help='Power of the powered_exponential family, in (0, 2]')
    model.add_argument('--matrix', help='Headerless CSV correlation matrix')
    model.add_argument('--rho', type=float, help='Correlation of a bivariate model')
    model.add_argument('--sites', help='Sites CSV with header id,x1,...,xp')
    model.add_argument('--spectral-nu', dest='spectral_nu', type=float,
                       help='Degrees of freedom of the elliptical t spectral vectors')
    model.add_argument('--m-alpha-method', dest='m_alpha_method', choices=('analytic', 'monte_carlo'))
    model.add_argument('--m-alpha-samples', dest='m_alpha_samples', type=int)

    simulation = parser.add_argument_group('simulation')
    simulation.add_argument('--replicates', type=int)
    simulation.add_argument('--truncation-c', dest='truncation_c', type=float)
    simulation.add_argument('--max-points', dest='max_points', type=int)
    simulation.add_argument('--seed', type=int, help='Mandatory for every Monte Carlo command')
    simulation.add_argument('--threads', type=int, help='Replicate-level worker count')

    evaluation = parser.add_argument_group('evaluation')
    evaluation.add_argument('--z', action='append', nargs='+', type=float,
                            help='Evaluation point; repeat the flag for several points')
    evaluation.add_argument('--block-size', dest='block_size', type=int)
    evaluation.add_argument('--block-sizes', dest='block_sizes', nargs='+', type=int)
    evaluation.add_argument('--bias-allowance', dest='bias_allowance', type=float)
    evaluation.add_argument('--construction', choices=('variance_mixture', 'radial'))
    evaluation.add_argument('--alphas', nargs='+', type=float)

    qmc = parser.add_argument_group('quasi-Monte Carlo')
    qmc.add_argument('--qmc-points', dest='qmc_points', type=int)
    qmc.add_argument('--qmc-randomizations', dest='qmc_randomizations', type=int)
    qmc.add_argument('--qmc-target-error', dest='qmc_target_error', type=float)
    qmc.add_argument('--qmc-max-points', dest='qmc_max_points', type=int)
    qmc.add_argument('--qmc-seed', dest='qmc_seed', type=int)

    output = parser.add_argument_group('output')
    output.add_argument('--output-dir', dest='output_dir')
    output.add_argument('--output-prefix', dest='output_prefix')
    return parser


def config_from_args(flags: Dict[str, Any]) -> RunConfig:
    """Merge config file < XTPROC_* environment < flags and validate"""
    flags = dict(flags)
    config_path = flags.pop('config', None)
    flags.pop('log_level', None)

    values: Dict[str, Any] = {}
    if config_path:
        try:
            data = file_store.read_json(config_path)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Cannot read config file {config_path}: {str(e)}")
        # A metadata sidecar carries the run config under 'config'
        if isinstance(data.get('config'), dict):
            data = data['config']
        values.update(data)
    fields = [name for name in RunConfig.model_fields if name != 'command']
    values.update(settings.env_overrides(fields, TEXT_FIELDS))
    values.update(flags)

    try:
        return RunConfig(**values)
    except ValidationError as e:
        raise ConfigError(_describe_validation_error(e))


def parse_config(argv: Optional[List[str]] = None) -> RunConfig:
    return config_from_args(vars(build_parser().parse_args(argv)))


def _describe_validation_error(error: ValidationError) -> str:
    problems = []
    for item in error.errors():
        field = '.'.join(str(part) for part in item['loc']) or 'config'
        message = item['msg'].removeprefix('Value error, ')
        problems.append(f"{field}: {message}")
    return '; '.join(problems)


# =====================
# Input loading
# =====================

def load_correlation(config: RunConfig) -> Tuple[np.ndarray, Optional[SiteSet]]:
    """Correlation matrix of the run plus its sites, when a sites file was given"""
    try:
        sites = file_store.read_sites(config.sites) if config.sites else None
        if config.corr is not None:
            spec = CorrelationSpec.parametric(config.corr, config.range, config.power)
            return correlation_service.build_correlation_matrix(spec, sites), sites
        if config.rho is not None:
            matrix = np.array([[1.0, config.rho], [config.rho, 1.0]])
        else:
            matrix = file_store.read_matrix(config.matrix)
    except (OSError, ValueError) as e:
        raise ConfigError(f"Cannot read model inputs: {str(e)}")

    if sites is not None:
        return correlation_service.build_correlation_matrix(CorrelationSpec.explicit(matrix), sites), sites
    return correlation_service.require_valid(matrix), None


def _m_alpha(config: RunConfig):
    stream = RandomStream(config.seed, M_ALPHA_STREAM_ID) if config.seed is not None else None
    return spectral_simulator.resolve_m_alpha(config.alpha, config.spectral_nu, config.m_alpha_method,
                                              config.m_alpha_samples, stream)


def _require_point_dimension(config: RunConfig, d: int):
    for z in config.z or []:
        if len(z) != d:
            raise ConfigError(f"z={z} has {len(z)} coordinates but the model has {d} sites")


def _format_value(value: float, error: float) -> str:
    if np.isinf(value):
        return 'inf'
    return f"{value:.6f} ± {error:.1e}"


# =====================
# Command handlers
# =====================
# Each handler returns (exit status, output file names, extra metadata)

def handle_simulate(config: RunConfig):
    corr, sites = load_correlation(config)
    replicates = spectral_simulator.simulate_matrix_replicates(config.alpha, corr, config.spectral_settings(),
                                                               config.threads)
    name = f"{config.prefix}.csv"
    file_store.write_replicates(file_store.output_path(config.output_dir, name), replicates)
    truncated = sum(1 for r in replicates if r.truncation_triggered)
    print(f"{len(replicates)} replicates at {corr.shape[0]} sites written to {name} ({truncated} truncated)")
    meta = {
        'model': {'alpha': config.alpha, 'correlation_matrix': corr.tolist(),
                  'site_ids': list(sites.ids) if sites is not None else None},
        'settings': config.spectral_settings().to_dict(),
        'm_alpha': spectral_simulator.resolve_m_alpha(config.alpha).to_dict(),
        'truncated_replicates': truncated
    }
    return EXIT_OK, [name], meta


def handle_simulate_mv(config: RunConfig):
    corr, _ = load_correlation(config)
    m_alpha = _m_alpha(config)
    replicates = spectral_simulator.simulate_mv_replicates(config.alpha, config.spectral_nu, corr, m_alpha,
                                                           config.spectral_settings(), config.threads)
    name = f"{config.prefix}.csv"
    file_store.write_replicates(file_store.output_path(config.output_dir, name), replicates)
    truncated = sum(1 for r in replicates if r.truncation_triggered)
    print(f"{len(replicates)} extremal t vectors of dimension {corr.shape[0]} written to {name} "
          f"({truncated} truncated)")
    meta = {
        'model': {'alpha': config.alpha, 'spectral_nu': config.spectral_nu, 'correlation_matrix': corr.tolist()},
        'settings': config.spectral_settings().to_dict(),
        'm_alpha': m_alpha.to_dict(),
        'truncated_replicates': truncated
    }
    return EXIT_OK, [name], meta


def handle_exponent(config: RunConfig):
    corr, _ = load_correlation(config)
    _require_point_dimension(config, corr.shape[0])
    results = []
    for z in config.z:
        value = dependence_engine.exponent_function(z, config.alpha, corr, config.qmc_settings())
        print(_format_value(value.value, value.error_estimate))
        results.append({**value.to_dict(), 'inputs': {'z': z, 'alpha': config.alpha}})
    return _write_results(config, results)


def handle_extremal_coeff(config: RunConfig):
    corr, _ = load_correlation(config)
    value = dependence_engine.extremal_coefficient(config.alpha, corr, config.qmc_settings())
    result = {**value.to_dict(), 'inputs': {'alpha': config.alpha, 'correlation_matrix': corr.tolist()}}
    line = _format_value(value.value, value.error_estimate)
    if corr.shape[0] == 2:
        closed = dependence_engine.bivariate_extremal_coefficient_closed(config.alpha, float(corr[0, 1]))
        result['closed_form'] = closed
        line += f" (closed form {closed:.6f})"
    print(line)
    return _write_results(config, [result])


def handle_cdf(config: RunConfig):
    corr, _ = load_correlation(config)
    _require_point_dimension(config, corr.shape[0])
    results = []
    for z in config.z:
        value = dependence_engine.extremal_t_cdf(z, config.alpha, corr, config.qmc_settings())
        print(_format_value(value.value, value.error_estimate))
        results.append({**value.to_dict(), 'inputs': {'z': z, 'alpha': config.alpha}})
    return _write_results(config, results)


def handle_m_alpha(config: RunConfig):
    m_alpha = _m_alpha(config)
    print(f"{m_alpha.value:.6f}" if m_alpha.method == 'analytic' else _format_value(m_alpha.value, m_alpha.std_error))
    result = {**m_alpha.to_dict(), 'inputs': {'alpha': config.alpha, 'spectral_nu': config.spectral_nu}}
    return _write_results(config, [result])


def handle_mda_check(config: RunConfig):
    corr, _ = load_correlation(config)
    _require_point_dimension(config, corr.shape[0])
    report = mda_harness.run_mda_check(
        config.alpha, corr, config.block_size, config.replicates, config.z, config.qmc_settings(), config.seed,
        threads=config.threads, bias_allowance=config.bias_allowance, construction=config.construction
    )
    report_name, grid_name = f"{config.prefix}.json", f"{config.prefix}_grid.csv"
    file_store.write_json(file_store.output_path(config.output_dir, report_name), report.to_dict())
    file_store.write_table(file_store.output_path(config.output_dir, grid_name), report.grid_rows(),
                           columns=['z', 'empirical', 'theoretical', 'gap', 'band', 'pass'])
    failed = report.point_passes.count(False)
    print(f"max |gap| {report.max_abs_gap:.4f}; {len(report.grid) - failed}/{len(report.grid)} grid points "
          f"within band: {'PASS' if report.passed else 'FAIL'}")
    return (EXIT_OK if report.passed else EXIT_FAILURE), [report_name, grid_name], {'passed': report.passed}


def handle_mda_sweep(config: RunConfig):
    corr, _ = load_correlation(config)
    _require_point_dimension(config, corr.shape[0])
    rows = mda_harness.run_block_size_sweep(
        config.alpha, corr, config.block_sizes, config.replicates, config.z, config.qmc_settings(), config.seed,
        threads=config.threads, bias_allowance=config.bias_allowance, construction=config.construction
    )
    name = f"{config.prefix}.csv"
    file_store.write_table(file_store.output_path(config.output_dir, name), rows,
                           columns=['block_size', 'max_abs_gap', 'passed'])
    for row in rows:
        print(f"n={row['block_size']}: max |gap| {row['max_abs_gap']:.4f}")
    return EXIT_OK, [name], {}


def handle_feasibility(config: RunConfig):
    corr, _ = load_correlation(config)
    rows = spectral_simulator.feasibility_sweep(config.alphas, corr, config.spectral_settings(), config.threads)
    name = f"{config.prefix}.csv"
    file_store.write_table(file_store.output_path(config.output_dir, name), rows,
                           columns=['alpha', 'replicates', 'truncated_fraction', 'mean_points_used', 'max_points_used'])
    for row in rows:
        print(f"alpha={row['alpha']}: truncated {row['truncated_fraction']:.3f}, "
              f"mean points {row['mean_points_used']:.1f}")
    return EXIT_OK, [name], {}


def _write_results(config: RunConfig, results: List[Dict[str, Any]]):
    name = f"{config.prefix}.json"
    file_store.write_json(file_store.output_path(config.output_dir, name), {'results': results})
    return EXIT_OK, [name], {}


HANDLERS = {
    'simulate': handle_simulate,
    'simulate-mv': handle_simulate_mv,
    'exponent': handle_exponent,
    'extremal-coeff': handle_extremal_coeff,
    'cdf': handle_cdf,
    'm-alpha': handle_m_alpha,
    'mda-check': handle_mda_check,
    'mda-sweep': handle_mda_sweep,
    'feasibility': handle_feasibility,
}


# =====================
# Run
# =====================

def versions() -> Dict[str, str]:
    return {
        'xtproc': __version__,
        'python': platform.python_version(),
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'pandas': pd.__version__,
        'pydantic': pydantic.VERSION,
    }


def run(config: RunConfig) -> int:
    """Dispatch a validated config and write its metadata sidecar; returns the exit status"""
    started = time.perf_counter()
    logger.info(f"Running {config.command} (seed={config.seed}, output {config.output_dir})")
    try:
        status, outputs, extra = HANDLERS[config.command](config)
        meta = {
            'command': config.command,
            'config': config.to_file_dict(),
            'versions': versions(),
            'seed': config.seed,
            'generator': GENERATOR_NAME,
            'wall_time_seconds': time.perf_counter() - started,
            'outputs': outputs,
            'exit_status': status,
            **extra
        }
        file_store.write_json(file_store.output_path(config.output_dir, f"{config.prefix}.meta.json"), meta)
    except ConfigError as e:
        report_error(e)
        return EXIT_USAGE
    except XtprocError as e:
        report_error(e)
        return EXIT_FAILURE
    except Exception as e:
        logger.exception(f"Unexpected failure in {config.command}")
        print(json.dumps({'error': 'INTERNAL_ERROR', 'message': str(e)}), file=sys.stderr)
        return EXIT_FAILURE
    logger.info(f"{config.command} finished in {time.perf_counter() - started:.2f}s with status {status}")
    return status


def report_error(error: XtprocError):
    logger.error(f"{error.code}: {error.message}")
    print(json.dumps(error.to_dict()), file=sys.stderr)


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exit_request:
        return EXIT_OK if exit_request.code in (0, None) else EXIT_USAGE

    level = getattr(args, 'log_level', None) or settings.log_level
    logging.basicConfig(level=level if level in LOG_LEVELS else 'INFO', stream=sys.stderr,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        config = config_from_args(vars(args))
    except ConfigError as e:
        report_error(e)
        return EXIT_USAGE
    return run(config)


if __name__ == '__main__':
    sys.exit(main())
