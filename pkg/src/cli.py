"""
feec-heat command-line interface.

Commands:
    convergence   refinement study from a config file; writes CSV + JSON sidecar
    run           one transient solve, prints final-time errors
    mesh-info     simplex counts and first Betti number of a case mesh
    check         structural property suite, PASS/FAIL per property

Exit codes: 0 success, 1 invalid configuration or usage,
2 solver failure, 3 property check failure.
"""
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import click
from pydantic import ValidationError

from src.config import settings
from src.config.run_config import RunConfig, parse_run_config
from src.exceptions import ConfigurationError, FeecHeatError, InvalidParameterError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_PROPERTY = 3


def _configure_logging(level: Optional[str]) -> None:
    level = (level or settings.log_level).upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )


def load_config(path: Optional[str], **overrides: Any) -> RunConfig:
    """
    Config file values (or defaults) with command-line overrides applied.

    Raises:
        ConfigurationError: unreadable file or invalid merged values
    """
    config = parse_run_config(path) if path else RunConfig()
    overrides = {key: value for key, value in overrides.items() if value is not None}
    if not overrides:
        return config
    data = config.model_dump()
    if 'case' in overrides:
        data.pop('dim')
    data.update(overrides)
    try:
        return RunConfig(**data)
    except ValidationError as e:
        error = e.errors()[0]
        raise ConfigurationError(f"{'.'.join(map(str, error['loc']))}: {error['msg']}")


def _require_mode(config: RunConfig, command_mode: str) -> None:
    """A config that names a mode may only drive that command"""
    if config.mode is not None and config.mode != command_mode:
        raise ConfigurationError(f"config is for mode {config.mode!r}, not {command_mode!r}")


def _output_path(config: RunConfig, suffix: str = '') -> Path:
    if config.output:
        return Path(config.output)
    return Path(settings.output_dir) / f"{config.case}_r{config.r}{suffix}.csv"


def _write_outputs(path: Path, csv_text: str, metadata: Dict[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text, encoding='utf-8')
    sidecar = path.with_suffix('.json')
    sidecar.write_text(json.dumps(metadata, indent=2, sort_keys=True) + '\n', encoding='utf-8')
    logger.info(f"Wrote {path} and {sidecar}")


@click.group()
@click.option('--log-level', default=None, help='Override FEEC_HEAT_LOG_LEVEL')
def cli(log_level: Optional[str]) -> None:
    """Mixed finite element solver for the Hodge heat equation"""
    _configure_logging(log_level)


@cli.command()
@click.option('--config', 'config_path', type=click.Path(), default=None, help='key = value run file')
@click.option('--out', default=None, help='CSV output path')
@click.option('--case', default=None, help='Manufactured case name')
def convergence(config_path: Optional[str], out: Optional[str], case: Optional[str]) -> int:
    """Refinement study: spatial, temporal or elliptic"""
    from src.services.convergence import convergence_study, elliptic_study, temporal_study
    from src.services.mms import get_case

    config = load_config(config_path, output=out, case=case)
    _require_mode(config, 'convergence')
    manufactured = get_case(config.case)

    if config.study == 'temporal':
        study = temporal_study(manufactured, config.level, config.dts, config.t_final,
                               config.reference_dt, r=config.r, base_resolution=config.base_resolution)
        csv_text, metadata = study.to_csv(), study.metadata()
        path = _output_path(config, '_temporal')
    else:
        if config.study == 'elliptic':
            table = elliptic_study(manufactured, config.r, config.levels, config.base_resolution, config.pairing)
        else:
            table = convergence_study(manufactured, config.r, config.levels, config.dt, config.t_final,
                                      config.base_resolution, config.pairing, config.initial)
        csv_text, metadata = table.to_csv(), table.metadata()
        path = _output_path(config)

    metadata['config'] = config.model_dump()
    _write_outputs(path, csv_text, metadata)
    click.echo(csv_text, nl=False)
    return EXIT_OK


@cli.command()
@click.option('--config', 'config_path', type=click.Path(), default=None, help='key = value run file')
@click.option('--case', default=None, help='Manufactured case name')
@click.option('--level', type=int, default=None, help='Refinement level')
def run(config_path: Optional[str], case: Optional[str], level: Optional[int]) -> int:
    """One transient solve on a single level"""
    from src.services.convergence import solve_level
    from src.services.mms import get_case

    config = load_config(config_path, case=case, level=level)
    _require_mode(config, 'single-run')
    row = solve_level(get_case(config.case), config.r, config.level, config.dt, config.t_final,
                      config.base_resolution, config.pairing, config.initial)
    click.echo(
        f"level={row.level} h={row.h:.6g} dofs={row.dofs} "
        f"err_sigma={row.err_sigma:.6e} err_dsigma={row.err_dsigma:.6e} "
        f"err_u={row.err_u:.6e} err_du={row.err_du:.6e}"
    )
    return EXIT_OK


@cli.command('mesh-info')
@click.option('--config', 'config_path', type=click.Path(), default=None, help='key = value run file')
@click.option('--case', default=None, help='Manufactured case name')
@click.option('--level', type=int, default=None, help='Refinement level')
def mesh_info(config_path: Optional[str], case: Optional[str], level: Optional[int]) -> int:
    """Print simplex counts and Betti numbers"""
    from src.geometry import betti_numbers
    from src.services.mms import get_case

    config = load_config(config_path, case=case, level=level)
    _require_mode(config, 'mesh-info')
    mesh = get_case(config.case).mesh_family(config.base_resolution).at_level(config.level).build()
    counts = mesh.counts
    betti = betti_numbers(mesh)
    if mesh.dim == 2:
        click.echo(f"V={counts[0]} E={counts[1]} T={counts[2]} b1={betti[1]}")
    else:
        click.echo(f"V={counts[0]} E={counts[1]} F={counts[2]} T={counts[3]} b1={betti[1]} b2={betti[2]}")
    return EXIT_OK


@cli.command()
@click.option('--config', 'config_path', type=click.Path(), default=None, help='key = value run file')
def check(config_path: Optional[str]) -> int:
    """Run the property suite"""
    from src.services.properties import run_property_suite

    if config_path:
        _require_mode(load_config(config_path), 'property-check')
    results = run_property_suite()
    for result in results:
        click.echo(f"{'PASS' if result.passed else 'FAIL'} {result.name}: {result.detail}")
    return EXIT_OK if all(result.passed for result in results) else EXIT_PROPERTY


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run the CLI and map failures to exit codes.

    Args:
        argv: arguments without the program name (default sys.argv[1:])

    Returns:
        Process exit code
    """
    try:
        result = cli.main(args=argv, prog_name='feec-heat', standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return EXIT_CONFIG
    except click.Abort:
        return EXIT_CONFIG
    except (ConfigurationError, InvalidParameterError, ValidationError) as e:
        logger.error(f"Invalid configuration: {e}")
        click.echo(f"error: {e}", err=True)
        return EXIT_CONFIG
    except FeecHeatError as e:
        logger.error(f"Solver failure: {e}")
        click.echo(f"error: {e}", err=True)
        return EXIT_SOLVER
    return result if isinstance(result, int) else EXIT_OK


def run_cli() -> None:
    """Console-script entry point"""
    sys.exit(main())


if __name__ == '__main__':
    run_cli()
