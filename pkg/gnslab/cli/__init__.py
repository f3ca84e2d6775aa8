"""gnslab command line interface."""
import configparser
import logging
import os
import sys

import click
import numpy as np
from pydantic import ValidationError

from ..errors import DomainError
from ..pipeline import FLOW_INITS, run_command
from ..schema import Command, RunConfig, Tolerances

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'
DEFAULT_GRID = {
    Command.Constants: 1024,
    Command.Duality: 1024,
    Command.Flow: 128,
    Command.FastDiffusion: 241,
    Command.GradientFlow: 481,
    Command.Identities: 401,
    Command.Rigidity: 128,
}
CONFIG_KEYS = {'p', 'p_sweep', 'grid_size', 't_end', 'seed', 'init', 'output_dir',
               'workers'}


def parse_sweep(value: str) -> list:
    """Exponents a, a + step, ... up to b from 'a:b:step'."""
    try:
        start, end, step = (float(v) for v in value.split(':'))
    except ValueError:
        raise DomainError(f'A sweep is written as a:b:step. Got "{value}".') from None
    if not step > 0 or end < start:
        raise DomainError(f'Invalid sweep "{value}".')
    count = int(np.floor((end - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]


def read_config(path: str, command: Command) -> dict:
    """Values of the section named after the command in an INI file.

    Keys are RunConfig fields and tolerance names.
    """
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise DomainError(f'Failed to read the config file {path}.')
    if not parser.has_section(command.value):
        return {}
    section = dict(parser.items(command.value))
    tolerance_names = set(Tolerances.__fields__)
    unknown = set(section) - CONFIG_KEYS - tolerance_names
    if unknown:
        raise DomainError(
            f'Unknown keys in [{command.value}] of {path}: {", ".join(sorted(unknown))}.')
    values = {k: v for k, v in section.items() if k in CONFIG_KEYS}
    overrides = [f'{k}={v}' for k, v in section.items() if k in tolerance_names]
    if 'p' in values:
        values['p'] = [float(v) for v in values['p'].replace(',', ' ').split()]
    if 'p_sweep' in values:
        values['p'] = parse_sweep(values.pop('p_sweep'))
    values['tolerance_overrides'] = overrides
    return values


def build_config(command: Command, p, p_sweep, grid, t_end, seed, out, tol_override,
                 config, init=None, workers=None) -> RunConfig:
    """Merge defaults, config file values and flags into a RunConfig."""
    values = {'grid_size': DEFAULT_GRID.get(command, 1024),
              'output_dir': os.environ.get('GNSLAB_OUT', '.')}
    overrides = []
    if config:
        file_values = read_config(config, command)
        overrides.extend(file_values.pop('tolerance_overrides'))
        values.update(file_values)
    flags = {'grid_size': grid, 't_end': t_end, 'seed': seed, 'output_dir': out,
             'init': init, 'workers': workers}
    values.update({k: v for k, v in flags.items() if v is not None})
    if p_sweep:
        values['p'] = parse_sweep(p_sweep)
    elif p:
        values['p'] = list(p)
    overrides.extend(tol_override or ())
    values['tolerances'] = Tolerances().override(overrides)
    return RunConfig(command=command, **values)


def _run(ctx: click.Context, command: Command, **kwargs) -> None:
    try:
        cfg = build_config(command, **kwargs)
        report = run_command(cfg)
    except (DomainError, ValidationError) as e:
        logger.debug('%s failed.', command.value, exc_info=True)
        raise click.ClickException(str(e))
    for violation in report.violations:
        click.echo(f'violation {violation.check}: got {violation.got:.6g}, '
                   f'tolerance {violation.tolerance:.3g}', err=True)
    ctx.exit(0 if report.passed else 2)


def common_options(func):
    """Options shared by every command."""
    options = [
        click.option('--p', 'p', type=float, multiple=True,
                     help='Exponent p. Repeat the flag for several exponents.'),
        click.option('--p-sweep', help='Sweep of exponents as a:b:step.'),
        click.option('--grid', type=int, help='Number of grid nodes.'),
        click.option('--t-end', type=float, help='Final time of flow runs.'),
        click.option('--seed', type=int, help='Seed for randomized batteries.'),
        click.option('--out', help='Output folder. Default: $GNSLAB_OUT or the '
                     'current folder.'),
        click.option('--tol-override', multiple=True,
                     help='Tolerance override as name=value. Can be repeated.'),
        click.option('--config', type=click.Path(exists=True, dir_okay=False),
                     help='INI file with a section per command.'),
        click.option('--workers', type=int, help='Worker threads for sweeps.'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@click.group(help='Numerical lab for sharp GNS inequalities in one dimension.')
@click.option('--verbose', is_flag=True, help='Log progress at DEBUG level.')
@click.version_option()
def cli(verbose):
    package_logger = logging.getLogger('gnslab')
    if not package_logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        package_logger.addHandler(handler)
    package_logger.setLevel(logging.DEBUG if verbose else logging.WARNING)


@cli.command('constants')
@common_options
@click.pass_context
def constants(ctx, **kwargs):
    """Closed-form constants checked against quadrature of the optimizers."""
    _run(ctx, Command.Constants, **kwargs)


@cli.command('duality')
@common_options
@click.pass_context
def duality(ctx, **kwargs):
    """Primal inf and dual sup against the closed forms, transport chains and the
    log-Sobolev limit."""
    _run(ctx, Command.Duality, **kwargs)


@cli.command('flow')
@common_options
@click.option('--init', type=click.Choice(FLOW_INITS), help='Initial datum.')
@click.pass_context
def flow(ctx, **kwargs):
    """Run the nonlinear flow and check its Lyapunov functional."""
    _run(ctx, Command.Flow, **kwargs)


@cli.command('fastdiff')
@common_options
@click.pass_context
def fastdiff(ctx, **kwargs):
    """Run the fast diffusion equation from Barenblatt and shifted data."""
    _run(ctx, Command.FastDiffusion, **kwargs)


@cli.command('gradflow')
@common_options
@click.pass_context
def gradflow(ctx, **kwargs):
    """Heat flow entropy production or the gradient flow of int rho^(p/2)."""
    _run(ctx, Command.GradientFlow, **kwargs)


@cli.command('identities')
@common_options
@click.pass_context
def identities(ctx, **kwargs):
    """Integration by parts identities on tapered test functions."""
    _run(ctx, Command.Identities, **kwargs)


@cli.command('rigidity')
@common_options
@click.pass_context
def rigidity(ctx, **kwargs):
    """Scan lambda for nonconstant solutions and check the rigidity identity."""
    _run(ctx, Command.Rigidity, **kwargs)


@cli.command('report')
@click.option('--out', help='Folder with the per-exponent reports.')
@click.pass_context
def report(ctx, out):
    """Merge per-exponent JSON reports of a folder into report.json."""
    _run(ctx, Command.Report, p=None, p_sweep=None, grid=None, t_end=None, seed=None,
         out=out, tol_override=None, config=None)


def main(args=None) -> int:
    """Run the command line and return the exit code.

    0 when every check passes, 2 on a tolerance violation and 1 on a usage error.
    """
    try:
        result = cli.main(args=args, prog_name='gnslab', standalone_mode=False)
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.ClickException as e:
        e.show()
        return 1
    except click.Abort:
        return 1
    return result if isinstance(result, int) else 0


if __name__ == '__main__':
    sys.exit(main())
