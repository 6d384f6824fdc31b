import logging
import sys
from pathlib import Path

import click

from src.cli.commands import ALL_COMMANDS, run
from src.utils.config import get_config
from src.utils.errors import ValidationError
from src.utils.performance import get_timing_monitor
from src.utils.validators import load_scenario

logger = logging.getLogger(__name__)


@click.command(context_settings={'help_option_names': ['-h', '--help']})
@click.argument('command', type=click.Choice(ALL_COMMANDS))
@click.option('--scenario', 'scenario_path', required=True, type=click.Path(dir_okay=False),
              help='Scenario JSON file (schema rca-scenario/1).')
@click.option('--seed', type=click.IntRange(min=0), default=None, help='Run seed (overrides the scenario seed).')
@click.option('--tol', type=float, default=None, help='Oracle comparison tolerance.')
@click.option('--format', 'fmt', type=click.Choice(['json', 'csv']), default='json', show_default=True,
              help='json: full report; csv: atomwise witness table.')
@click.option('--budget', type=click.IntRange(min=1), default=None,
              help='Enumeration and iteration budget for hulls and projections.')
@click.option('--trials', type=click.IntRange(min=1), default=None, help='Randomized trials per check.')
@click.option('--workers', type=click.IntRange(min=1), default=None,
              help='Parallel check jobs (default: RCA_WORKERS or 1).')
@click.option('--timing', is_flag=True, help='Include per-check timings in the JSON report.')
@click.option('--output', type=click.Path(dir_okay=False, writable=True), default=None,
              help='Write the report to this file instead of stdout.')
def main(command, scenario_path, seed, tol, fmt, budget, trials, workers, timing, output):
    """Run COMMAND on a scenario and emit a verification report.

    Exit codes: 0 all checks pass, 1 a check failed, 2 input error,
    3 budget or convergence error.
    """
    config = get_config()
    if not config.validate():
        click.echo("Invalid configuration. Check logs for details.", err=True)
        sys.exit(ValidationError.exit_code)

    try:
        scenario = load_scenario(scenario_path)
    except ValidationError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(e.exit_code)

    report = run(command, scenario, {
        'seed': seed,
        'tol': tol,
        'budget': budget,
        'trials': trials,
        'workers': workers,
    })
    body = report.to_csv() if fmt == 'csv' else report.to_json(include_timing=timing)

    if output:
        Path(output).write_text(body if body.endswith('\n') else body + '\n', encoding='utf-8')
        click.echo(f"{command}: {'pass' if report.passed else 'fail'} "
                   f"({len(report.records)} checks) -> {output}", err=True)
    else:
        click.echo(body)
    if report.error:
        click.echo(f"error: {report.error}", err=True)
    if timing:
        logger.info(f"timing summary: {get_timing_monitor().summary()}")
    sys.exit(report.exit_code)


if __name__ == '__main__':
    main()
