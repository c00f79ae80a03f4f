# -*- coding: utf-8 -*-
"""
Arquivo principal (main.py) - linha de comando das suítes de verificação.

Uso:
    python -m src.main --config configs/american_put.json --output results
    python -m src.main --list-problems
    python -m src.main --diff results/a/report.json results/b/report.json
"""

import logging
import sys
from typing import Optional, Tuple

import click

from src.controllers.experiment_runner import ExperimentReport, report_diff, run
from src.processing.persistence import ReportPersistence
from src.processing import problems
from src.utils.config import load_run_config
from src.utils.exceptions import ConfigParseError, KeyMismatch

EXIT_SUITE_FAILURE = 1
EXIT_CONFIG_ERROR = 2


def _load_report(path: str) -> ExperimentReport:
    data = ReportPersistence.load(path)
    if data is None:
        raise click.ClickException(f"Relatório inválido: {path}")
    return ExperimentReport.from_dict(data)


@click.command()
@click.option('--config', 'config_path', type=click.Path(dir_okay=False),
              help="Documento JSON de configuração.")
@click.option('--output', 'output_dir', type=click.Path(file_okay=False),
              help="Diretório de saída (sobrescreve output_dir).")
@click.option('--seed', type=int, help="Semente (sobrescreve seed).")
@click.option('--list-problems', is_flag=True, help="Lista os problemas embutidos.")
@click.option('--normalize-timestamps', is_flag=True,
              help="Zera carimbos de tempo para relatórios reprodutíveis.")
@click.option('--diff', nargs=2, type=click.Path(exists=True, dir_okay=False),
              help="Compara as métricas de dois relatórios.")
@click.option('-v', '--verbose', is_flag=True, help="Log em nível DEBUG.")
def main(config_path: Optional[str], output_dir: Optional[str], seed: Optional[int],
         list_problems: bool, normalize_timestamps: bool, diff: Tuple[str, ...],
         verbose: bool):
    """Executa as suítes de verificação declaradas em um documento de configuração."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    if list_problems:
        for name in problems.list_problems():
            click.echo(name)
        return

    if diff:
        try:
            text = report_diff(_load_report(diff[0]), _load_report(diff[1]))
        except KeyMismatch as e:
            click.echo(f"❌ {e}", err=True)
            sys.exit(EXIT_CONFIG_ERROR)
        click.echo(text if text else "Relatórios idênticos")
        return

    if config_path is None:
        raise click.UsageError("Informe --config, --list-problems ou --diff")

    try:
        config = load_run_config(config_path)
        if seed is not None:
            config.seed = seed
        if output_dir is not None:
            config.output_dir = output_dir
        report = run(config, normalize_timestamps=normalize_timestamps)
    except ConfigParseError as e:
        click.echo(f"❌ Configuração inválida: {e}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)

    for suite in report.suites:
        line = f"{suite.status.get_display_name():10s} {suite.name:13s} {suite.wall_time:7.2f} s"
        if suite.error:
            line += f"  {suite.error}"
        click.echo(line)
    if not report.passed:
        sys.exit(EXIT_SUITE_FAILURE)


if __name__ == "__main__":
    main()
