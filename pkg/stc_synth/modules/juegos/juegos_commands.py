# stc_synth/modules/juegos/juegos_commands.py
import time
from pathlib import Path

import click

from stc_synth.modules.comandos.decorators import job_command
from stc_synth.modules.comandos.options import out_option
from stc_synth.modules.sintesis.synthesis import solve_iteration
from stc_synth.repositories.json_repository import JsonRepository


@click.command("solve")
@click.option(
    "--model", "model_path",
    type=click.Path(dir_okay=False, path_type=Path),
    required=True,
    help="Modelo de tráfico generado por 'abstract'.",
)
@out_option
@job_command("solve")
def solve_command(model_path, out, logger):
    """Resuelve el juego de pago medio de un modelo y guarda <out>/strategy.json."""
    repo = JsonRepository(out)

    started = time.perf_counter()
    game = repo.load_model(model_path.resolve())
    record, strategy = solve_iteration(game, started)

    path = repo.save_strategy(strategy, "strategy.json")
    logger.info("[SOLVE] Estrategia guardada en %s (%s palabras)", path, len(strategy))
    click.echo(record.summary_line())
