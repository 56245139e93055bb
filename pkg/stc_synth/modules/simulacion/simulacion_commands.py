# stc_synth/modules/simulacion/simulacion_commands.py
from pathlib import Path

import click
import numpy as np

from stc_synth.modules.comandos.decorators import job_command
from stc_synth.modules.comandos.options import (
    config_option,
    load_with_overrides,
    n_init_option,
    out_option,
    seed_option,
    steps_option,
)
from stc_synth.modules.control.petc_deadlines import random_unit_vectors
from stc_synth.modules.simulacion.plotting import plot_traces
from stc_synth.modules.simulacion.simulation import simulate_batch, tail_average, verify_deadline_safety
from stc_synth.repositories.json_repository import JsonRepository
from stc_synth.repositories.trace_repository import TraceRepository


@click.command("simulate")
@config_option
@out_option
@click.option(
    "--strategy", "strategy_path",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="strategy.json; sin esta opción se simula el PETC.",
)
@steps_option
@n_init_option
@seed_option
@job_command("simulate")
def simulate_command(config_path, out, strategy_path, steps, n_init, seed, logger):
    """Simula el lazo cerrado y exporta las trazas en <out>/traces/."""
    cfg = load_with_overrides(config_path, steps=steps, n_init=n_init, seed=seed)
    plant = cfg.to_plant()
    trig = cfg.to_trigger(plant)

    if strategy_path is not None:
        policy = JsonRepository(out).load_strategy(strategy_path.resolve())
        prefix = "sdss"
    else:
        policy = "petc"
        prefix = "petc"

    X0 = random_unit_vectors(plant.n_x, cfg.run.n_init, np.random.default_rng(cfg.run.seed))
    traces = simulate_batch(plant, trig, policy, X0, cfg.run.steps, metadata={"seed": cfg.run.seed})

    repo = TraceRepository(out)
    for i, trace in enumerate(traces):
        repo.save(trace, f"traces/{prefix}_{i:02d}.csv")

    unsafe = sum(not verify_deadline_safety(trace, plant, trig) for trace in traces)
    if unsafe:
        logger.warning("[SIMULATE] %s trazas muestrean después del deadline.", unsafe)

    saist = min(tail_average(trace) for trace in traces)
    click.echo(f"policy={prefix} traces={len(traces)} saist={saist:.6f} unsafe={unsafe}")


@click.command("plot")
@click.argument("traces", nargs=-1, required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.argument("out_svg", type=click.Path(dir_okay=False, path_type=Path))
@job_command("plot")
def plot_command(traces, out_svg, logger):
    """Grafica una o más trazas CSV (tau_i y promedio acumulado) en un SVG."""
    repo = TraceRepository(Path.cwd())
    loaded = [repo.load(path) for path in traces]

    path = plot_traces(loaded, out_svg, labels=[p.stem for p in traces])
    logger.info("[PLOT] %s trazas graficadas en %s", len(loaded), path)
    click.echo(str(path))
