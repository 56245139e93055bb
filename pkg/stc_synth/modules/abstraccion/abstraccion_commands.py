# stc_synth/modules/abstraccion/abstraccion_commands.py
import click

from stc_synth.modules.abstraccion.traffic_abstraction import (
    build_abstraction,
    check_simulation_direction,
)
from stc_synth.modules.abstraccion.witness_backends import make_backend
from stc_synth.modules.comandos.decorators import job_command
from stc_synth.modules.comandos.options import (
    budget_option,
    config_option,
    l_option,
    load_with_overrides,
    out_option,
    seed_option,
)
from stc_synth.repositories.json_repository import JsonRepository


@click.command("abstract")
@config_option
@out_option
@l_option
@budget_option
@seed_option
@click.option("--backend", type=click.Choice(["sampling", "z3"]), default="sampling", show_default=True)
@job_command("abstract")
def abstract_command(config_path, out, l, budget, seed, backend, logger):
    """Construye el modelo de tráfico S_l y lo guarda en <out>/model-l<l>.json."""
    cfg = load_with_overrides(config_path, budget=budget, seed=seed)
    l = l or 1

    plant = cfg.to_plant()
    trig = cfg.to_trigger(plant)

    game = build_abstraction(plant, trig, l, cfg.run.budget, seed=cfg.run.seed, backend=make_backend(backend))
    path = JsonRepository(out).save_model(game, f"model-l{l}.json")

    violations = check_simulation_direction(plant, trig, game, seed=cfg.run.seed)
    if violations:
        logger.warning("[ABSTRACT] %s pasos concretos sin arista en el modelo.", violations)

    logger.info("[ABSTRACT] Modelo guardado en %s", path)
    click.echo(f"l={l} states={game.num_states} edges={game.num_edges}")
