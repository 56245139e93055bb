# stc_synth/modules/comandos/options.py
"""Opciones compartidas por los comandos y lectura de la configuración con sobrescrituras."""
from __future__ import annotations

from pathlib import Path
from typing import Optional

import click

from stc_synth.config.schema import RunnerConfig, load_runner_config

config_option = click.option(
    "--config", "config_path",
    type=click.Path(dir_okay=False, path_type=Path),
    required=True,
    help="Archivo JSON de configuración.",
)
out_option = click.option(
    "--out",
    type=click.Path(file_okay=False, path_type=Path),
    required=True,
    help="Carpeta de salida.",
)
l_option = click.option("--l", "l", type=click.IntRange(min=1), default=None, help="Longitud de palabra (l o l_max).")
budget_option = click.option("--budget", type=click.IntRange(min=1), default=None, help="Muestras de la esfera.")
seed_option = click.option("--seed", type=int, default=None, help="Semilla.")
steps_option = click.option("--steps", type=click.IntRange(min=1), default=None, help="Pasos por traza.")
n_init_option = click.option("--n-init", "n_init", type=click.IntRange(min=1), default=None,
                             help="Condiciones iniciales.")


def load_with_overrides(
    config_path: Path,
    l: Optional[int] = None,
    budget: Optional[int] = None,
    seed: Optional[int] = None,
    steps: Optional[int] = None,
    n_init: Optional[int] = None,
) -> RunnerConfig:
    """Carga la configuración y aplica las banderas de la línea de comandos sobre run."""
    cfg = load_runner_config(config_path)

    overrides = {
        "l_max": l,
        "budget": budget,
        "seed": seed,
        "steps": steps,
        "n_init": n_init,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if overrides:
        cfg = cfg.model_copy(update={"run": cfg.run.model_copy(update=overrides)})

    return cfg
