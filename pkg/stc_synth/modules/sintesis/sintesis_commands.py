# stc_synth/modules/sintesis/sintesis_commands.py
from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

import click
import numpy as np

from stc_synth.config.schema import CalibrateConfig, RunnerConfig
from stc_synth.config.settings import PIPELINE_TRACE_COUNT
from stc_synth.modules.comandos.decorators import job_command
from stc_synth.modules.comandos.options import (
    budget_option,
    config_option,
    l_option,
    load_with_overrides,
    n_init_option,
    out_option,
    seed_option,
    steps_option,
)
from stc_synth.modules.control.lti_core import Plant
from stc_synth.modules.control.petc_deadlines import random_unit_vectors
from stc_synth.modules.simulacion.simulation import estimate_saist, simulate_batch, verify_deadline_safety
from stc_synth.modules.sintesis.calibration import CalibrationResult, calibrate_rho
from stc_synth.modules.sintesis.synthesis import synthesize
from stc_synth.repositories.json_repository import JsonRepository, sha256_file
from stc_synth.repositories.trace_repository import TraceRepository


def _calibrate(cfg: RunnerConfig, plant: Plant) -> CalibrationResult:
    calibrate = cfg.run.calibrate
    return calibrate_rho(
        plant,
        cfg.to_template(),
        calibrate.target,
        calibrate.grid,
        cfg.run.budget,
        seed=cfg.run.seed,
    )


def _with_target(cfg: RunnerConfig, target: Optional[float]) -> RunnerConfig:
    """Garantiza un bloque run.calibrate (con valores por defecto) y aplica --target."""
    calibrate = cfg.run.calibrate or CalibrateConfig()
    if target is not None:
        calibrate = calibrate.model_copy(update={"target": target})
    return cfg.model_copy(update={"run": cfg.run.model_copy(update={"calibrate": calibrate})})


def run_pipeline(cfg: RunnerConfig, out: Path, config_sha256: str, logger: logging.Logger) -> None:
    """
    Flujo completo: calibración opcional -> síntesis -> persistencia -> trazas.

    Archivos en out:
    model-l<l>.json, strategy.json, report.json, timings.json, saist.json,
    calibration.json (si se calibra), traces/petc_XX.csv, traces/sdss_XX.csv.

    saist.json guarda el SAIST simulado de ambas políticas sobre run.n_init
    estados iniciales y run.steps pasos.
    """
    json_repo = JsonRepository(out)
    trace_repo = TraceRepository(out)
    plant = cfg.to_plant()

    calibration = None
    if cfg.run.calibrate is not None:
        calibration = _calibrate(cfg, plant)
        json_repo.save_calibration(calibration, "calibration.json")
        trig = cfg.to_trigger(plant, rho=calibration.rho)
    else:
        trig = cfg.to_trigger(plant)

    def on_iteration(game, record):
        json_repo.save_model(game, f"model-l{record.l}.json")
        click.echo(record.summary_line())

    strategy, report = synthesize(
        plant,
        trig,
        l_max=cfg.run.l_max,
        budget=cfg.run.budget,
        seed=cfg.run.seed,
        stop_eps=cfg.run.stop_eps,
        improvement_stop=cfg.run.improvement_stop,
        on_iteration=on_iteration,
    )

    json_repo.save_strategy(strategy, "strategy.json")
    json_repo.save_report(report, "report.json", config_sha256=config_sha256, calibration=calibration)
    json_repo.write("timings.json", report.timings())

    saist = {
        prefix: estimate_saist(plant, trig, policy, cfg.run.n_init, cfg.run.steps, cfg.run.seed)
        for prefix, policy in (("petc", "petc"), ("sdss", strategy))
    }
    json_repo.write(
        "saist.json",
        {"n_init": cfg.run.n_init, "steps": cfg.run.steps, **{k: round(v, 6) for k, v in saist.items()}},
    )
    logger.info("[PIPELINE] SAIST simulado petc=%.6f sdss=%.6f", saist["petc"], saist["sdss"])

    X0 = random_unit_vectors(plant.n_x, PIPELINE_TRACE_COUNT, np.random.default_rng(cfg.run.seed))
    for prefix, policy in (("petc", "petc"), ("sdss", strategy)):
        traces = simulate_batch(plant, trig, policy, X0, cfg.run.steps, metadata={"seed": cfg.run.seed})
        for i, trace in enumerate(traces):
            trace_repo.save(trace, f"traces/{prefix}_{i:02d}.csv")

        unsafe = sum(not verify_deadline_safety(trace, plant, trig) for trace in traces)
        if unsafe:
            logger.warning("[PIPELINE] %s trazas %s muestrean después del deadline.", unsafe, prefix)

    logger.info(
        "[PIPELINE] l elegido=%s razón=%s fallos de tabla=%s",
        report.chosen_l, report.stop_reason, strategy.misses,
    )


@click.command("pipeline")
@config_option
@out_option
@l_option
@budget_option
@seed_option
@steps_option
@n_init_option
@job_command("pipeline")
def pipeline_command(config_path, out, l, budget, seed, steps, n_init, logger):
    """Síntesis completa para l = 1..l_max con persistencia de modelos, reporte y trazas."""
    cfg = load_with_overrides(config_path, l=l, budget=budget, seed=seed, steps=steps, n_init=n_init)
    logger.info("[PIPELINE] Configuración %s (l_max=%s, budget=%s)", config_path, cfg.run.l_max, cfg.run.budget)
    run_pipeline(cfg, Path(out), sha256_file(config_path), logger)


@click.command("calibrate")
@config_option
@out_option
@budget_option
@seed_option
@click.option("--target", type=float, default=None, help="SAIST objetivo del PETC.")
@job_command("calibrate")
def calibrate_command(config_path, out, budget, seed, target, logger):
    """Elige rho de la grilla cuyo SAIST del PETC queda más cerca del objetivo."""
    cfg = _with_target(load_with_overrides(config_path, budget=budget, seed=seed), target)

    plant = cfg.to_plant()
    result = _calibrate(cfg, plant)
    JsonRepository(out).save_calibration(result, "calibration.json")

    click.echo(
        f"rho={result.rho:.4f} estimate={float(result.estimate):.6f} "
        f"gap={result.gap:.6f} reproduced={str(result.reproduced).lower()}"
    )
