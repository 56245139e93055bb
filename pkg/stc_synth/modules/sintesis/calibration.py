# stc_synth/modules/sintesis/calibration.py
"""
Calibración de ρ de la condición predictiva de Lyapunov.

Para cada ρ de la grilla se simula el PETC (SAIST empírico) y se estima el
SAIST del modelo como h·(ciclo medio mínimo del submodelo PETC de S_l),
subiendo l desde 1 hasta que modelo y simulación coinciden dentro de la
tolerancia. Un ρ sin l consistente queda descartado. Entre los consistentes
se elige el que queda más cerca del objetivo; en empate gana el primero.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional, Sequence

import numpy as np

from stc_synth.config.settings import (
    CALIBRATION_L_MAX,
    CALIBRATION_SIM_N_INIT,
    CALIBRATION_SIM_STEPS,
    DEFAULT_SEED,
    SAIST_TOLERANCE,
)
from stc_synth.errors import InvalidSpecError
from stc_synth.modules.abstraccion.traffic_abstraction import build_abstraction, restrict_to_petc
from stc_synth.modules.control.lti_core import Plant, TriggerSpec, predictive_trigger
from stc_synth.modules.juegos.mpg_solver import min_cycle_mean
from stc_synth.modules.sintesis.synthesis import fraction_document
from stc_synth.modules.simulacion.simulation import estimate_saist

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PredictiveTemplate:
    """Datos de la condición predictiva sin ρ."""

    P: np.ndarray
    Q_lyap: np.ndarray
    h: float
    kmax: int
    h_exact: Optional[Fraction] = None

    def with_rho(self, plant: Plant, rho: float) -> TriggerSpec:
        return predictive_trigger(plant, self.P, self.Q_lyap, rho, self.h, self.kmax, h_exact=self.h_exact)


@dataclass(frozen=True)
class CalibrationRow:
    rho: float
    l: int
    estimate: Fraction
    simulation: float
    gap: float
    consistent: bool

    def to_document(self) -> dict[str, Any]:
        return {
            "rho": self.rho,
            "l": self.l,
            "estimate": fraction_document(self.estimate),
            "simulation": round(self.simulation, 6),
            "gap": round(self.gap, 6),
            "consistent": self.consistent,
        }


@dataclass
class CalibrationResult:
    rho: float
    l: int
    estimate: Fraction
    gap: float
    target: float
    consistent: bool
    rows: list[CalibrationRow] = field(default_factory=list)
    tolerance: float = SAIST_TOLERANCE

    @property
    def reproduced(self) -> bool:
        return self.consistent and self.gap <= self.tolerance

    def to_document(self) -> dict[str, Any]:
        return {
            "target": self.target,
            "rho": self.rho,
            "l": self.l,
            "estimate": fraction_document(self.estimate),
            "gap": round(self.gap, 6),
            "tolerance": self.tolerance,
            "consistent": self.consistent,
            "reproduced": self.reproduced,
            "grid": [row.to_document() for row in self.rows],
        }


def petc_model_estimate(
    plant: Plant,
    trig: TriggerSpec,
    budget: int,
    seed: int = DEFAULT_SEED,
    l: int = 1,
) -> Fraction:
    """SAIST del PETC según el modelo: h·min_cycle_mean(restrict_to_petc(S_l))."""
    game = build_abstraction(plant, trig, l, budget, seed=seed)
    return game.physical(min_cycle_mean(restrict_to_petc(game)))


def _calibration_row(
    plant: Plant,
    trig: TriggerSpec,
    rho: float,
    target: float,
    budget: int,
    seed: int,
    n_init: int,
    steps: int,
    l_max: int,
) -> CalibrationRow:
    simulation = estimate_saist(plant, trig, "petc", n_init, steps, seed)

    for l in range(1, l_max + 1):
        estimate = petc_model_estimate(plant, trig, budget, seed, l=l)
        consistent = abs(simulation - float(estimate)) <= SAIST_TOLERANCE
        logger.info(
            "[CALIBRACION] rho=%.4f l=%s modelo=%.6f simulacion=%.6f",
            rho, l, float(estimate), simulation,
        )
        if consistent:
            break

    if not consistent:
        logger.warning(
            "[CALIBRACION] rho=%.4f: el modelo (%.6f, l=%s) y la simulación (%.6f) difieren más de %.3f; se descarta",
            rho, float(estimate), l, simulation, SAIST_TOLERANCE,
        )

    return CalibrationRow(
        rho=rho,
        l=l,
        estimate=estimate,
        simulation=simulation,
        gap=abs(float(estimate) - float(target)),
        consistent=consistent,
    )


def calibrate_rho(
    plant: Plant,
    template: PredictiveTemplate,
    target: float,
    grid: Sequence[float],
    budget: int,
    seed: int = DEFAULT_SEED,
    n_init: int = CALIBRATION_SIM_N_INIT,
    steps: int = CALIBRATION_SIM_STEPS,
    l_max: int = CALIBRATION_L_MAX,
) -> CalibrationResult:
    if not grid:
        raise InvalidSpecError("La grilla de calibración no puede estar vacía.")
    if l_max < 1:
        raise InvalidSpecError(f"l_max debe ser >= 1; se recibió {l_max}.")

    rows = [
        _calibration_row(
            plant, template.with_rho(plant, float(rho)), float(rho), target,
            budget, seed, n_init, steps, l_max,
        )
        for rho in grid
    ]

    candidates = [row for row in rows if row.consistent]
    if not candidates:
        logger.warning("[CALIBRACION] Ningún rho tiene un modelo consistente con la simulación.")
        candidates = rows

    best = min(candidates, key=lambda row: row.gap)
    result = CalibrationResult(
        rho=best.rho,
        l=best.l,
        estimate=best.estimate,
        gap=best.gap,
        target=float(target),
        consistent=best.consistent,
        rows=rows,
    )

    if result.reproduced:
        logger.info("[CALIBRACION] rho elegido=%.4f l=%s gap=%.6f", result.rho, result.l, result.gap)
    else:
        logger.warning(
            "[CALIBRACION] Ningún rho alcanza el objetivo %.4f ± %.3f; el más cercano es %.4f (gap=%.6f)",
            result.target, result.tolerance, result.rho, result.gap,
        )

    return result
