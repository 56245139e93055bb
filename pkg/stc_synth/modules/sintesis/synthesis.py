# stc_synth/modules/sintesis/synthesis.py
"""
Lazo de síntesis de la estrategia de muestreo dependiente del estado (SDSS).

Para l = 1..l_max:
    construir S_l -> resolver el juego -> V_U(S_l) -> registrar -> decidir si seguir.

Criterios de parada (en este orden):
- "epsilon":     ε = V_U − v_l <= stop_eps
- "improvement": improvement_stop > 0 y v_l − valor_petc >= improvement_stop
- "l_cap":       se llegó a l_max

Se devuelve la estrategia del mejor v_l visto; en empate gana el l menor.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Optional

import numpy as np

from stc_synth.config.settings import DEFAULT_SEED
from stc_synth.errors import InvalidSpecError
from stc_synth.modules.abstraccion.traffic_abstraction import build_abstraction, restrict_to_petc
from stc_synth.modules.abstraccion.witness_backends import WitnessBackend
from stc_synth.modules.control.lti_core import Plant, TriggerSpec
from stc_synth.modules.control.petc_deadlines import DeadlineWord, get_oracle
from stc_synth.modules.juegos.mpg_solver import (
    cooperative_upper_value,
    min_cycle_mean,
    solve_mean_payoff,
)
from stc_synth.modules.juegos.weighted_game import WeightedGame

logger = logging.getLogger(__name__)

STOP_EPSILON = "epsilon"
STOP_IMPROVEMENT = "improvement"
STOP_L_CAP = "l_cap"


def fraction_document(value: Fraction) -> dict[str, Any]:
    """Racional serializable: num/den exactos más una representación decimal."""
    return {
        "num": value.numerator,
        "den": value.denominator,
        "decimal": f"{float(value):.6f}",
    }


@dataclass
class StrategyTable:
    """
    Tabla palabra -> acción para un l fijo.
    game_value y upper son valores físicos (h·pasos).
    misses cuenta las consultas que cayeron al deadline del PETC.
    """

    l: int
    h: Fraction
    table: dict[DeadlineWord, int]
    game_value: Fraction
    upper: Fraction
    misses: int = 0

    def action_for(self, word: DeadlineWord) -> Optional[int]:
        return self.table.get(word)

    def __len__(self) -> int:
        return len(self.table)


@dataclass(frozen=True)
class IterationRecord:
    l: int
    num_states: int
    num_edges: int
    value: Fraction
    upper: Fraction
    epsilon: Fraction
    petc_value: Fraction
    wall_time: float

    def summary_line(self) -> str:
        return (
            f"l={self.l} value={self.value.numerator}/{self.value.denominator} "
            f"({float(self.value):.6f}) "
            f"upper={self.upper.numerator}/{self.upper.denominator} "
            f"eps={float(self.epsilon):.6f}"
        )

    def to_document(self) -> dict[str, Any]:
        # wall_time no se incluye: el reporte debe ser idéntico entre corridas.
        return {
            "l": self.l,
            "states": self.num_states,
            "edges": self.num_edges,
            "value": fraction_document(self.value),
            "upper": fraction_document(self.upper),
            "epsilon": fraction_document(self.epsilon),
            "petc_value": fraction_document(self.petc_value),
        }


@dataclass
class SynthesisReport:
    records: list[IterationRecord] = field(default_factory=list)
    chosen_l: Optional[int] = None
    stop_reason: Optional[str] = None

    def record_for(self, l: int) -> IterationRecord:
        for record in self.records:
            if record.l == l:
                return record
        raise KeyError(l)

    def to_document(self) -> dict[str, Any]:
        return {
            "iterations": [r.to_document() for r in self.records],
            "chosen_l": self.chosen_l,
            "stop_reason": self.stop_reason,
        }

    def timings(self) -> dict[str, float]:
        return {f"l={r.l}": round(r.wall_time, 6) for r in self.records}


def strategy_from_game(game: WeightedGame, strategy: dict[int, int], value: Fraction, upper: Fraction) -> StrategyTable:
    table = {game.labels[s]: int(u) for s, u in strategy.items()}
    return StrategyTable(
        l=int(game.l or 1),
        h=game.h_exact or Fraction(1),
        table=table,
        game_value=game.physical(value),
        upper=game.physical(upper),
    )


def solve_iteration(game: WeightedGame, wall_start: float) -> tuple[IterationRecord, StrategyTable]:
    """Resuelve un modelo ya construido y arma su registro y su estrategia."""
    solved = solve_mean_payoff(game)
    upper_steps = cooperative_upper_value(game)
    petc_steps = min_cycle_mean(restrict_to_petc(game))

    value = game.physical(solved.game_value)
    upper = game.physical(upper_steps)

    record = IterationRecord(
        l=int(game.l or 1),
        num_states=game.num_states,
        num_edges=game.num_edges,
        value=value,
        upper=upper,
        epsilon=upper - value,
        petc_value=game.physical(petc_steps),
        wall_time=time.perf_counter() - wall_start,
    )
    return record, strategy_from_game(game, solved.strategy, solved.game_value, upper_steps)


def synthesize(
    plant: Plant,
    trig: TriggerSpec,
    l_max: int,
    budget: int,
    seed: int = DEFAULT_SEED,
    stop_eps: float | Fraction = 0,
    improvement_stop: float | Fraction = 0,
    backend: Optional[WitnessBackend] = None,
    on_iteration: Optional[Callable[[WeightedGame, IterationRecord], None]] = None,
) -> tuple[StrategyTable, SynthesisReport]:
    """
    Itera l = 1..l_max. on_iteration recibe (modelo, registro) al terminar cada l;
    la CLI lo usa para persistir los modelos y emitir la línea de resumen.
    """
    if l_max < 1:
        raise InvalidSpecError(f"l_max debe ser >= 1; se recibió {l_max}.")

    stop_eps = Fraction(str(stop_eps)) if not isinstance(stop_eps, Fraction) else stop_eps
    improvement_stop = (
        Fraction(str(improvement_stop)) if not isinstance(improvement_stop, Fraction) else improvement_stop
    )

    report = SynthesisReport()
    best: Optional[StrategyTable] = None

    for l in range(1, l_max + 1):
        started = time.perf_counter()
        game = build_abstraction(plant, trig, l, budget, seed=seed, backend=backend)
        record, strategy = solve_iteration(game, started)
        report.records.append(record)

        logger.info("[SINTESIS] %s", record.summary_line())
        if on_iteration is not None:
            on_iteration(game, record)

        if best is None or strategy.game_value > best.game_value:
            best = strategy
            report.chosen_l = l

        if record.epsilon <= stop_eps:
            report.stop_reason = STOP_EPSILON
            break
        if improvement_stop > 0 and record.value - record.petc_value >= improvement_stop:
            report.stop_reason = STOP_IMPROVEMENT
            break
    else:
        report.stop_reason = STOP_L_CAP

    logger.info("[SINTESIS] l elegido=%s razón=%s", report.chosen_l, report.stop_reason)
    return best, report


def refine_lookup(strategy: StrategyTable, plant: Plant, trig: TriggerSpec, x) -> int:
    """
    Acción de la SDSS en x: table[σ] con σ la palabra de x de longitud l.
    Si σ no está en la tabla se usa deadline(x) (la acción del PETC) y se
    incrementa strategy.misses.
    """
    oracle = get_oracle(plant, trig)
    x = np.asarray(x, dtype=float)
    word = oracle.sequence(x, strategy.l)

    action = strategy.action_for(word)
    if action is None:
        strategy.misses += 1
        return word.first

    return action


def refine_lookup_batch(strategy: StrategyTable, plant: Plant, trig: TriggerSpec, X: np.ndarray) -> np.ndarray:
    """Versión por lotes de refine_lookup (misma regla de respaldo)."""
    oracle = get_oracle(plant, trig)
    words = oracle.sequences(X, strategy.l)

    actions = np.empty(len(words), dtype=np.int64)
    for i, row in enumerate(words):
        action = strategy.action_for(DeadlineWord(tuple(row.tolist())))
        if action is None:
            strategy.misses += 1
            action = int(row[0])
        actions[i] = action

    return actions
