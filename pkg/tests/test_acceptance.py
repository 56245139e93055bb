"""
Reproducción del ejemplo numérico de 2 estados con el presupuesto completo.

Son pruebas lentas (minutos): pytest -m slow
"""
from fractions import Fraction

import numpy as np
import pytest

from stc_synth.config.settings import CALIBRATION_GRID
from stc_synth.modules.abstraccion.traffic_abstraction import (
    build_abstraction,
    check_simulation_direction,
    restrict_to_petc,
)
from stc_synth.modules.control.lti_core import Plant, predictive_trigger
from stc_synth.modules.control.petc_deadlines import random_unit_vectors
from stc_synth.modules.juegos.mpg_solver import cooperative_upper_value, min_cycle_mean, solve_mean_payoff
from stc_synth.modules.simulacion.simulation import estimate_saist, simulate_batch, tail_average, verify_deadline_safety
from stc_synth.modules.sintesis.calibration import PredictiveTemplate, calibrate_rho
from stc_synth.modules.sintesis.synthesis import synthesize
from tests.conftest import EXAMPLE_A, EXAMPLE_B, EXAMPLE_H, EXAMPLE_K, EXAMPLE_KMAX, EXAMPLE_P, EXAMPLE_Q_LYAP

pytestmark = pytest.mark.slow

BUDGET = 100_000
CALIBRATION_BUDGET = 20_000


def _bursts(traces):
    """Pares de muestras consecutivas a un solo período en la mitad final de cada traza."""
    return sum(int(((t.k[500:-1] == 1) & (t.k[501:] == 1)).sum()) for t in traces)


@pytest.fixture(scope="module")
def plant():
    return Plant(A=EXAMPLE_A, B=EXAMPLE_B, K_fb=EXAMPLE_K)


@pytest.fixture(scope="module")
def trig(plant):
    return predictive_trigger(plant, EXAMPLE_P, EXAMPLE_Q_LYAP, 0.5, EXAMPLE_H, EXAMPLE_KMAX)


@pytest.fixture(scope="module")
def models(plant, trig):
    return {l: build_abstraction(plant, trig, l, BUDGET) for l in (1, 2, 3)}


@pytest.fixture(scope="module")
def synthesized(plant, trig):
    return {l: synthesize(plant, trig, l_max=l, budget=BUDGET)[0] for l in (1, 2)}


def test_values_are_sandwiched(models):
    for l, game in models.items():
        petc = min_cycle_mean(restrict_to_petc(game))
        value = solve_mean_payoff(game).game_value
        upper = cooperative_upper_value(game)
        assert petc <= value <= upper, (l, petc, value, upper)


def test_petc_simulation_matches_the_model(plant, trig, models):
    simulated = estimate_saist(plant, trig, "petc", n_init=100, steps=2000)
    gaps = {
        l: abs(simulated - float(game.physical(min_cycle_mean(restrict_to_petc(game)))))
        for l, game in models.items()
    }
    assert min(gaps.values()) <= 0.02, (simulated, gaps)


def test_refined_strategies_reach_their_values(plant, trig, synthesized):
    X0 = random_unit_vectors(2, 100, np.random.default_rng(0))
    for l, strategy in synthesized.items():
        traces = simulate_batch(plant, trig, strategy, X0, 2000)
        worst = min(tail_average(trace) for trace in traces)
        assert worst >= float(strategy.game_value) - 0.02, (l, worst, strategy.game_value)


def test_refined_strategies_respect_deadlines(plant, trig, synthesized):
    X0 = random_unit_vectors(2, 10, np.random.default_rng(1))
    for strategy in synthesized.values():
        traces = simulate_batch(plant, trig, strategy, X0, 1000)
        assert all(verify_deadline_safety(trace, plant, trig) for trace in traces)


def test_no_simulation_direction_violations(plant, trig, models):
    for game in models.values():
        assert check_simulation_direction(plant, trig, game, n_samples=1000) == 0


def test_reported_values_after_calibration(plant):
    template = PredictiveTemplate(
        P=np.array(EXAMPLE_P), Q_lyap=np.array(EXAMPLE_Q_LYAP), h=EXAMPLE_H, kmax=EXAMPLE_KMAX,
    )
    calibration = calibrate_rho(plant, template, 0.233, CALIBRATION_GRID, CALIBRATION_BUDGET)
    if not calibration.reproduced:
        pytest.skip(f"ningún rho de la grilla reproduce 0.233 (más cercano {calibration.rho}, gap {calibration.gap:.4f})")

    trig = template.with_rho(plant, calibration.rho)
    strategy, report = synthesize(plant, trig, l_max=3, budget=BUDGET)

    assert [r.value for r in report.records] == [Fraction(1, 2), Fraction(3, 5), Fraction(3, 5)]
    assert all(r.upper == Fraction(11, 10) for r in report.records)
    assert report.record_for(3).epsilon == Fraction(1, 2)
    assert report.chosen_l == 2

    l1_strategy, _ = synthesize(plant, trig, l_max=1, budget=BUDGET)
    assert max(l1_strategy.table.values()) == 5

    # El PETC repite ráfagas de un solo período; la estrategia de l=2 las evita.
    X0 = random_unit_vectors(2, 20, np.random.default_rng(2))
    assert _bursts(simulate_batch(plant, trig, "petc", X0, 1000)) > 0
    assert _bursts(simulate_batch(plant, trig, strategy, X0, 1000)) == 0
