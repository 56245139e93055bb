"""
Pruebas de la simulación en los instantes de muestreo y de los promedios.
"""
import numpy as np
import pytest

from stc_synth.errors import DivergedError, InvalidSpecError
from stc_synth.modules.control.lti_core import Plant, TriggerSpec, predictive_trigger
from stc_synth.modules.control.petc_deadlines import get_oracle, random_unit_vectors
from stc_synth.modules.simulacion.simulation import (
    Trace,
    estimate_saist,
    make_policy,
    running_average,
    simulate,
    simulate_batch,
    tail_average,
    verify_deadline_safety,
)


def test_frozen_dynamics_keep_the_state(static_plant):
    trig = predictive_trigger(static_plant, np.eye(2), np.eye(2), 0.5, 0.1, 5)
    x0 = np.array([3.0, -4.0])
    trace = simulate(static_plant, trig, "petc", x0, steps=30)

    assert trace.k.tolist() == [1] * 30
    assert np.allclose(trace.states, x0)
    assert np.allclose(trace.tau, 0.1)
    assert np.allclose(trace.V, 25.0)


def test_kmax_one_samples_every_period(example_plant, kmax_one_trigger):
    trace = simulate(example_plant, kmax_one_trigger, "petc", [1.0, 0.0], steps=40, seed=3)
    assert trace.k.tolist() == [1] * 40
    assert trace.t_steps.tolist() == list(range(40))
    assert trace.metadata["seed"] == 3
    assert trace.metadata["policy"] == "petc"


def test_times_accumulate_exactly(example_plant, example_trigger):
    trace = simulate(example_plant, example_trigger, "petc", [1.0, 1.0], steps=200)
    assert np.array_equal(trace.t_steps[1:], trace.t_steps[:-1] + trace.k[:-1])


def test_petc_samples_at_the_deadline(example_plant, example_trigger):
    X0 = random_unit_vectors(2, 5, np.random.default_rng(18))
    traces = simulate_batch(example_plant, example_trigger, "petc", X0, steps=100)
    oracle = get_oracle(example_plant, example_trigger)
    for trace in traces:
        assert np.array_equal(trace.k, oracle.deadlines(trace.directions))
        assert verify_deadline_safety(trace, example_plant, example_trigger)


def test_states_follow_the_transition(example_plant, example_trigger):
    trace = simulate(example_plant, example_trigger, "petc", [0.5, -0.2], steps=20)
    oracle = get_oracle(example_plant, example_trigger)
    states = trace.states
    for i in range(19):
        expected = oracle.transition(int(trace.k[i])) @ states[i]
        assert np.allclose(states[i + 1], expected, rtol=1e-9, atol=1e-12)


def test_edited_trace_is_unsafe(example_plant, example_trigger):
    trace = simulate(example_plant, example_trigger, "petc", [1.0, 0.0], steps=20)
    trace.k = trace.k.copy()
    trace.k[7] = example_trigger.kmax + 1
    assert not verify_deadline_safety(trace, example_plant, example_trigger)

    trace.k[7] = 0
    assert not verify_deadline_safety(trace, example_plant, example_trigger)


def test_unstable_plant_diverges():
    plant = Plant(A=np.eye(2) * 50.0, B=np.zeros((2, 1)), K_fb=np.zeros((1, 2)))
    trig = TriggerSpec(Q=-np.eye(4), h=1.0, kmax=2)
    with pytest.raises(DivergedError):
        simulate(plant, trig, "petc", [1.0, 0.0], steps=100)


def test_stable_runs_do_not_underflow(example_plant, kmax_one_trigger):
    trace = simulate(example_plant, kmax_one_trigger, "petc", [1.0, 0.0], steps=5000)
    assert np.all(np.isfinite(trace.log_norm))
    assert np.allclose(np.linalg.norm(trace.directions, axis=1), 1.0)


def test_running_average_converges_for_periodic_sequences():
    rng = np.random.default_rng(19)
    n = 99_960
    for _ in range(50):
        period = int(rng.integers(1, 7))
        pattern = rng.integers(1, 12, size=period) * 0.1
        c = float(rng.uniform(0.0, 0.01))
        taus = np.resize(pattern, n) + c * 2.0 ** -np.arange(n, dtype=float)

        r = running_average(taus)
        assert abs(r[n - 1] - pattern.mean()) < 1e-6


def test_running_average_of_constant_sequence():
    assert np.allclose(running_average([0.3] * 10), 0.3)


def test_averages_reject_empty_traces():
    with pytest.raises(InvalidSpecError):
        running_average([])
    with pytest.raises(InvalidSpecError):
        tail_average([])


def test_tail_average_skips_the_transient():
    taus = [10.0] * 50 + [1.0] * 50
    assert tail_average(taus) == 1.0
    assert tail_average(taus, fraction=1.0) == 5.5


def test_estimate_saist_with_constant_deadline(example_plant, never_firing_trigger):
    estimate = estimate_saist(example_plant, never_firing_trigger, "petc", n_init=4, steps=10)
    assert estimate == pytest.approx(0.3)


def test_unknown_policy_name(example_plant, example_trigger):
    with pytest.raises(InvalidSpecError):
        make_policy("greedy", example_plant, example_trigger)


def test_steps_must_be_positive(example_plant, example_trigger):
    with pytest.raises(InvalidSpecError):
        simulate(example_plant, example_trigger, "petc", [1.0, 0.0], steps=0)


def test_trace_from_states():
    states = np.array([[3.0, 4.0], [0.6, 0.8]])
    trace = Trace.from_states([2, 3], states, h=0.1, P=np.eye(2))
    assert np.allclose(trace.states, states)
    assert np.allclose(trace.V, [25.0, 1.0])
    assert np.allclose(trace.t, [0.0, 0.2])
    assert trace.h_exact.denominator == 10


def test_lyapunov_function_decreases_at_every_sample(example_plant, example_trigger):
    X0 = random_unit_vectors(2, 20, np.random.default_rng(5))
    P = np.asarray(example_trigger.P)
    for trace in simulate_batch(example_plant, example_trigger, "petc", X0, 300):
        # En escala logarítmica para que la cola estable no se haga cero.
        log_V = np.log(np.einsum("mi,ij,mj->m", trace.directions, P, trace.directions)) + 2.0 * trace.log_norm
        assert (np.diff(log_V) < 0).all(), trace.metadata["x0"]
