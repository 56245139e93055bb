"""
Pruebas del núcleo LTI: transición con entrada retenida, formas de triggering y
la condición predictiva de Lyapunov.
"""
import math

import numpy as np
import pytest

from stc_synth.errors import InvalidSpecError
from stc_synth.modules.control.lti_core import (
    Plant,
    TriggerSpec,
    build_predictive_lyapunov_Q,
    check_symmetric,
    hold_transition,
    lyapunov_derivative_form,
    lyapunov_residual,
    predictive_trigger,
    state_exponential,
    step_trigger_form,
)
from tests.conftest import EXAMPLE_P, EXAMPLE_Q_LYAP


def _taylor_hold_transition(A, B, K, tau, terms=40):
    """Σ (Aτ)^k/k! + Σ A^k τ^{k+1}/(k+1)! · BK."""
    n = A.shape[0]
    expo = np.zeros((n, n))
    integral = np.zeros((n, n))
    power = np.eye(n)
    for k in range(terms):
        expo += power * tau**k / math.factorial(k)
        integral += power * tau ** (k + 1) / math.factorial(k + 1)
        power = power @ A
    return expo + integral @ B @ K


def _random_plant(rng):
    n_x = int(rng.integers(2, 4))
    n_u = int(rng.integers(1, 3))
    return Plant(
        A=rng.uniform(-1.0, 1.0, (n_x, n_x)),
        B=rng.uniform(-1.0, 1.0, (n_x, n_u)),
        K_fb=rng.uniform(-1.0, 1.0, (n_u, n_x)),
    )


def test_hold_transition_matches_taylor_series():
    rng = np.random.default_rng(0)
    for _ in range(100):
        plant = _random_plant(rng)
        tau = float(rng.uniform(0.0, 1.0))
        expected = _taylor_hold_transition(plant.A, plant.B, plant.K_fb, tau)
        got = hold_transition(plant, tau)
        assert np.max(np.abs(got - expected)) < 1e-10, (tau, got, expected)


def test_hold_transition_at_zero_is_identity():
    rng = np.random.default_rng(1)
    plant = _random_plant(rng)
    assert np.allclose(hold_transition(plant, 0.0), np.eye(plant.n_x), atol=0.0)


def test_state_exponential_semigroup():
    rng = np.random.default_rng(2)
    for _ in range(50):
        plant = _random_plant(rng)
        s, t = rng.uniform(0.0, 1.0, 2)
        left = state_exponential(plant, s + t)
        right = state_exponential(plant, s) @ state_exponential(plant, t)
        assert np.max(np.abs(left - right)) < 1e-9


def test_static_plant_transition_is_identity(static_plant):
    for tau in (0.1, 1.0, 10.0):
        assert np.array_equal(hold_transition(static_plant, tau), np.eye(2))


def test_negative_tau_is_rejected(example_plant):
    with pytest.raises(InvalidSpecError):
        hold_transition(example_plant, -0.1)


def test_plant_dimension_errors():
    with pytest.raises(InvalidSpecError):
        Plant(A=[[0.0, 1.0]], B=[[1.0]], K_fb=[[1.0]])
    with pytest.raises(InvalidSpecError):
        Plant(A=np.eye(2), B=np.ones((3, 1)), K_fb=np.ones((1, 2)))
    with pytest.raises(InvalidSpecError):
        Plant(A=np.eye(2), B=np.ones((2, 1)), K_fb=np.ones((2, 2)))


def test_plants_compare_by_content():
    a = Plant(A=np.eye(2), B=np.ones((2, 1)), K_fb=np.ones((1, 2)))
    b = Plant(A=[[1.0, 0.0], [0.0, 1.0]], B=[[1.0], [1.0]], K_fb=[[1.0, 1.0]])
    assert a == b
    assert hash(a) == hash(b)


def test_trigger_spec_validation():
    with pytest.raises(InvalidSpecError):
        TriggerSpec(Q=np.eye(3), h=0.1, kmax=5)
    with pytest.raises(InvalidSpecError):
        TriggerSpec(Q=np.eye(4), h=0.0, kmax=5)
    with pytest.raises(InvalidSpecError):
        TriggerSpec(Q=np.eye(4), h=0.1, kmax=0)


def test_trigger_keeps_exact_period():
    trig = TriggerSpec(Q=np.eye(4), h=0.1, kmax=5)
    assert trig.h_exact.numerator == 1
    assert trig.h_exact.denominator == 10


def test_step_trigger_form_is_symmetric_and_matches_definition(example_plant, example_trigger):
    for k in (1, 5, 19):
        N = step_trigger_form(example_plant, example_trigger, k).N
        assert check_symmetric(N)

        M = hold_transition(example_plant, example_trigger.h * k)
        x = np.array([0.3, -0.7])
        lifted = np.concatenate([M @ x, x])
        assert abs(x @ N @ x - lifted @ example_trigger.Q @ lifted) < 1e-12


def test_step_trigger_form_checks_range(example_plant, example_trigger):
    with pytest.raises(InvalidSpecError):
        step_trigger_form(example_plant, example_trigger, 0)
    with pytest.raises(InvalidSpecError):
        step_trigger_form(example_plant, example_trigger, example_trigger.kmax + 1)


def test_example_lyapunov_pair_solves_the_equation(example_plant):
    residual = lyapunov_residual(example_plant, EXAMPLE_P, EXAMPLE_Q_LYAP)
    assert np.max(np.abs(residual)) < 1e-12


def test_predictive_q_is_symmetric(example_plant):
    Q = build_predictive_lyapunov_Q(example_plant, EXAMPLE_P, EXAMPLE_Q_LYAP, 0.5, 0.1)
    assert Q.shape == (4, 4)
    assert check_symmetric(Q)


def test_predictive_requires_positive_definite_matrices(example_plant):
    with pytest.raises(InvalidSpecError):
        build_predictive_lyapunov_Q(example_plant, [[1.0, 0.0], [0.0, -1.0]], EXAMPLE_Q_LYAP, 0.5, 0.1)
    with pytest.raises(InvalidSpecError):
        build_predictive_lyapunov_Q(example_plant, EXAMPLE_P, np.zeros((2, 2)), 0.5, 0.1)


def test_predictive_rejects_rho_out_of_range(example_plant):
    for rho in (0.0, 1.0, -0.5, 1.5):
        with pytest.raises(InvalidSpecError):
            build_predictive_lyapunov_Q(example_plant, EXAMPLE_P, EXAMPLE_Q_LYAP, rho, 0.1)


def test_predictive_on_static_plant_always_triggers(static_plant):
    trig = predictive_trigger(static_plant, np.eye(2), np.eye(2), 0.5, 0.1, 5)

    # Con A = 0 el único término que queda es ρ ζᵀQ_lyap ζ: semidefinida positiva.
    assert np.linalg.eigvalsh(trig.Q).min() >= -1e-12

    x = np.array([0.6, 0.8])
    N1 = step_trigger_form(static_plant, trig, 1).N
    assert x @ N1 @ x > 0


def test_predictive_trigger_keeps_lyapunov_data(example_plant, example_trigger):
    assert example_trigger.rho == 0.5
    assert np.array_equal(example_trigger.P, np.array(EXAMPLE_P))
    assert example_trigger.kmax == 20


def test_zero_trigger_matrix_gives_zero_forms(example_plant):
    trig = TriggerSpec(Q=np.zeros((4, 4)), h=0.1, kmax=5)
    for k in range(1, 6):
        assert np.array_equal(step_trigger_form(example_plant, trig, k).N, np.zeros((2, 2)))


def test_opposite_blocks_cancel_when_the_state_is_frozen(static_plant):
    Q = np.block([[np.eye(2), np.zeros((2, 2))], [np.zeros((2, 2)), -np.eye(2)]])
    trig = TriggerSpec(Q=Q, h=0.1, kmax=4)
    for k in range(1, 5):
        assert np.allclose(step_trigger_form(static_plant, trig, k).N, 0.0, atol=1e-12)


def test_held_sample_equal_to_state_never_triggers(example_plant):
    # Con x̂ = x y horizonte 0 la condición es -(1-ρ)·xᵀQ_lyap x.
    rho = 0.5
    form = lyapunov_derivative_form(example_plant, EXAMPLE_P, EXAMPLE_Q_LYAP, rho)
    Q_lyap = np.array(EXAMPLE_Q_LYAP)
    X = np.random.default_rng(21).standard_normal((100, 2))
    for x in X:
        lifted = np.concatenate([x, x])
        value = lifted @ form @ lifted
        assert value == pytest.approx(-(1 - rho) * x @ Q_lyap @ x, rel=1e-9, abs=1e-12)
        assert value < 0
