"""
Fixtures compartidas: el sistema de ejemplo de 2 estados y plantas de juguete.
"""
import numpy as np
import pytest

from stc_synth.modules.control.lti_core import Plant, TriggerSpec, predictive_trigger


EXAMPLE_A = [[0.0, 1.0], [-2.0, 3.0]]
EXAMPLE_B = [[0.0], [1.0]]
EXAMPLE_K = [[1.0, -4.0]]
EXAMPLE_P = [[1.0, 0.25], [0.25, 1.0]]
EXAMPLE_Q_LYAP = [[0.5, 0.25], [0.25, 1.5]]
EXAMPLE_H = 0.1
EXAMPLE_KMAX = 20


@pytest.fixture
def example_plant():
    return Plant(A=EXAMPLE_A, B=EXAMPLE_B, K_fb=EXAMPLE_K)


@pytest.fixture
def example_trigger(example_plant):
    return predictive_trigger(example_plant, EXAMPLE_P, EXAMPLE_Q_LYAP, 0.5, EXAMPLE_H, EXAMPLE_KMAX)


@pytest.fixture
def static_plant():
    """Planta congelada: A = 0, B = 0. El estado nunca cambia."""
    return Plant(A=np.zeros((2, 2)), B=np.zeros((2, 1)), K_fb=np.zeros((1, 2)))


@pytest.fixture
def kmax_one_trigger():
    return TriggerSpec(Q=-np.eye(4), h=0.1, kmax=1)


@pytest.fixture
def never_firing_trigger():
    """Q definida negativa: la condición nunca se viola antes de kmax."""
    return TriggerSpec(Q=-np.eye(4), h=0.05, kmax=6)


def example_config_document(**run):
    document = {
        "plant": {"A": EXAMPLE_A, "B": EXAMPLE_B, "K": EXAMPLE_K},
        "trigger": {
            "kind": "predictive_lyapunov",
            "P": EXAMPLE_P,
            "Q_lyap": EXAMPLE_Q_LYAP,
            "rho": 0.5,
        },
        "h": EXAMPLE_H,
        "kmax": EXAMPLE_KMAX,
        "run": {"l_max": 2, "budget": 400, "seed": 7, "n_init": 3, "steps": 50},
    }
    document["run"].update(run)
    return document
