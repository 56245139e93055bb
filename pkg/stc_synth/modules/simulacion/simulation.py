# stc_synth/modules/simulacion/simulation.py
"""
Simulación en lazo cerrado en los instantes de muestreo:

    x_{i+1} = M(h k_i) x_i,   k_i = política(x_i)

La simulación avanza sobre direcciones normalizadas y acumula log‖x_i‖, así las
corridas largas y estables no llegan a cero por underflow. Los estados físicos
x_i y V(x_i) se reconstruyen al exportar.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional, Protocol, Sequence, Union

import numpy as np

from stc_synth.config.settings import DEFAULT_SEED, DIVERGENCE_NORM
from stc_synth.errors import DivergedError, InvalidSpecError
from stc_synth.modules.control.lti_core import Plant, TriggerSpec
from stc_synth.modules.control.petc_deadlines import get_oracle, random_unit_vectors
from stc_synth.modules.sintesis.synthesis import StrategyTable, refine_lookup_batch

logger = logging.getLogger(__name__)


class Policy(Protocol):
    name: str

    def choose_batch(self, X: np.ndarray) -> np.ndarray:
        ...


class PetcPolicy:
    """Muestrea en el deadline (regla greedy del PETC)."""

    name = "petc"

    def __init__(self, plant: Plant, trig: TriggerSpec):
        self._oracle = get_oracle(plant, trig)

    def choose_batch(self, X: np.ndarray) -> np.ndarray:
        return self._oracle.deadlines(X)


class StrategyPolicy:
    """SDSS sintetizada: consulta la tabla con la palabra de longitud l."""

    def __init__(self, strategy: StrategyTable, plant: Plant, trig: TriggerSpec):
        self.strategy = strategy
        self.plant = plant
        self.trig = trig
        self.name = f"sdss-l{strategy.l}"

    def choose_batch(self, X: np.ndarray) -> np.ndarray:
        return refine_lookup_batch(self.strategy, self.plant, self.trig, X)


def make_policy(policy: Union[str, StrategyTable, Policy], plant: Plant, trig: TriggerSpec) -> Policy:
    if isinstance(policy, StrategyTable):
        return StrategyPolicy(policy, plant, trig)
    if isinstance(policy, str):
        if policy != "petc":
            raise InvalidSpecError(f"Política desconocida: {policy!r}.")
        return PetcPolicy(plant, trig)
    return policy


@dataclass
class Trace:
    """
    Traza de una simulación. Los tiempos se guardan como múltiplos enteros de h
    (t_steps), así t_{i+1} = t_i + tau_i se cumple exactamente.
    """

    k: np.ndarray
    directions: np.ndarray
    log_norm: np.ndarray
    h: float
    h_exact: Fraction
    P: Optional[np.ndarray] = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.k)

    @property
    def t_steps(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.k)[:-1]]).astype(np.int64)

    @property
    def t(self) -> np.ndarray:
        return self.t_steps * self.h

    @property
    def tau(self) -> np.ndarray:
        return self.k * self.h

    @property
    def states(self) -> np.ndarray:
        with np.errstate(over="ignore", under="ignore"):
            return self.directions * np.exp(self.log_norm)[:, None]

    @property
    def V(self) -> Optional[np.ndarray]:
        if self.P is None:
            return None
        quad = np.einsum("mi,ij,mj->m", self.directions, self.P, self.directions)
        with np.errstate(over="ignore", under="ignore"):
            return quad * np.exp(2.0 * self.log_norm)

    @property
    def rows(self) -> list[tuple[int, float, float, int, np.ndarray, Optional[float]]]:
        V = self.V
        states = self.states
        return [
            (i, float(t), float(tau), int(k), states[i], None if V is None else float(V[i]))
            for i, (t, tau, k) in enumerate(zip(self.t, self.tau, self.k))
        ]

    @classmethod
    def from_states(
        cls,
        k: Sequence[int],
        states: np.ndarray,
        h: float,
        P: Optional[np.ndarray] = None,
        metadata: Optional[dict[str, Any]] = None,
    ) -> "Trace":
        """Reconstruye una traza a partir de estados físicos (p. ej. un CSV exportado)."""
        states = np.atleast_2d(np.asarray(states, dtype=float))
        norms = np.linalg.norm(states, axis=1)
        safe = np.where(norms > 0, norms, 1.0)
        with np.errstate(divide="ignore"):
            log_norm = np.log(norms)
        return cls(
            k=np.asarray(k, dtype=np.int64),
            directions=states / safe[:, None],
            log_norm=log_norm,
            h=float(h),
            h_exact=Fraction(str(h)),
            P=P,
            metadata=dict(metadata or {}),
        )


def simulate_batch(
    plant: Plant,
    trig: TriggerSpec,
    policy: Union[str, StrategyTable, Policy],
    X0: np.ndarray,
    steps: int,
    metadata: Optional[dict[str, Any]] = None,
) -> list[Trace]:
    """Simula varias condiciones iniciales a la vez (una traza por fila de X0)."""
    if steps < 1:
        raise InvalidSpecError(f"steps debe ser >= 1; se recibió {steps}.")

    oracle = get_oracle(plant, trig)
    policy = make_policy(policy, plant, trig)

    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    m, n = X0.shape
    norms = np.linalg.norm(X0, axis=1)
    current = X0 / np.where(norms > 0, norms, 1.0)[:, None]
    with np.errstate(divide="ignore"):
        log_norm = np.log(norms)

    limit = math.log(DIVERGENCE_NORM)
    ks = np.empty((m, steps), dtype=np.int64)
    directions = np.empty((m, steps, n))
    log_norms = np.empty((m, steps))

    for i in range(steps):
        k = policy.choose_batch(current)
        ks[:, i] = k
        directions[:, i] = current
        log_norms[:, i] = log_norm

        nxt = oracle.propagate(current, k, normalize=False)
        growth = np.linalg.norm(nxt, axis=1)
        with np.errstate(divide="ignore"):
            log_norm = log_norm + np.log(np.where(norms > 0, growth, 1.0))
        current = nxt / np.where(growth > 0, growth, 1.0)[:, None]

        diverged = np.isnan(log_norm) | (log_norm > limit) | ~np.isfinite(current).all(axis=1)
        if diverged.any():
            row = int(np.flatnonzero(diverged)[0])
            raise DivergedError(
                f"La simulación divergió en el paso {i + 1} (condición inicial {row}, "
                f"política {policy.name}): ‖x‖ supera {DIVERGENCE_NORM:g}."
            )

    P = trig.P
    base = dict(metadata or {})
    traces = []
    for j in range(m):
        meta = dict(base)
        meta.update({"policy": policy.name, "x0": X0[j].tolist()})
        traces.append(Trace(
            k=ks[j],
            directions=directions[j],
            log_norm=log_norms[j],
            h=trig.h,
            h_exact=trig.h_exact,
            P=P,
            metadata=meta,
        ))

    return traces


def simulate(
    plant: Plant,
    trig: TriggerSpec,
    policy: Union[str, StrategyTable, Policy],
    x0,
    steps: int,
    seed: Optional[int] = None,
) -> Trace:
    """Una traza desde x0. seed solo se guarda en la metadata."""
    trace = simulate_batch(plant, trig, policy, np.asarray(x0, dtype=float)[None, :], steps)[0]
    trace.metadata["seed"] = seed
    return trace


def _taus(trace_or_taus: Union[Trace, Sequence[float], np.ndarray]) -> np.ndarray:
    if isinstance(trace_or_taus, Trace):
        return trace_or_taus.tau
    return np.asarray(trace_or_taus, dtype=float)


def running_average(trace_or_taus: Union[Trace, Sequence[float], np.ndarray]) -> np.ndarray:
    """r_n = (1/(n+1)) Σ_{i<=n} tau_i."""
    taus = _taus(trace_or_taus)
    if len(taus) == 0:
        raise InvalidSpecError("running_average requiere una traza no vacía.")
    return np.cumsum(taus) / np.arange(1, len(taus) + 1)


def tail_average(trace_or_taus: Union[Trace, Sequence[float], np.ndarray], fraction: float = 0.5) -> float:
    """Promedio de la última `fraction` de la traza (descarta el transitorio)."""
    taus = _taus(trace_or_taus)
    if len(taus) == 0:
        raise InvalidSpecError("tail_average requiere una traza no vacía.")
    start = min(int(len(taus) * (1.0 - fraction)), len(taus) - 1)
    return float(np.mean(taus[start:]))


def estimate_saist(
    plant: Plant,
    trig: TriggerSpec,
    policy: Union[str, StrategyTable, Policy],
    n_init: int,
    steps: int,
    seed: int = DEFAULT_SEED,
) -> float:
    """Mínimo, sobre n_init estados iniciales de la esfera, del promedio de la mitad final."""
    if n_init < 1:
        raise InvalidSpecError(f"n_init debe ser >= 1; se recibió {n_init}.")

    X0 = random_unit_vectors(plant.n_x, n_init, np.random.default_rng(seed))
    traces = simulate_batch(plant, trig, policy, X0, steps, metadata={"seed": seed})
    estimate = min(tail_average(trace) for trace in traces)

    logger.info("[SIMULACION][SAIST] política=%s n_init=%s pasos=%s estimado=%.6f",
                traces[0].metadata["policy"], n_init, steps, estimate)
    return estimate


def verify_deadline_safety(trace: Trace, plant: Plant, trig: TriggerSpec) -> bool:
    """True si todo k_i <= deadline(x_i), recalculado de forma independiente."""
    oracle = get_oracle(plant, trig)
    deadlines = oracle.deadlines(trace.directions)
    return bool(np.all((trace.k >= 1) & (trace.k <= deadlines)))
