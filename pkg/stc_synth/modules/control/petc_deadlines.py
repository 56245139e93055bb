# stc_synth/modules/control/petc_deadlines.py
"""
Deadlines del PETC de referencia.

Responsabilidad:
- Calcular el deadline d(x) (primer chequeo con la condición violada, o kmax).
- Calcular la palabra σ = k₁…k_l de los siguientes l deadlines que generaría el PETC.
- Decidir pertenencia a la región Q_σ.

Notas:
- Las formas N(hk) y las matrices M(hk) se precalculan una sola vez por
  (planta, trigger) en DeadlineOracle y se reutilizan mediante get_oracle.
- Las operaciones por lotes trabajan sobre matrices (m, n_x) de estados.
- En la frontera xᵀN x = 0 se considera que la condición no se ha violado
  (desigualdad estricta); x = 0 recibe deadline kmax.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np

from stc_synth.errors import InvalidSpecError
from stc_synth.modules.control.lti_core import (
    Plant,
    TriggerSpec,
    hold_transition,
    step_trigger_form,
)


@dataclass(frozen=True, order=True)
class DeadlineWord:
    """
    Secuencia de índices de deadline k₁…k_l. Es el estado abstracto del modelo
    de tráfico; se compara por valor y se puede usar como llave de diccionario.
    """

    indices: tuple[int, ...]

    def __post_init__(self):
        indices = tuple(int(k) for k in self.indices)
        if not indices:
            raise InvalidSpecError("Una palabra de deadlines necesita al menos una letra.")
        object.__setattr__(self, "indices", indices)

    @classmethod
    def of(cls, *indices: int) -> "DeadlineWord":
        return cls(tuple(indices))

    @property
    def first(self) -> int:
        return self.indices[0]

    def prefix(self, length: int) -> "DeadlineWord":
        return DeadlineWord(self.indices[:length])

    def in_range(self, kmax: int) -> bool:
        return all(1 <= k <= kmax for k in self.indices)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self) -> Iterator[int]:
        return iter(self.indices)

    def __str__(self) -> str:
        return "-".join(str(k) for k in self.indices)


class DeadlineOracle:
    """
    Deadlines precalculados de un PETC.

    Guarda M(hk) para k = 1..kmax y N(hk) para k = 1..kmax-1 (en k = kmax el
    chequeo siempre dispara, así que su forma no se necesita).
    """

    def __init__(self, plant: Plant, trig: TriggerSpec):
        trig.check_plant(plant)

        self.plant = plant
        self.trig = trig
        self.kmax = trig.kmax
        self.n_x = plant.n_x

        self._M = np.stack([
            hold_transition(plant, trig.h * k)
            for k in range(1, self.kmax + 1)
        ])

        if self.kmax > 1:
            self._N = np.stack([
                step_trigger_form(plant, trig, k).N
                for k in range(1, self.kmax)
            ])
        else:
            self._N = np.zeros((0, self.n_x, self.n_x))

        self._M.setflags(write=False)
        self._N.setflags(write=False)

    def transition(self, k: int) -> np.ndarray:
        return self._M[k - 1]

    def form(self, k: int) -> np.ndarray:
        return self._N[k - 1]

    def deadlines(self, X: np.ndarray) -> np.ndarray:
        """Deadline de cada fila de X (m, n_x)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        m = X.shape[0]

        if self.kmax == 1:
            return np.ones(m, dtype=np.int64)

        values = np.einsum("mi,kij,mj->mk", X, self._N, X)
        violated = values > 0
        any_violated = violated.any(axis=1)
        first = violated.argmax(axis=1) + 1

        return np.where(any_violated, first, self.kmax).astype(np.int64)

    def deadline(self, x: np.ndarray) -> int:
        return int(self.deadlines(np.asarray(x, dtype=float)[None, :])[0])

    def propagate(self, X: np.ndarray, ks: np.ndarray, normalize: bool = True) -> np.ndarray:
        """
        Aplica M(h kᵢ) a cada fila. Con normalize=True las filas quedan de norma 1
        (los deadlines son invariantes a escala); las filas nulas se mantienen nulas.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        ks = np.asarray(ks, dtype=np.int64)
        Y = np.einsum("mij,mj->mi", self._M[ks - 1], X)

        if normalize:
            norms = np.linalg.norm(Y, axis=1)
            safe = np.where(norms > 0, norms, 1.0)
            Y = Y / safe[:, None]

        return Y

    def sequences(self, X: np.ndarray, l: int) -> np.ndarray:
        """
        Palabras de longitud l de cada fila de X, como matriz (m, l) de enteros.
        Cuesta a lo sumo l·kmax evaluaciones de formas cuadráticas por fila.
        """
        if l < 1:
            raise InvalidSpecError(f"l debe ser >= 1; se recibió {l}.")

        X = np.atleast_2d(np.asarray(X, dtype=float))
        norms = np.linalg.norm(X, axis=1)
        current = X / np.where(norms > 0, norms, 1.0)[:, None]

        words = np.empty((X.shape[0], l), dtype=np.int64)
        for i in range(l):
            ks = self.deadlines(current)
            words[:, i] = ks
            if i + 1 < l:
                current = self.propagate(current, ks)

        return words

    def sequence(self, x: np.ndarray, l: int) -> DeadlineWord:
        row = self.sequences(np.asarray(x, dtype=float)[None, :], l)[0]
        return DeadlineWord(tuple(int(k) for k in row))

    def in_region(self, x: np.ndarray, sigma: DeadlineWord) -> bool:
        if not sigma.in_range(self.kmax):
            return False
        return self.sequence(x, len(sigma)) == sigma

    def region_constraints(self, sigma: DeadlineWord) -> list[tuple[np.ndarray, bool]]:
        """
        Cadena de desigualdades cuadráticas que define Q_σ en las coordenadas de x.

        Cada elemento es (N, strict):
        - strict=True  -> xᵀ N x > 0   (la condición se viola en el deadline)
        - strict=False -> xᵀ N x <= 0  (la condición se cumple antes del deadline)
        """
        if not sigma.in_range(self.kmax):
            raise InvalidSpecError(f"La palabra {sigma} tiene letras fuera de 1..{self.kmax}.")

        constraints: list[tuple[np.ndarray, bool]] = []
        T = np.eye(self.n_x)

        for k in sigma:
            for j in range(1, k):
                constraints.append((T.T @ self.form(j) @ T, False))
            if k < self.kmax:
                constraints.append((T.T @ self.form(k) @ T, True))
            T = self.transition(k) @ T

        return constraints


@lru_cache(maxsize=32)
def get_oracle(plant: Plant, trig: TriggerSpec) -> DeadlineOracle:
    """Oráculo compartido por (planta, trigger); ambos se comparan por contenido."""
    return DeadlineOracle(plant, trig)


def deadline(plant: Plant, trig: TriggerSpec, x) -> int:
    """
    Índice k del deadline d(x) = hk: el primer j < kmax con xᵀN(hj)x > 0,
    o kmax si no hay ninguno.
    """
    return get_oracle(plant, trig).deadline(np.asarray(x, dtype=float))


def deadline_sequence(plant: Plant, trig: TriggerSpec, x, l: int) -> DeadlineWord:
    """
    Palabra σ con (x, σ) ∈ R_l: xᵢ₊₁ = M(h kᵢ) xᵢ, kᵢ = deadline(xᵢ).
    """
    return get_oracle(plant, trig).sequence(np.asarray(x, dtype=float), l)


def in_region(plant: Plant, trig: TriggerSpec, x, sigma: DeadlineWord) -> bool:
    """True si deadline_sequence(x, len(σ)) = σ."""
    return get_oracle(plant, trig).in_region(np.asarray(x, dtype=float), sigma)


def sphere_samples(n_x: int, count: int, seed: int) -> np.ndarray:
    """
    Muestras de la esfera unitaria para descubrir regiones.

    - n_x = 2: barrido determinista de ángulos uniformes (punto medio de cada celda).
    - n_x > 2: muestras uniformes con semilla (gaussianas normalizadas).
    """
    if count < 1:
        raise InvalidSpecError(f"El presupuesto de muestras debe ser >= 1; se recibió {count}.")

    if n_x == 1:
        signs = np.where(np.arange(count) % 2 == 0, 1.0, -1.0)
        return signs[:, None]

    if n_x == 2:
        angles = 2.0 * np.pi * (np.arange(count) + 0.5) / count
        return np.column_stack([np.cos(angles), np.sin(angles)])

    return random_unit_vectors(n_x, count, np.random.default_rng(seed))


def random_unit_vectors(n_x: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Vectores uniformes en la esfera unitaria de R^n_x."""
    X = rng.standard_normal((count, n_x))
    norms = np.linalg.norm(X, axis=1)
    norms = np.where(norms > 0, norms, 1.0)
    return X / norms[:, None]
