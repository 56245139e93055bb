# stc_synth/modules/abstraccion/witness_backends.py
"""
Backends de testigos para las transiciones del modelo de tráfico.

Un backend responde: ¿existe x con palabra σ tal que M(hu)x tiene palabra σ'?
Todo testigo devuelto se verifica de nuevo con in_region antes de usarse.

- SamplingWitnessBackend: propaga los puntos de σ que se le pasan (por defecto).
- Z3WitnessBackend: además consulta a z3 (aritmética real no lineal) por
  cada palabra conocida que el muestreo no alcanzó. Requiere z3-solver.
"""
from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from fractions import Fraction
from typing import TYPE_CHECKING, Optional

import numpy as np

from stc_synth.config.settings import Z3_TIMEOUT_MS
from stc_synth.errors import AbstractionError, ConfigError
from stc_synth.modules.control.petc_deadlines import DeadlineOracle, DeadlineWord

if TYPE_CHECKING:
    from stc_synth.modules.abstraccion.traffic_abstraction import StateCatalog

logger = logging.getLogger(__name__)

# palabra sucesora -> (puntos de σ, sus imágenes por M(hu))
Successors = dict[DeadlineWord, tuple[np.ndarray, np.ndarray]]


class WitnessBackend(ABC):
    """Interfaz común. bind() se llama una vez antes de construir transiciones."""

    oracle: DeadlineOracle
    l: int
    catalog: "StateCatalog"

    def bind(self, oracle: DeadlineOracle, l: int, catalog: "StateCatalog") -> None:
        self.oracle = oracle
        self.l = l
        self.catalog = catalog

    @abstractmethod
    def find_witness(self, sigma: DeadlineWord, u: int, sigma_next: DeadlineWord) -> Optional[np.ndarray]:
        """x en Q_σ con M(hu)x en Q_σ', o None si no se encontró."""

    @abstractmethod
    def successor_witnesses(
        self,
        sigma: DeadlineWord,
        u: int,
        points: Optional[np.ndarray] = None,
    ) -> Successors:
        """
        Palabras sucesoras certificadas. Cada una trae (x, M(hu)x) en filas:
        los puntos de σ usados y sus sucesores. Sin points se usan los testigos
        guardados de σ.
        """

    def _check_bound(self) -> None:
        if not hasattr(self, "oracle"):
            raise AbstractionError("El backend de testigos no fue inicializado con bind().")


class SamplingWitnessBackend(WitnessBackend):
    """Empuja cada punto de σ por M(hu) y agrupa por la palabra resultante."""

    def successor_witnesses(
        self,
        sigma: DeadlineWord,
        u: int,
        points: Optional[np.ndarray] = None,
    ) -> Successors:
        self._check_bound()

        if points is None:
            points = self.catalog.witnesses(sigma)
        if len(points) == 0:
            raise AbstractionError(f"El estado {sigma} no tiene testigos.")

        successors = self.oracle.propagate(points, np.full(len(points), u))
        words = self.oracle.sequences(successors, self.l)

        rows, inverse = np.unique(words, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        return {
            DeadlineWord(tuple(row.tolist())): (points[inverse == i], successors[inverse == i])
            for i, row in enumerate(rows)
        }

    def find_witness(self, sigma: DeadlineWord, u: int, sigma_next: DeadlineWord) -> Optional[np.ndarray]:
        self._check_bound()

        witnesses = self.catalog.witnesses(sigma)
        if len(witnesses) == 0:
            return None

        successors = self.oracle.propagate(witnesses, np.full(len(witnesses), u))
        words = self.oracle.sequences(successors, self.l)
        target = np.asarray(sigma_next.indices)
        hits = np.flatnonzero((words == target).all(axis=1))

        return witnesses[hits[0]].copy() if len(hits) else None


def _rational(value: float):
    import z3

    frac = Fraction(float(value))
    return z3.Q(frac.numerator, frac.denominator)


class Z3WitnessBackend(SamplingWitnessBackend):
    """
    Completa las transiciones del muestreo con consultas exactas.

    Cada consulta codifica las cadenas de desigualdades de Q_σ y de Q_σ'
    (esta última en coordenadas de x vía M(hu)) más x ≠ 0 en la caja [-1, 1]^n.
    """

    def __init__(self, timeout_ms: int = Z3_TIMEOUT_MS):
        try:
            import z3  # noqa: F401
        except ImportError as exc:
            raise ConfigError(
                "El backend exacto requiere el paquete z3-solver (pip install z3-solver)."
            ) from exc

        self.timeout_ms = timeout_ms
        self.queries = 0
        self.unknown = 0
        self._asked: set[tuple[DeadlineWord, int, DeadlineWord]] = set()

    def _quadratic(self, xs, N: np.ndarray):
        import z3

        n = len(xs)
        terms = []
        for i in range(n):
            for j in range(i, n):
                coef = N[i, i] if i == j else N[i, j] + N[j, i]
                if coef != 0.0:
                    terms.append(_rational(coef) * xs[i] * xs[j])
        return z3.Sum(terms) if terms else z3.RealVal(0)

    def find_witness(self, sigma: DeadlineWord, u: int, sigma_next: DeadlineWord) -> Optional[np.ndarray]:
        import z3

        self._check_bound()
        if not (sigma.in_range(self.oracle.kmax) and sigma_next.in_range(self.oracle.kmax)):
            return None
        if not (1 <= u <= sigma.first):
            return None

        n = self.oracle.n_x
        xs = [z3.Real(f"x{i}") for i in range(n)]
        solver = z3.Solver()
        solver.set("timeout", self.timeout_ms)

        M_u = self.oracle.transition(u)
        constraints = [(N, strict) for N, strict in self.oracle.region_constraints(sigma)]
        constraints += [(M_u.T @ N @ M_u, strict) for N, strict in self.oracle.region_constraints(sigma_next)]

        for N, strict in constraints:
            q = self._quadratic(xs, N)
            solver.add(q > 0 if strict else q <= 0)

        solver.add(z3.Or([x != 0 for x in xs]))
        for x in xs:
            solver.add(x >= -1, x <= 1)

        self.queries += 1
        result = solver.check()
        if result == z3.unknown:
            self.unknown += 1
            logger.debug("[ABSTRACCION][Z3] consulta sin respuesta %s -%s-> %s", sigma, u, sigma_next)
            return None
        if result != z3.sat:
            return None

        model = solver.model()
        point = np.empty(n)
        for i, x in enumerate(xs):
            value = model.eval(x, model_completion=True)
            if not z3.is_rational_value(value):
                value = value.approx(20)
            point[i] = float(value.as_fraction())

        if not (self.oracle.in_region(point, sigma)
                and self.oracle.in_region(self.oracle.propagate(point, [u])[0], sigma_next)):
            logger.debug("[ABSTRACCION][Z3] testigo en la frontera descartado %s -%s-> %s", sigma, u, sigma_next)
            return None

        return point

    def successor_witnesses(
        self,
        sigma: DeadlineWord,
        u: int,
        points: Optional[np.ndarray] = None,
    ) -> Successors:
        found = super().successor_witnesses(sigma, u, points)

        for candidate in self.catalog.words():
            key = (sigma, u, candidate)
            if candidate in found or key in self._asked:
                continue
            self._asked.add(key)
            point = self.find_witness(sigma, u, candidate)
            if point is not None:
                found[candidate] = (point.reshape(1, -1), self.oracle.propagate(point, [u]))

        return found


def make_backend(name: str) -> WitnessBackend:
    """'sampling' (por defecto) o 'z3'."""
    if name == "sampling":
        return SamplingWitnessBackend()
    if name == "z3":
        return Z3WitnessBackend()
    raise ConfigError(f"Backend de testigos desconocido: {name!r}.")
