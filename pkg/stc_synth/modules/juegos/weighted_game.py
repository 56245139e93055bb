# stc_synth/modules/juegos/weighted_game.py
"""
Sistema de transición ponderado / juego de pago medio.

El jugador 0 elige la acción u en cada estado; el jugador 1 elige la arista
(src, u, dst, w) entre las que comparten (src, u). Los pesos son enteros: en los
modelos de tráfico se guarda u y el valor físico se recupera como h·u.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import Any, Callable, Hashable, Iterable, Mapping, Optional

import numpy as np

from stc_synth.errors import MalformedGameError

Edge = tuple[int, int, int, int]


def _normalize_edges(edges: Iterable[Iterable[int]], num_states: int) -> tuple[Edge, ...]:
    out: set[Edge] = set()

    for edge in edges:
        src, u, dst, w = (int(v) for v in edge)
        if not (0 <= src < num_states and 0 <= dst < num_states):
            raise MalformedGameError(
                f"Arista ({src}, {u}, {dst}, {w}) fuera del rango de estados 0..{num_states - 1}."
            )
        out.add((src, u, dst, w))

    return tuple(sorted(out))


@dataclass(frozen=True, eq=False)
class WeightedGame:
    """
    Juego con estados indexados densamente 0..n-1.

    labels: etiqueta por estado (DeadlineWord en abstracciones, cualquier
    hashable en juegos genéricos).
    output: salida H(σ) = σ(1) por estado; None en juegos genéricos.
    witnesses: testigos concretos por estado (solo abstracciones).
    """

    labels: tuple[Hashable, ...]
    edges: tuple[Edge, ...]
    initial: frozenset[int]
    output: Optional[tuple[int, ...]] = None
    witnesses: Optional[tuple[np.ndarray, ...]] = None
    l: Optional[int] = None
    h: Optional[float] = None
    kmax: Optional[int] = None
    h_exact: Optional[Fraction] = field(default=None)

    @classmethod
    def from_edges(
        cls,
        num_states: int,
        edges: Iterable[Iterable[int]],
        initial: Optional[Iterable[int]] = None,
        labels: Optional[Iterable[Hashable]] = None,
        **extra: Any,
    ) -> "WeightedGame":
        """Construye un juego genérico; por defecto todos los estados son iniciales."""
        labels = tuple(labels) if labels is not None else tuple(range(num_states))
        if len(labels) != num_states:
            raise MalformedGameError(
                f"Se recibieron {len(labels)} etiquetas para {num_states} estados."
            )

        initial_set = frozenset(int(s) for s in initial) if initial is not None else frozenset(range(num_states))
        if not initial_set:
            raise MalformedGameError("El juego necesita al menos un estado inicial.")
        if any(not (0 <= s < num_states) for s in initial_set):
            raise MalformedGameError("Hay estados iniciales fuera de rango.")

        return cls(
            labels=labels,
            edges=_normalize_edges(edges, num_states),
            initial=initial_set,
            **extra,
        )

    # ------------------------------------------------------------------
    # Consultas
    # ------------------------------------------------------------------
    @property
    def num_states(self) -> int:
        return len(self.labels)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def is_abstraction(self) -> bool:
        return self.output is not None

    @cached_property
    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(src, u, dst, w) como arreglos int64, en el orden de self.edges."""
        if not self.edges:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty, empty, empty

        data = np.asarray(self.edges, dtype=np.int64)
        arrays = tuple(np.ascontiguousarray(data[:, i]) for i in range(4))
        for arr in arrays:
            arr.setflags(write=False)
        return arrays  # type: ignore[return-value]

    @cached_property
    def _label_index(self) -> dict[Hashable, int]:
        return {label: i for i, label in enumerate(self.labels)}

    @cached_property
    def _actions_by_state(self) -> dict[int, tuple[int, ...]]:
        actions: dict[int, set[int]] = {}
        for src, u, _, _ in self.edges:
            actions.setdefault(src, set()).add(u)
        return {s: tuple(sorted(us)) for s, us in actions.items()}

    def index_of(self, label: Hashable) -> Optional[int]:
        return self._label_index.get(label)

    def actions(self, state: int) -> tuple[int, ...]:
        return self._actions_by_state.get(state, ())

    def successors(self, state: int, action: int) -> list[tuple[int, int]]:
        """Pares (dst, w) de las aristas (state, action, ·, ·)."""
        return [(dst, w) for src, u, dst, w in self.edges if src == state and u == action]

    def max_abs_weight(self) -> int:
        if not self.edges:
            return 0
        return int(np.abs(self.edge_arrays[3]).max())

    def physical(self, steps: Fraction) -> Fraction:
        """Convierte un valor en pasos de peso a tiempo físico (h·valor)."""
        if self.h_exact is None:
            return steps
        return self.h_exact * steps

    # ------------------------------------------------------------------
    # Validaciones
    # ------------------------------------------------------------------
    def require_non_blocking(self) -> None:
        blocking = [s for s in range(self.num_states) if not self.actions(s)]
        if blocking:
            preview = ", ".join(str(self.labels[s]) for s in blocking[:5])
            raise MalformedGameError(
                f"El juego es bloqueante: {len(blocking)} estado(s) sin aristas salientes ({preview})."
            )

    def validate_abstraction(self) -> None:
        """
        Invariantes de un modelo de tráfico:
        - no bloqueante
        - peso = acción en cada arista
        - acciones de σ exactamente 1..σ(1)
        """
        self.require_non_blocking()
        if self.output is None:
            raise MalformedGameError("El juego no tiene salida H; no es un modelo de tráfico.")

        for src, u, dst, w in self.edges:
            if w != u:
                raise MalformedGameError(f"Arista ({src}, {u}, {dst}) con peso {w} distinto de la acción.")
            if not (1 <= u <= self.output[src]):
                raise MalformedGameError(
                    f"Acción {u} fuera de 1..{self.output[src]} en el estado {self.labels[src]}."
                )

        for s in range(self.num_states):
            if self.actions(s) != tuple(range(1, self.output[s] + 1)):
                raise MalformedGameError(f"El estado {self.labels[s]} no tiene el rango completo de acciones.")

    # ------------------------------------------------------------------
    # Submodelos
    # ------------------------------------------------------------------
    def filter_edges(self, keep: Callable[[Edge], bool]) -> "WeightedGame":
        return replace(self, edges=tuple(e for e in self.edges if keep(e)))

    def restrict(self, strategy: Mapping[int, int]) -> "WeightedGame":
        """Deja solo las aristas con u = strategy[src]. El resultado debe seguir siendo no bloqueante."""
        restricted = self.filter_edges(lambda e: strategy.get(e[0]) == e[1])
        restricted.require_non_blocking()
        return restricted

    def with_initial(self, initial: Iterable[int]) -> "WeightedGame":
        return replace(self, initial=frozenset(int(s) for s in initial))

    def negated(self) -> "WeightedGame":
        """Mismo grafo con pesos cambiados de signo (ciclo medio máximo vía mínimo)."""
        return replace(self, edges=tuple(sorted((s, u, d, -w) for s, u, d, w in self.edges)))
