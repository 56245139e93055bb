# stc_synth/modules/abstraccion/traffic_abstraction.py
"""
Modelo de tráfico l-predictivo S_l.

Flujo:
1) discover_states: muestrea la esfera unitaria y agrupa por palabra de deadlines.
2) build_transitions: empuja TODAS las muestras de cada σ por cada u en 1..σ(1)
   y agrega (σ, u, σ', u) por cada σ' alcanzada. Las palabras nuevas que
   aparecen al propagar se agregan como estados (clausura) y se expanden.
   Después se sortean lotes frescos hasta que un lote no agrega aristas ni estados.
3) restrict_to_petc: submodelo con u = σ(1), usado para estimar el SAIST del PETC.

Los testigos se guardan normalizados (los deadlines son invariantes a escala).
"""
from __future__ import annotations

import logging
from collections import deque
from typing import Iterator, Optional

import numpy as np

from stc_synth.config.settings import (
    DEFAULT_SEED,
    REFINE_BATCH_MIN,
    REFINE_ROUNDS,
    WITNESS_CAP,
)
from stc_synth.errors import AbstractionError, InvalidSpecError
from stc_synth.modules.abstraccion.witness_backends import SamplingWitnessBackend, WitnessBackend
from stc_synth.modules.control.lti_core import Plant, TriggerSpec
from stc_synth.modules.control.petc_deadlines import (
    DeadlineWord,
    get_oracle,
    random_unit_vectors,
    sphere_samples,
)
from stc_synth.modules.juegos.weighted_game import WeightedGame

logger = logging.getLogger(__name__)

_CHUNK = 20_000


def _normalized(X: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(X, axis=1)
    return X / np.where(norms > 0, norms, 1.0)[:, None]


class StateCatalog:
    """
    Palabras descubiertas con sus muestras concretas.

    - Todas las muestras quedan en un pozo por palabra; las que todavía no se
      propagaron se entregan una sola vez con take_fresh().
    - Para exportar, cada palabra guarda a lo sumo `cap` testigos elegidos por
      reservoir sampling (algoritmo R) con semilla, más los testigos fijados
      con pin() (uno por arista descubierta).
    """

    def __init__(self, l: int, n_x: int, cap: int = WITNESS_CAP, seed: int = DEFAULT_SEED):
        if cap < 1:
            raise InvalidSpecError(f"El máximo de testigos por estado debe ser >= 1; se recibió {cap}.")

        self.l = l
        self.n_x = n_x
        self.cap = cap
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        self._witnesses: dict[DeadlineWord, list[np.ndarray]] = {}
        self._pinned: dict[DeadlineWord, list[np.ndarray]] = {}
        self._seen: dict[DeadlineWord, int] = {}
        self._fresh: dict[DeadlineWord, list[np.ndarray]] = {}

    def _reservoir(self, word: DeadlineWord, x: np.ndarray) -> None:
        stored = self._witnesses.setdefault(word, [])
        seen = self._seen.get(word, 0) + 1
        self._seen[word] = seen

        if len(stored) < self.cap:
            stored.append(x)
            return

        j = int(self._rng.integers(0, seen))
        if j < self.cap:
            stored[j] = x

    def add_points(self, word: DeadlineWord, X: np.ndarray) -> None:
        X = _normalized(np.atleast_2d(np.asarray(X, dtype=float)).reshape(-1, self.n_x))
        if len(X) == 0:
            return
        for x in X:
            self._reservoir(word, x)
        self._fresh.setdefault(word, []).append(X)

    def add_witness(self, word: DeadlineWord, x: np.ndarray) -> None:
        self.add_points(word, np.asarray(x, dtype=float).reshape(1, self.n_x))

    def add_many(self, words: np.ndarray, X: np.ndarray) -> None:
        if len(X) == 0:
            return
        rows, inverse = np.unique(words, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        for i, row in enumerate(rows):
            self.add_points(DeadlineWord(tuple(row.tolist())), X[inverse == i])

    def pin(self, word: DeadlineWord, x: np.ndarray) -> None:
        """Fija un testigo de word que el reservoir no puede reemplazar."""
        x = _normalized(np.asarray(x, dtype=float).reshape(1, self.n_x))[0]
        self._pinned.setdefault(word, []).append(x)

    def take_fresh(self, word: DeadlineWord) -> np.ndarray:
        """Muestras de word que aún no se propagaron (y las marca como usadas)."""
        blocks = self._fresh.pop(word, [])
        if not blocks:
            return np.zeros((0, self.n_x))
        return np.vstack(blocks)

    def witnesses(self, word: DeadlineWord) -> np.ndarray:
        stored = self._pinned.get(word, []) + self._witnesses.get(word, [])
        if not stored:
            return np.zeros((0, self.n_x))
        return np.vstack(stored)

    def words(self) -> list[DeadlineWord]:
        return sorted(self._witnesses)

    def samples_seen(self, word: DeadlineWord) -> int:
        return self._seen.get(word, 0)

    def __contains__(self, word: object) -> bool:
        return word in self._witnesses

    def __iter__(self) -> Iterator[DeadlineWord]:
        return iter(self.words())

    def __len__(self) -> int:
        return len(self._witnesses)


def discover_states(
    plant: Plant,
    trig: TriggerSpec,
    l: int,
    budget: int,
    seed: int = DEFAULT_SEED,
    witness_cap: int = WITNESS_CAP,
) -> StateCatalog:
    """
    X_l: palabras realizadas por `budget` muestras de la esfera unitaria.
    Barrido determinista de ángulos para n_x = 2; muestreo con semilla en otro caso.
    """
    if budget < 1:
        raise InvalidSpecError(f"El presupuesto de muestras debe ser >= 1; se recibió {budget}.")
    if l < 1:
        raise InvalidSpecError(f"l debe ser >= 1; se recibió {l}.")

    oracle = get_oracle(plant, trig)
    catalog = StateCatalog(l, plant.n_x, cap=witness_cap, seed=seed)
    samples = sphere_samples(plant.n_x, budget, seed)

    for start in range(0, budget, _CHUNK):
        chunk = samples[start:start + _CHUNK]
        catalog.add_many(oracle.sequences(chunk, l), chunk)

    logger.info("[ABSTRACCION][ESTADOS] l=%s muestras=%s estados=%s", l, budget, len(catalog))
    return catalog


def _expand(
    states: StateCatalog,
    backend: WitnessBackend,
    edges: set[tuple[DeadlineWord, int, DeadlineWord]],
) -> int:
    """
    Propaga las muestras frescas de cada palabra por todas sus acciones.
    Devuelve cuántas palabras nuevas se agregaron por clausura.
    """
    pending = deque(states.words())
    added = 0

    while pending:
        sigma = pending.popleft()
        fresh = states.take_fresh(sigma)
        if len(fresh) == 0:
            continue

        for u in range(1, sigma.first + 1):
            successors = backend.successor_witnesses(sigma, u, fresh)
            if not successors:
                raise AbstractionError(f"El estado {sigma} no tiene sucesores con la acción {u}.")

            for sigma_next, (sources, points) in successors.items():
                edge = (sigma, u, sigma_next)
                if edge not in edges:
                    edges.add(edge)
                    states.pin(sigma, sources[0])
                if sigma_next not in states:
                    states.add_points(sigma_next, points)
                    pending.append(sigma_next)
                    added += 1

    return added


def build_transitions(
    plant: Plant,
    trig: TriggerSpec,
    states: StateCatalog,
    l: int,
    backend: Optional[WitnessBackend] = None,
    refine_rounds: int = REFINE_ROUNDS,
    refine_batch: Optional[int] = None,
) -> WeightedGame:
    """
    E_l: (σ, u, σ', u) para todo u en 1..σ(1) y todo σ' alcanzada por una muestra.

    Todas las muestras del catálogo se propagan. Luego, hasta refine_rounds veces,
    se sortea un lote fresco con semilla y se propaga igual; se corta en la
    primera ronda que no agrega aristas ni estados.

    Todos los estados son iniciales. Los índices finales siguen el orden de las
    palabras, así dos construcciones con las mismas entradas son idénticas.
    """
    if len(states) == 0:
        raise AbstractionError("No hay estados descubiertos para construir transiciones.")
    if states.l != l:
        raise AbstractionError(f"El catálogo es de longitud {states.l} y se pidió l={l}.")

    oracle = get_oracle(plant, trig)
    backend = backend or SamplingWitnessBackend()
    backend.bind(oracle, l, states)

    edges: set[tuple[DeadlineWord, int, DeadlineWord]] = set()
    added = _expand(states, backend, edges)

    batch = refine_batch or max(REFINE_BATCH_MIN, sum(states.samples_seen(w) for w in states) // 4)
    rng = np.random.default_rng([states.seed, 1])
    rounds = 0
    stable = refine_rounds <= 0

    while rounds < refine_rounds:
        rounds += 1
        before = (len(edges), len(states))

        X = random_unit_vectors(plant.n_x, batch, rng)
        states.add_many(oracle.sequences(X, l), X)
        added += _expand(states, backend, edges)

        logger.debug(
            "[ABSTRACCION][REFINAMIENTO] ronda=%s aristas=%s estados=%s",
            rounds, len(edges), len(states),
        )
        if (len(edges), len(states)) == before:
            stable = True
            break

    if not stable:
        logger.warning(
            "[ABSTRACCION][REFINAMIENTO] l=%s la ronda %s todavía agregó aristas; "
            "el modelo puede omitir transiciones poco probables.",
            l, rounds,
        )

    words = states.words()
    index = {word: i for i, word in enumerate(words)}

    game = WeightedGame.from_edges(
        len(words),
        [(index[s], u, index[d], u) for s, u, d in edges],
        labels=words,
        output=tuple(word.first for word in words),
        witnesses=tuple(states.witnesses(word) for word in words),
        l=l,
        h=trig.h,
        kmax=trig.kmax,
        h_exact=trig.h_exact,
    )
    game.validate_abstraction()

    logger.info(
        "[ABSTRACCION][TRANSICIONES] l=%s estados=%s aristas=%s agregados_por_clausura=%s rondas=%s",
        l, game.num_states, game.num_edges, added, rounds,
    )
    return game


def build_abstraction(
    plant: Plant,
    trig: TriggerSpec,
    l: int,
    budget: int,
    seed: int = DEFAULT_SEED,
    backend: Optional[WitnessBackend] = None,
) -> WeightedGame:
    states = discover_states(plant, trig, l, budget, seed)
    return build_transitions(plant, trig, states, l, backend=backend)


def restrict_to_petc(game: WeightedGame) -> WeightedGame:
    """Submodelo del PETC: solo aristas con u = σ(1) del origen."""
    if game.output is None:
        raise AbstractionError("restrict_to_petc requiere un modelo de tráfico.")
    output = game.output
    return game.filter_edges(lambda e: e[1] == output[e[0]])


def _edge_lookup(game: WeightedGame) -> set[tuple[int, int, int]]:
    return {(s, u, d) for s, u, d, _ in game.edges}


def check_simulation_direction(
    plant: Plant,
    trig: TriggerSpec,
    game: WeightedGame,
    n_samples: int = 1000,
    seed: int = DEFAULT_SEED,
) -> int:
    """
    Cuenta pasos concretos (x, u, M(hu)x) con u <= deadline(x) cuyo par abstracto
    (palabra(x), u, palabra(M(hu)x)) no es una arista del modelo.
    """
    oracle = get_oracle(plant, trig)
    rng = np.random.default_rng(seed)
    l = game.l or 1

    X = random_unit_vectors(plant.n_x, n_samples, rng)
    ks = oracle.deadlines(X)
    us = rng.integers(1, ks + 1)
    X_next = oracle.propagate(X, us)

    words = oracle.sequences(X, l)
    next_words = oracle.sequences(X_next, l)
    lookup = _edge_lookup(game)

    violations = 0
    for row, u, next_row in zip(words, us, next_words):
        src = game.index_of(DeadlineWord(tuple(row.tolist())))
        dst = game.index_of(DeadlineWord(tuple(next_row.tolist())))
        if src is None or dst is None or (src, int(u), dst) not in lookup:
            violations += 1

    logger.info("[ABSTRACCION][SIMULACION] muestras=%s violaciones=%s", n_samples, violations)
    return violations


def action_set_mismatches(
    plant: Plant,
    trig: TriggerSpec,
    game: WeightedGame,
    n_samples: int = 1000,
    seed: int = DEFAULT_SEED,
) -> int:
    """Muestras con U(x) = {1..deadline(x)} distinto de las acciones de su palabra."""
    oracle = get_oracle(plant, trig)
    rng = np.random.default_rng(seed)
    l = game.l or 1

    X = random_unit_vectors(plant.n_x, n_samples, rng)
    ks = oracle.deadlines(X)
    words = oracle.sequences(X, l)

    mismatches = 0
    for row, k in zip(words, ks):
        idx = game.index_of(DeadlineWord(tuple(row.tolist())))
        if idx is None or game.actions(idx) != tuple(range(1, int(k) + 1)):
            mismatches += 1

    return mismatches
