# stc_synth/modules/juegos/mpg_solver.py
"""
Solución exacta de juegos de pago medio y de problemas de ciclo medio.

- solve_mean_payoff: iteración de valores con enteros, redondeo al racional de
  denominador <= |X| y certificado bilateral de estrategias posicionales.
- min_cycle_mean / cooperative_upper_value: algoritmo de Karp por componente
  fuertemente conexa, más clausura de alcanzabilidad sobre la condensación.

Todos los valores se devuelven en pasos de peso (Fraction). El valor físico es
h·valor y lo calcula quien conoce h (WeightedGame.physical).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional

import networkx as nx
import numpy as np

from stc_synth.config.settings import SOLVER_INITIAL_HORIZON
from stc_synth.errors import SolverError
from stc_synth.modules.juegos.weighted_game import WeightedGame

logger = logging.getLogger(__name__)

_INT64_SAFE = 2 ** 62


@dataclass(frozen=True)
class GameValues:
    values: tuple[Fraction, ...]
    game_value: Fraction
    strategy: dict[int, int]
    horizon: int


# ---------------------------------------------------------------------
# Karp y alcanzabilidad
# ---------------------------------------------------------------------
def karp_min_cycle_mean(num_nodes: int, src: np.ndarray, dst: np.ndarray, w: np.ndarray) -> Optional[Fraction]:
    """
    Ciclo medio mínimo de un grafo fuertemente conexo con nodos 0..num_nodes-1.
    Devuelve None si no hay aristas (componente trivial sin ciclo).

    Las sumas parciales son enteras y se guardan en float64 (exactas bajo 2^53);
    el candidato ganador se reconstruye como Fraction.
    """
    if len(src) == 0:
        return None

    n = num_nodes
    D = np.full((n + 1, n), np.inf)
    D[0, 0] = 0.0
    wf = w.astype(float)

    for j in range(1, n + 1):
        np.minimum.at(D[j], dst, D[j - 1][src] + wf)

    last = D[n]
    reachable = np.isfinite(last)
    if not reachable.any():
        return None

    steps = (n - np.arange(n))[:, None].astype(float)
    with np.errstate(invalid="ignore"):
        ratios = (last[None, :] - D[:n]) / steps
    ratios = np.where(np.isfinite(D[:n]), ratios, -np.inf)

    best_j = ratios.argmax(axis=0)
    best = ratios[best_j, np.arange(n)]
    best = np.where(reachable, best, np.inf)
    v = int(best.argmin())
    j = int(best_j[v])

    return Fraction(int(last[v] - D[j, v]), n - j)


def _cycle_graph(game: WeightedGame) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(range(game.num_states))
    src, _, dst, _ = game.edge_arrays
    graph.add_edges_from(zip(src.tolist(), dst.tolist()))
    return graph


def per_state_min_cycle_mean(game: WeightedGame) -> list[Fraction]:
    """
    V_adv(x) en un grafo de un solo jugador (todas las elecciones adversariales):
    mínimo ciclo medio alcanzable desde cada estado.
    """
    game.require_non_blocking()

    src, _, dst, w = game.edge_arrays
    condensed = nx.condensation(_cycle_graph(game))
    members = {c: sorted(condensed.nodes[c]["members"]) for c in condensed.nodes}
    component = np.empty(game.num_states, dtype=np.int64)
    local = np.empty(game.num_states, dtype=np.int64)
    for c, nodes in members.items():
        component[nodes] = c
        local[nodes] = np.arange(len(nodes))

    internal = component[src] == component[dst]
    own: dict[int, Optional[Fraction]] = {}

    for c, nodes in members.items():
        mask = internal & (component[src] == c)
        own[c] = karp_min_cycle_mean(len(nodes), local[src[mask]], local[dst[mask]], w[mask])

    reach: dict[int, Optional[Fraction]] = {}
    for c in reversed(list(nx.topological_sort(condensed))):
        candidates = [own[c]] + [reach[d] for d in condensed.successors(c)]
        candidates = [v for v in candidates if v is not None]
        reach[c] = min(candidates) if candidates else None

    result: list[Fraction] = []
    for s in range(game.num_states):
        value = reach[int(component[s])]
        if value is None:
            raise SolverError(f"El estado {game.labels[s]} no alcanza ningún ciclo.")
        result.append(value)

    return result


def per_state_max_cycle_mean(game: WeightedGame) -> list[Fraction]:
    """V_coop^x: máximo ciclo medio alcanzable desde cada estado (Karp con pesos negados)."""
    return [-v for v in per_state_min_cycle_mean(game.negated())]


def min_cycle_mean(graph: WeightedGame, restricted: Optional[Mapping[int, int]] = None) -> Fraction:
    """
    Mínimo ciclo medio alcanzable desde algún estado inicial.
    Con restricted, antes se filtran las aristas a las acciones de la estrategia.
    """
    if restricted is not None:
        graph = graph.restrict(restricted)

    values = per_state_min_cycle_mean(graph)
    return min(values[s] for s in graph.initial)


def adversarial_value(game: WeightedGame, strategy: Mapping[int, int]) -> Fraction:
    """V_adv(S|s): valor garantizado por la estrategia posicional contra cualquier adversario."""
    return min_cycle_mean(game, restricted=strategy)


def cooperative_upper_value(game: WeightedGame) -> Fraction:
    """V_U(S) = mínimo sobre estados iniciales del máximo ciclo medio alcanzable."""
    values = per_state_max_cycle_mean(game)
    return min(values[s] for s in game.initial)


# ---------------------------------------------------------------------
# Iteración de valores
# ---------------------------------------------------------------------
class _ValueIteration:
    """
    v_{t+1}(s) = max_u min_{(s,u,s',w)} (w + v_t(s')) sobre enteros int64.

    Las aristas de WeightedGame ya vienen ordenadas por (src, u, dst, w), así que
    los grupos (src, u) y los grupos por estado son tramos contiguos.
    """

    def __init__(self, game: WeightedGame):
        game.require_non_blocking()

        self.game = game
        self.src, self.u, self.dst, self.w = game.edge_arrays

        action_change = np.ones(len(self.src), dtype=bool)
        action_change[1:] = (self.src[1:] != self.src[:-1]) | (self.u[1:] != self.u[:-1])
        self.action_starts = np.flatnonzero(action_change)
        self.edge_action = np.cumsum(action_change) - 1
        self.action_src = self.src[self.action_starts]
        self.action_u = self.u[self.action_starts]

        state_change = np.ones(len(self.action_src), dtype=bool)
        state_change[1:] = self.action_src[1:] != self.action_src[:-1]
        self.state_starts = np.flatnonzero(state_change)

        self.t = 0
        self.v = np.zeros(game.num_states, dtype=np.int64)

    def step(self) -> None:
        candidates = self.w + self.v[self.dst]
        per_action = np.minimum.reduceat(candidates, self.action_starts)
        self.v = np.maximum.reduceat(per_action, self.state_starts)
        self.t += 1

    def run_to(self, horizon: int) -> None:
        while self.t < horizon:
            self.step()

    def rounded(self) -> list[Fraction]:
        n = self.game.num_states
        return [Fraction(int(x), self.t).limit_denominator(n) for x in self.v]


def _first_per_group(mask: np.ndarray, groups: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    idx = np.flatnonzero(mask)
    keys, first = np.unique(groups[idx], return_index=True)
    return keys, idx[first]


class _EnergyMeasure:
    """
    Medida de progreso de un juego de energía sobre las aristas del juego,
    con pesos reescalados por el valor del estado de origen.

    Con valores v = p/q exactos, un ciclo dentro de una clase de valor c tiene
    suma >= 0 en q·w - p exactamente cuando su media es >= c. La menor medida
    f que cumple f(s) >= f(s') - w' en una acción de cada estado da una
    estrategia posicional cuyo ciclo alcanzable peor tiene media >= v(s).
    Solo se usan acciones (jugador 0) o aristas (jugador 1) consistentes con v.
    """

    def __init__(self, vi: _ValueIteration, values: list[Fraction]):
        self.vi = vi
        self.num = np.array([v.numerator for v in values], dtype=np.int64)
        self.den = np.array([v.denominator for v in values], dtype=np.int64)

        src, dst = vi.src, vi.dst
        self.up = self.num[dst] * self.den[src] >= self.num[src] * self.den[dst]
        self.down = self.num[dst] * self.den[src] <= self.num[src] * self.den[dst]
        self.scaled = self.den[src] * vi.w - self.num[src]

    def _top(self, weights: np.ndarray, usable: np.ndarray) -> int:
        drop = int(max(0, -weights[usable].min())) if usable.any() else 0
        return self.vi.game.num_states * drop + 1

    def _fixpoint(self, lift, top: int, max_sweeps: Optional[int]) -> Optional[np.ndarray]:
        f = np.zeros(self.vi.game.num_states, dtype=np.int64)
        sweeps = 0
        while True:
            new = np.minimum(np.maximum(lift(f), f), top)
            if np.array_equal(new, f):
                break
            f = new
            sweeps += 1
            if max_sweeps is not None and sweeps > max_sweeps:
                return None

        if (f >= top).any():
            return None
        return f

    def player0(self, max_sweeps: Optional[int]) -> Optional[dict[int, int]]:
        """Estrategia del jugador 0 (acción menor entre las que sostienen la medida)."""
        vi = self.vi
        weights = self.scaled
        action_ok = np.minimum.reduceat(self.up.astype(np.int8), vi.action_starts).astype(bool)
        top = self._top(weights, action_ok[vi.edge_action])

        def group_need(f: np.ndarray) -> np.ndarray:
            need = np.maximum(f[vi.dst] - weights, 0)
            group = np.maximum.reduceat(need, vi.action_starts)
            return np.where(action_ok, group, top)

        f = self._fixpoint(
            lambda f: np.minimum.reduceat(group_need(f), vi.state_starts), top, max_sweeps,
        )
        if f is None:
            return None

        group = group_need(f)
        states, chosen = _first_per_group(action_ok & (group <= f[vi.action_src]), vi.action_src)
        if len(states) != vi.game.num_states:
            return None
        return {int(s): int(vi.action_u[a]) for s, a in zip(states, chosen)}

    def player1(self, max_sweeps: Optional[int]) -> Optional[np.ndarray]:
        """Índices de arista de una contraestrategia del jugador 1 (una por acción)."""
        vi = self.vi
        weights = -self.scaled
        top = self._top(weights, self.down)

        def edge_need(g: np.ndarray) -> np.ndarray:
            need = np.maximum(g[vi.dst] - weights, 0)
            return np.where(self.down, need, top)

        g = self._fixpoint(
            lambda g: np.maximum.reduceat(np.minimum.reduceat(edge_need(g), vi.action_starts), vi.state_starts),
            top,
            max_sweeps,
        )
        if g is None:
            return None

        need = edge_need(g)
        actions, chosen = _first_per_group(self.down & (need <= g[vi.src]), vi.edge_action)
        if len(actions) != len(vi.action_starts):
            return None
        return chosen


def value_iteration_values(game: WeightedGame, horizon: int) -> list[Fraction]:
    """Valores redondeados tras exactamente `horizon` pasos de iteración."""
    if horizon < 1:
        raise SolverError(f"El horizonte debe ser >= 1; se recibió {horizon}.")
    vi = _ValueIteration(game)
    vi.run_to(horizon)
    return vi.rounded()


def horizon_cap(game: WeightedGame) -> int:
    """T = 4·|X|³·W, horizonte a partir del cual el redondeo es exacto."""
    return 4 * game.num_states ** 3 * max(game.max_abs_weight(), 1)


def _certify(
    game: WeightedGame,
    vi: _ValueIteration,
    values: list[Fraction],
    max_sweeps: Optional[int],
) -> Optional[dict[int, int]]:
    """
    Estrategias de ambos jugadores consistentes con values, verificadas con Karp.
    None si values no es el valor del juego (o si la medida no converge en max_sweeps).
    """
    measure = _EnergyMeasure(vi, values)

    strategy = measure.player0(max_sweeps)
    if strategy is None:
        return None
    if per_state_min_cycle_mean(game.restrict(strategy)) != values:
        return None

    chosen = measure.player1(max_sweeps)
    if chosen is None:
        return None
    counter = WeightedGame.from_edges(
        game.num_states,
        [game.edges[i] for i in chosen.tolist()],
        initial=game.initial,
        labels=game.labels,
    )
    if per_state_max_cycle_mean(counter) != values:
        return None

    return strategy


def solve_mean_payoff(game: WeightedGame, initial_horizon: Optional[int] = None) -> GameValues:
    """
    Valores óptimos exactos por estado, valor del juego (mínimo sobre iniciales)
    y una estrategia posicional óptima del jugador 0.

    El horizonte se duplica desde initial_horizon hasta certificar; nunca supera
    4·|X|³·W, donde el redondeo ya es exacto. La estrategia elige en cada estado
    la acción menor entre las consistentes con los valores que sostienen la
    medida de energía. Si el certificado falla en la cota se lanza SolverError.
    """
    game.require_non_blocking()

    cap = horizon_cap(game)
    weight = max(game.max_abs_weight(), 1)
    if cap * weight >= _INT64_SAFE:
        logger.warning("[JUEGOS][VI] La cota %s podría desbordar int64; se limita el horizonte.", cap)
        cap = _INT64_SAFE // (2 * weight)

    horizon = min(initial_horizon or SOLVER_INITIAL_HORIZON, cap)
    # antes de la cota los valores pueden estar mal; se corta la medida temprano
    early_sweeps = 8 * game.num_states + 64
    vi = _ValueIteration(game)

    while True:
        vi.run_to(horizon)
        values = vi.rounded()
        at_cap = horizon >= cap
        strategy = _certify(game, vi, values, None if at_cap else early_sweeps)
        logger.debug("[JUEGOS][VI] horizonte=%s certificado=%s", horizon, strategy is not None)

        if strategy is not None:
            break
        if at_cap:
            raise SolverError(
                f"La iteración de valores no certificó estrategias en el horizonte máximo {cap} "
                f"({game.num_states} estados, {game.num_edges} aristas)."
            )
        horizon = min(2 * horizon, cap)

    game_value = min(values[s] for s in game.initial)

    logger.info(
        "[JUEGOS][VI] estados=%s aristas=%s horizonte=%s valor=%s",
        game.num_states, game.num_edges, horizon, game_value,
    )

    return GameValues(
        values=tuple(values),
        game_value=game_value,
        strategy=strategy,
        horizon=horizon,
    )
