"""
Pruebas del modelo de tráfico S_l: estados, transiciones y relación con la planta.
"""
import numpy as np
import pytest

from stc_synth.errors import AbstractionError, ConfigError, InvalidSpecError
from stc_synth.modules.abstraccion.traffic_abstraction import (
    StateCatalog,
    action_set_mismatches,
    build_abstraction,
    build_transitions,
    check_simulation_direction,
    discover_states,
    restrict_to_petc,
)
from stc_synth.modules.abstraccion.witness_backends import (
    SamplingWitnessBackend,
    make_backend,
)
from stc_synth.modules.control.petc_deadlines import DeadlineWord, get_oracle, sphere_samples


def test_kmax_one_gives_a_single_state(example_plant, kmax_one_trigger):
    for l in (1, 2, 3):
        game = build_abstraction(example_plant, kmax_one_trigger, l, budget=50)
        assert game.labels == (DeadlineWord((1,) * l),)
        assert game.edges == ((0, 1, 0, 1),)


def test_never_firing_trigger_gives_all_actions(example_plant, never_firing_trigger):
    kmax = never_firing_trigger.kmax
    game = build_abstraction(example_plant, never_firing_trigger, 2, budget=50)
    assert game.labels == (DeadlineWord.of(kmax, kmax),)
    assert game.actions(0) == tuple(range(1, kmax + 1))
    assert check_simulation_direction(example_plant, never_firing_trigger, game, n_samples=200) == 0
    assert action_set_mismatches(example_plant, never_firing_trigger, game, n_samples=200) == 0


def test_budget_of_one_sample_is_non_blocking(example_plant, example_trigger):
    game = build_abstraction(example_plant, example_trigger, 2, budget=1)
    assert game.num_states >= 1
    game.require_non_blocking()
    game.validate_abstraction()


def test_weights_equal_actions(example_plant, example_trigger):
    game = build_abstraction(example_plant, example_trigger, 2, budget=400)
    for src, u, dst, w in game.edges:
        assert w == u
        assert 1 <= u <= game.labels[src].first


def test_states_are_sorted_words(example_plant, example_trigger):
    game = build_abstraction(example_plant, example_trigger, 2, budget=400)
    assert list(game.labels) == sorted(game.labels)
    assert game.initial == frozenset(range(game.num_states))
    assert all(len(word) == 2 for word in game.labels)


def test_witnesses_realize_their_words(example_plant, example_trigger):
    game = build_abstraction(example_plant, example_trigger, 2, budget=400)
    oracle = get_oracle(example_plant, example_trigger)
    for word, witnesses in zip(game.labels, game.witnesses):
        assert len(witnesses) >= 1
        for x in witnesses:
            assert oracle.in_region(x, word)


def test_every_edge_has_a_concrete_witness(example_plant, example_trigger):
    game = build_abstraction(example_plant, example_trigger, 2, budget=400)
    oracle = get_oracle(example_plant, example_trigger)
    for src, u, dst, _ in game.edges:
        witnesses = game.witnesses[src]
        successors = oracle.propagate(witnesses, np.full(len(witnesses), u))
        words = oracle.sequences(successors, 2)
        target = np.asarray(game.labels[dst].indices)
        assert (words == target).all(axis=1).any(), (game.labels[src], u, game.labels[dst])


def test_model_covers_sampled_behaviour(example_plant, example_trigger):
    game = build_abstraction(example_plant, example_trigger, 1, budget=4000)
    assert action_set_mismatches(example_plant, example_trigger, game, n_samples=1000) <= 5


def test_construction_is_deterministic(example_plant, example_trigger):
    a = build_abstraction(example_plant, example_trigger, 2, budget=300, seed=3)
    b = build_abstraction(example_plant, example_trigger, 2, budget=300, seed=3)
    assert a.labels == b.labels
    assert a.edges == b.edges


def test_restrict_to_petc_keeps_only_deadline_actions(example_plant, example_trigger):
    game = build_abstraction(example_plant, example_trigger, 2, budget=400)
    petc = restrict_to_petc(game)
    assert all(u == petc.output[src] for src, u, _, _ in petc.edges)
    petc.require_non_blocking()


def test_restrict_to_petc_requires_traffic_model():
    from stc_synth.modules.juegos.weighted_game import WeightedGame

    with pytest.raises(AbstractionError):
        restrict_to_petc(WeightedGame.from_edges(1, [(0, 1, 0, 1)]))


def test_catalog_caps_witnesses():
    catalog = StateCatalog(1, 2, cap=3, seed=0)
    word = DeadlineWord.of(4)
    rng = np.random.default_rng(0)
    for x in rng.standard_normal((100, 2)):
        catalog.add_witness(word, 5.0 * x)

    stored = catalog.witnesses(word)
    assert stored.shape == (3, 2)
    assert np.allclose(np.linalg.norm(stored, axis=1), 1.0)
    assert catalog.samples_seen(word) == 100
    assert word in catalog
    assert len(catalog) == 1


def test_catalog_rejects_empty_cap():
    with pytest.raises(InvalidSpecError):
        StateCatalog(1, 2, cap=0)


def test_discover_states_checks_inputs(example_plant, example_trigger):
    with pytest.raises(InvalidSpecError):
        discover_states(example_plant, example_trigger, 1, budget=0)
    with pytest.raises(InvalidSpecError):
        discover_states(example_plant, example_trigger, 0, budget=10)


def test_transitions_need_states(example_plant, example_trigger):
    empty = StateCatalog(1, 2)
    with pytest.raises(AbstractionError):
        build_transitions(example_plant, example_trigger, empty, 1)

    states = discover_states(example_plant, example_trigger, 1, budget=10)
    with pytest.raises(AbstractionError):
        build_transitions(example_plant, example_trigger, states, 2)


def test_unbound_backend_is_reported():
    with pytest.raises(AbstractionError):
        SamplingWitnessBackend().successor_witnesses(DeadlineWord.of(1), 1)


def test_unknown_backend_name():
    with pytest.raises(ConfigError):
        make_backend("montecarlo")


@pytest.mark.slow
def test_z3_backend_certifies_sampled_edges(example_plant, example_trigger):
    pytest.importorskip("z3")

    states = discover_states(example_plant, example_trigger, 1, budget=200)
    backend = make_backend("z3")
    game = build_transitions(example_plant, example_trigger, states, 1, backend=backend)
    oracle = get_oracle(example_plant, example_trigger)

    src, u, dst, _ = game.edges[0]
    point = backend.find_witness(game.labels[src], u, game.labels[dst])
    if point is not None:
        assert oracle.in_region(point, game.labels[src])
        assert oracle.in_region(oracle.propagate(point, [u])[0], game.labels[dst])

    kmax = example_trigger.kmax
    assert backend.find_witness(game.labels[src], u, DeadlineWord.of(kmax + 1)) is None
    assert backend.find_witness(game.labels[src], game.labels[src].first + 1, game.labels[dst]) is None


@pytest.mark.parametrize("l", [1, 2])
def test_fresh_samples_only_take_modelled_transitions(example_plant, example_trigger, l):
    game = build_abstraction(example_plant, example_trigger, l, budget=40_000)
    assert check_simulation_direction(example_plant, example_trigger, game, n_samples=1000, seed=99) == 0


def test_every_discovery_sample_is_propagated(example_plant, example_trigger):
    states = discover_states(example_plant, example_trigger, 1, budget=2000)
    game = build_transitions(example_plant, example_trigger, states, 1, refine_rounds=0)
    oracle = get_oracle(example_plant, example_trigger)
    lookup = {(s, u, d) for s, u, d, _ in game.edges}

    X = sphere_samples(2, 2000, seed=0)
    ks = oracle.deadlines(X)
    for u in range(1, int(ks.max()) + 1):
        mask = ks >= u
        nxt = oracle.deadlines(oracle.propagate(X[mask], np.full(mask.sum(), u)))
        for k, k_next in zip(ks[mask], nxt):
            src = game.index_of(DeadlineWord.of(int(k)))
            dst = game.index_of(DeadlineWord.of(int(k_next)))
            assert (src, u, dst) in lookup


def test_refinement_rounds_add_fresh_samples(example_plant, example_trigger):
    states = discover_states(example_plant, example_trigger, 1, budget=100)
    before = sum(states.samples_seen(word) for word in states)
    build_transitions(example_plant, example_trigger, states, 1, refine_batch=500)
    after = sum(states.samples_seen(word) for word in states)
    assert after >= before + 500


def test_regions_of_the_states_do_not_overlap(example_plant, example_trigger):
    game = build_abstraction(example_plant, example_trigger, 2, budget=4000)
    oracle = get_oracle(example_plant, example_trigger)
    X = np.random.default_rng(31).standard_normal((200, 2))

    owners = [sum(oracle.in_region(x, word) for word in game.labels) for x in X]
    assert max(owners) <= 1
    assert sum(owners) >= 195
