import math
import sys
import os

import numpy as np
import pytest
from scipy.stats import chisquare

# Add src to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..', 'src'))

import weight_tree
from errors import EmptySupportError, InvalidParameterError
from exact_oracle import dense_saw_logprob, inverse_cdf_index
from ising_model import apply_flip, flip_deltas, random_state
from model_zoo import make_cube_3d, make_random_graph, make_torus_2d
from saw_kernel import sample_saw, saw_logprob
from weight_tree import (
    FlatCandidateStore,
    TreeCandidateStore,
    WeightTree,
    build,
    make_candidate_store,
    preferred_store,
)


# -------------------------------------------------------------------------
# SCENARIO 1: Tree sums and draws
# -------------------------------------------------------------------------
def test_totals_and_leaves():
    tree = build([1.0, 2.0, 3.0])
    assert tree.size == 4
    assert tree.total() == 6.0
    tree.update(1, 0.5)
    assert tree.total() == 4.5
    assert tree.leaves().tolist() == [1.0, 0.5, 3.0]


def test_sample_boundaries():
    """Leaf i owns [prefix(i), prefix(i+1)) of u * total."""
    tree = WeightTree([1.0, 2.0, 3.0, 4.0])
    assert tree.sample(0.0) == 0
    assert tree.sample(0.099) == 0
    assert tree.sample(0.1001) == 1
    assert tree.sample(0.3001) == 2
    assert tree.sample(0.6001) == 3
    assert tree.sample(0.9999) == 3


def test_zero_weights_never_drawn():
    tree = WeightTree([0.0, 5.0, 0.0, 0.0, 1.0])
    for u in np.linspace(0.0, 0.999, 200):
        assert tree.sample(u) in (1, 4)


def test_empty_tree():
    tree = WeightTree([1.0])
    tree.update(0, 0.0)
    with pytest.raises(EmptySupportError):
        tree.sample(0.5)


def test_invalid_weights():
    with pytest.raises(InvalidParameterError):
        WeightTree([])
    with pytest.raises(InvalidParameterError):
        WeightTree([1.0, -1.0])
    tree = WeightTree([1.0, 1.0])
    with pytest.raises(InvalidParameterError):
        tree.update(0, math.inf)


def test_matches_shadow_array_oracle():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        capacity = int(rng.integers(1, 33))
        shadow = rng.integers(1, 10, size=capacity).astype(np.float64)
        tree = WeightTree(shadow)
        for _ in range(20):
            i = int(rng.integers(capacity))
            w = float(rng.integers(1, 10))
            shadow[i] = w
            tree.update(i, w)
            u = rng.random()
            assert tree.sample(u) == inverse_cdf_index(shadow, u)


def test_chi_square_frequencies():
    rng = np.random.default_rng(2024)
    tree = WeightTree([1.0, 2.0, 3.0, 4.0])
    draws = np.array([tree.sample(u) for u in rng.random(100_000)])
    counts = np.bincount(draws, minlength=4)
    expected = 100_000 * np.array([0.1, 0.2, 0.3, 0.4])
    assert chisquare(counts, expected).pvalue > 0.001


def test_periodic_rebuild_keeps_sums_exact(monkeypatch):
    monkeypatch.setattr(weight_tree, "REBUILD_EVERY", 8)
    tree = WeightTree(np.full(5, 0.1))
    for step in range(50):
        tree.update(step % 5, 0.1 * (step % 3 + 1))
    assert tree.updates_since_rebuild < 8
    assert tree.total() == pytest.approx(tree.leaves().sum(), abs=1e-15)


def test_zeroing_a_dominant_leaf_restores_exact_sums():
    tree = WeightTree([1.0, 1.0, math.exp(300.0), 1.0])
    tree.update(2, 0.0)
    assert tree.total() == 3.0
    assert not tree.drifted()
    assert tree.sample(0.5) == 1
    assert tree.sample(0.9) == 3


# -------------------------------------------------------------------------
# SCENARIO 2: Candidate stores
# -------------------------------------------------------------------------
def dense_log_probs(model, state, active, gamma):
    deltas = flip_deltas(model, state)
    logits = np.where(active, -gamma * deltas, -np.inf)
    return logits - np.logaddexp.reduce(logits[active])


@pytest.mark.parametrize("kind", ["tree", "flat"])
def test_store_probabilities_follow_walk(kind):
    model = make_random_graph(9, edge_prob=0.4, seed=5)
    rng = np.random.default_rng(1)
    state = random_state(9, rng)
    gammas = (0.5, 1.5)
    store = make_candidate_store(model, state, gammas, kind)
    active = np.ones(9, dtype=bool)
    for l in rng.permutation(9)[:6].tolist():
        for level, gamma in enumerate(gammas):
            expected = dense_log_probs(model, state, active, gamma)
            for j in np.flatnonzero(active):
                assert store.log_probs(j)[level] == pytest.approx(expected[j], abs=1e-9)
        store.flip(l)
        state = apply_flip(state, l)
        active[l] = False
        assert store.state.tolist() == state.tolist()
        assert np.allclose(store.delta, flip_deltas(model, state))


@pytest.mark.parametrize("kind", ["tree", "flat"])
def test_store_rejects_repeated_flip(kind):
    model = make_torus_2d(3)
    store = make_candidate_store(model, random_state(9, 0), (1.0,), kind)
    store.flip(4)
    with pytest.raises(InvalidParameterError):
        store.flip(4)
    with pytest.raises(InvalidParameterError):
        store.log_probs(4)


def test_store_energy_change_accumulates():
    model = make_random_graph(7, seed=8)
    state = random_state(7, 3)
    tree = TreeCandidateStore(model, state, (1.0,))
    flat = FlatCandidateStore(model, state, (1.0,))
    for l in (2, 5, 0):
        tree.flip(l)
        flat.flip(l)
    assert tree.energy_change == pytest.approx(flat.energy_change)
    assert tree.n_active == flat.n_active == 4


def test_tree_store_survives_large_dynamic_range():
    """Couplings of 1e3 push exponents past the re-anchoring limit."""
    model = make_random_graph(10, edge_prob=0.7, coupling_spec="gauss:1000", field_spec="const:0", seed=1)
    state = random_state(10, 2)
    store = TreeCandidateStore(model, state, (1.0,))
    flat = FlatCandidateStore(model, state, (1.0,))
    rng = np.random.default_rng(0)
    for _ in range(8):
        u = rng.random()
        l = flat.draw(u)
        tree_lp = store.log_probs(l)[0]
        assert np.isfinite(tree_lp)
        assert tree_lp == pytest.approx(flat.log_probs(l)[0], abs=1e-6)
        store.flip(l)
        flat.flip(l)


def test_draws_skip_flipped_spins():
    model = make_torus_2d(3)
    store = make_candidate_store(model, random_state(9, 0), (0.0,), "tree")
    for l in range(8):
        store.flip(l)
    assert store.draw(0.5) == 8


def test_preferred_store_by_density():
    assert preferred_store(make_torus_2d(10)) == "tree"
    assert preferred_store(make_random_graph(8, edge_prob=1.0)) == "flat"
    with pytest.raises(InvalidParameterError):
        make_candidate_store(make_torus_2d(3), random_state(9, 0), (1.0,), "heap")


# -------------------------------------------------------------------------
# SCENARIO 3: Long walks on strongly coupled models
# -------------------------------------------------------------------------
@pytest.mark.parametrize("model", [
    make_torus_2d(8, "gauss:5", "gauss:5", seed=0),
    make_cube_3d(4, "gauss:3", seed=1),
    make_random_graph(8, edge_prob=0.6, coupling_spec="gauss:5", field_spec="gauss:5", seed=2),
])
def test_long_walks_match_dense_softmax(model):
    rng = np.random.default_rng(7)
    k = min(60, model.num_spins)
    for _ in range(3):
        x0 = random_state(model.num_spins, rng)
        path, _, log_f = sample_saw(model, x0, k, 1.15, rng, "tree")
        dense = dense_saw_logprob(model, x0, path, 1.15)
        assert log_f == pytest.approx(dense, abs=1e-8)
        assert saw_logprob(model, x0, path, 1.15, "tree") == pytest.approx(dense, abs=1e-8)
        assert saw_logprob(model, x0, path, 1.15, "flat") == pytest.approx(dense, abs=1e-8)


@pytest.mark.parametrize("gammas", [(1.15,), (0.3, 2.0)])
def test_tree_store_stays_normalized_along_walk(gammas):
    model = make_torus_2d(8, "gauss:5", "gauss:5", seed=3)
    rng = np.random.default_rng(9)
    store = TreeCandidateStore(model, random_state(64, rng), gammas)
    for _ in range(63):
        live = np.flatnonzero(store.active)
        totals = np.logaddexp.reduce([store.log_probs(j) for j in live], axis=0)
        assert np.allclose(totals, 0.0, atol=1e-9)
        store.flip(store.draw(rng.random()))
