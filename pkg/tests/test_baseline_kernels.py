import math
import sys
import os

import numpy as np
import pytest

# Add src to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..', 'src'))

import baseline_kernels
from baseline_kernels import (
    UnionFind,
    block_gibbs_sweep,
    gibbs_sweep,
    heat_bath_probability,
    metropolis_sweep,
    place_bonds,
    swendsen_wang_step,
)
from errors import InvalidParameterError
from ising_model import IsingModel, local_field, make_state, random_state
from model_zoo import make_bipartite_rbm, make_random_graph, make_torus_2d

# pi(++) for the two-spin ferromagnet at beta = 1: e / (2e + 2/e)
TWO_SPIN_PLUS_PLUS = math.e / (2 * math.e + 2 / math.e)


def two_spin_ferromagnet(beta=1.0):
    return IsingModel(2, [(0, 1, 1.0)], beta=beta)


def fraction_plus_plus(step, sweeps, seed):
    model = two_spin_ferromagnet()
    rng = np.random.default_rng(seed)
    state = random_state(2, rng)
    hits = 0
    for _ in range(sweeps):
        state = step(model, state, rng)
        hits += bool(state[0] == 1 and state[1] == 1)
    return hits / sweeps


# -------------------------------------------------------------------------
# SCENARIO 1: Heat bath
# -------------------------------------------------------------------------
def test_heat_bath_probability():
    assert heat_bath_probability(1.0, 0.0) == 0.5
    assert heat_bath_probability(1.0, 1.0) == pytest.approx(1 / (1 + math.exp(-2)))
    # Strictly inside (0, 1) for finite arguments.
    assert 0.0 < heat_bath_probability(1.0, -20.0) < 1.0


def test_gibbs_sweep_draws_from_heat_bath(monkeypatch):
    """Each site update uses the conditional P(+1 | local field) of the heat bath."""
    seen = []

    def always_up(beta, field):
        seen.append((beta, field))
        return 1.0

    monkeypatch.setattr(baseline_kernels, "heat_bath_probability", always_up)
    model = make_random_graph(6, seed=3, beta=0.7)
    state = gibbs_sweep(model, random_state(6, 1), np.random.default_rng(0))
    assert state.tolist() == [1] * 6
    assert len(seen) == 6
    assert all(beta == 0.7 for beta, _ in seen)
    # The last site sees every neighbour already set to +1.
    assert seen[-1][1] == pytest.approx(local_field(model, state, 5))


def test_two_spin_value():
    assert TWO_SPIN_PLUS_PLUS == pytest.approx(0.44039, abs=1e-5)


@pytest.mark.parametrize("step", [gibbs_sweep, swendsen_wang_step, metropolis_sweep])
def test_two_spin_frequencies_short(step):
    assert fraction_plus_plus(step, 100_000, seed=1) == pytest.approx(TWO_SPIN_PLUS_PLUS, abs=0.01)


@pytest.mark.slow
@pytest.mark.parametrize("step", [gibbs_sweep, swendsen_wang_step])
def test_two_spin_frequencies(step):
    assert fraction_plus_plus(step, 1_000_000, seed=2) == pytest.approx(TWO_SPIN_PLUS_PLUS, abs=0.005)


def test_gibbs_scan_orders():
    model = make_torus_2d(3, "pm1", "gauss:0.5", seed=1)
    rng = np.random.default_rng(0)
    state = random_state(9, rng)
    assert gibbs_sweep(model, state, rng, order="random") is state
    assert set(state.tolist()) <= {-1, 1}
    with pytest.raises(InvalidParameterError):
        gibbs_sweep(model, state, rng, order="checkerboard")


def test_gibbs_freezes_at_huge_beta():
    """At beta = 50 every site aligns with its local field."""
    model = IsingModel(3, [(0, 1, 1.0), (1, 2, 1.0)], fields=[1.0, 0.0, 0.0], beta=50.0)
    rng = np.random.default_rng(0)
    state = make_state([-1, 1, 1])
    for _ in range(5):
        gibbs_sweep(model, state, rng)
    assert state.tolist() == [1, 1, 1]


# -------------------------------------------------------------------------
# SCENARIO 2: Block Gibbs
# -------------------------------------------------------------------------
def test_block_gibbs_needs_bipartition():
    model = make_torus_2d(3)
    with pytest.raises(InvalidParameterError):
        block_gibbs_sweep(model, random_state(9, 0), np.random.default_rng(0))


def test_block_gibbs_keeps_spin_values():
    model = make_bipartite_rbm(5, 3, "gauss:1", seed=2)
    rng = np.random.default_rng(3)
    state = random_state(8, rng)
    for _ in range(20):
        state = block_gibbs_sweep(model, state, rng)
        assert set(state.tolist()) <= {-1, 1}


# -------------------------------------------------------------------------
# SCENARIO 3: Swendsen-Wang
# -------------------------------------------------------------------------
def test_bond_probability_on_strong_coupling():
    """Aligned pair at beta=5, J=1: bonded with probability 1 - e^-10."""
    model = two_spin_ferromagnet(beta=5.0)
    rng = np.random.default_rng(0)
    bonded = sum(bool(place_bonds(model, make_state([1, 1]), rng).bond_flags[0]) for _ in range(20_000))
    assert 1.0 - math.exp(-10.0) == pytest.approx(0.9999546, abs=1e-7)
    assert bonded >= 19_990


def test_strong_pair_flips_together():
    model = two_spin_ferromagnet(beta=5.0)
    rng = np.random.default_rng(1)
    state = make_state([1, 1])
    for _ in range(200):
        state = swendsen_wang_step(model, state, rng)
        assert state[0] == state[1]


def test_no_bonds_on_unsatisfied_edges():
    model = make_random_graph(10, edge_prob=0.6, seed=4)
    rng = np.random.default_rng(5)
    state = random_state(10, rng)
    for _ in range(200):
        clusters = place_bonds(model, state, rng)
        s = state.astype(np.float64)
        satisfied = model.edge_J * s[model.edge_i] * s[model.edge_j] > 0
        assert not np.any(clusters.bond_flags & ~satisfied)
        assert not np.any(clusters.ghost_bonds & ~(model.fields * s > 0))
        state = swendsen_wang_step(model, state, rng)


def test_ghost_cluster_is_frozen():
    """A strong field bonds spin 0 to the ghost, so it never flips."""
    model = IsingModel(3, [(1, 2, 0.5)], fields=[5.0, 0.0, 0.0], beta=5.0)
    rng = np.random.default_rng(2)
    state = make_state([1, 1, -1])
    for _ in range(300):
        state = swendsen_wang_step(model, state, rng)
        assert state[0] == 1


def test_clusters_partition_spins():
    model = make_torus_2d(4, beta=0.6)
    clusters = place_bonds(model, random_state(16, 0), np.random.default_rng(0))
    members = sorted(i for group in clusters.clusters() for i in group)
    assert members == list(range(17))


def test_union_find():
    forest = UnionFind(5)
    forest.union(0, 1)
    forest.union(3, 4)
    forest.union(1, 0)
    assert forest.n_clusters == 3
    assert forest.find(0) == forest.find(1)
    assert forest.find(2) not in (forest.find(0), forest.find(3))
    forest.union(1, 4)
    assert forest.find(0) == forest.find(3)
    assert forest.n_clusters == 2
