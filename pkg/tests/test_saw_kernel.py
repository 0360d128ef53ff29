import math
import sys
import os

import numpy as np
import pytest

# Add src to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..', 'src'))

from diagnostics import empirical_distribution, tv_distance
from errors import InvalidParameterError
from exact_oracle import exact_distribution
from ising_model import IsingModel, energy, hamming_distance, make_state, random_state, state_index
from model_zoo import make_random_graph, make_torus_2d
from saw_kernel import (
    FixedPolicy,
    KernelParams,
    SawPath,
    log_acceptance_ratio,
    pair_log_mixture,
    propose,
    run_chain,
    sample_saw,
    sardonics_single_step,
    sardonics_step,
    saw_log_acceptance,
    saw_logprob,
)


def free_spins(num_spins):
    return IsingModel(num_spins, [])


# -------------------------------------------------------------------------
# SCENARIO 1: Walk probabilities on hand-checkable models
# -------------------------------------------------------------------------
def test_unbiased_single_flip_is_uniform():
    model = make_random_graph(3, seed=0)
    x0 = random_state(3, 0)
    for l in range(3):
        assert saw_logprob(model, x0, [l], 0.0) == pytest.approx(math.log(1 / 3))


def test_free_spins_walk_of_three():
    """With J = h = 0 every ordered walk of 3 out of 5 has probability 1/(5*4*3)."""
    model = free_spins(5)
    x0 = make_state([1, -1, 1, 1, -1])
    for kind in ("tree", "flat"):
        assert saw_logprob(model, x0, [4, 0, 2], 1.7, kind) == pytest.approx(math.log(1 / 60))


def test_two_spin_pathwise_ratio():
    """From (+,+) with J=1: both flips cost +2 forward, both cost -2 back, so log alpha = -2."""
    model = IsingModel(2, [(0, 1, 1.0)])
    x1, log_alpha = saw_log_acceptance(model, make_state([1, 1]), [0], 1.0)
    assert x1.tolist() == [-1, 1]
    assert log_alpha == pytest.approx(-2.0)


def test_biased_step_prefers_low_energy():
    """Spin 0 sits against a strong field, so flipping it lowers the energy."""
    model = IsingModel(3, [], fields=[-3.0, 0.0, 0.0])
    x0 = make_state([1, 1, 1])
    # dE = (-6, 0, 0): p(0) = e^6 / (e^6 + 2) at gamma = 1
    expected = 6.0 - math.log(math.exp(6.0) + 2.0)
    assert saw_logprob(model, x0, [0], 1.0) == pytest.approx(expected)


@pytest.mark.parametrize("kind", ["tree", "flat"])
def test_sampled_walks_replay_consistently(kind):
    model = make_torus_2d(4, "gauss:1", "gauss:0.3", seed=2)
    rng = np.random.default_rng(5)
    for k in (1, 3, 8, 16):
        x0 = random_state(16, rng)
        path, x1, log_prob = sample_saw(model, x0, k, 0.8, rng, kind)
        assert len(path) == k
        assert hamming_distance(x0, x1) == k
        assert log_prob == pytest.approx(saw_logprob(model, x0, path, 0.8, kind), abs=1e-10)


def test_walk_length_out_of_range():
    model = free_spins(4)
    with pytest.raises(InvalidParameterError):
        sample_saw(model, random_state(4, 0), 5, 1.0, np.random.default_rng(0))
    with pytest.raises(InvalidParameterError):
        sample_saw(model, random_state(4, 0), 0, 1.0, np.random.default_rng(0))


# -------------------------------------------------------------------------
# SCENARIO 2: Paths and parameters
# -------------------------------------------------------------------------
def test_path_reversal():
    path = SawPath((1, 2, 3))
    assert path.reversed().flips == (3, 2, 1)
    assert path.reversed().reversed() == path
    with pytest.raises(InvalidParameterError):
        SawPath((1, 2, 1))
    with pytest.raises(InvalidParameterError):
        SawPath(())


def test_irreducibility_guard():
    with pytest.raises(InvalidParameterError):
        KernelParams(2, 2, 1.0, 1.0)
    # Explicitly allowed for analysis.
    params = KernelParams(2, 2, 1.0, 1.0, check_irreducible=False)
    assert params.k_l == params.k_u == 2
    KernelParams(1, 1, 0.0, 0.0)
    KernelParams(2, 3, 0.5, 1.0)


def test_invalid_params():
    with pytest.raises(InvalidParameterError):
        KernelParams(3, 2, 1.0, 1.0)
    with pytest.raises(InvalidParameterError):
        KernelParams(1, 2, 2.0, 1.0)
    with pytest.raises(InvalidParameterError):
        KernelParams(1, 2, 1.0, 1.0, p_LL=0.5, p_HL=0.4, p_LH=0.0)
    with pytest.raises(InvalidParameterError):
        KernelParams(1, 2, 1.0, 1.0, n_segments=6)
    with pytest.raises(InvalidParameterError):
        KernelParams(1, 5, 1.0, 1.0).validate_for(free_spins(4))


def test_params_mapping_round_trip():
    params = KernelParams(1, 4, 0.25, 2.0, 0.5, 0.25, 0.25, 3)
    assert KernelParams.from_mapping(params.to_mapping()) == params
    assert params.component_gammas("HL") == (2.0, 0.25)
    assert params.component_gammas("LH") == (0.25, 2.0)


# -------------------------------------------------------------------------
# SCENARIO 3: Proposals and the MH step
# -------------------------------------------------------------------------
def test_uniform_target_always_accepts():
    model = free_spins(6)
    params = KernelParams(1, 3, 0.5, 2.0, p_LL=0.4, p_HL=0.3, p_LH=0.3, n_segments=2)
    summary = run_chain(model, random_state(6, 0), FixedPolicy(params), 500, np.random.default_rng(0))
    assert summary.accepted == 500
    assert summary.acceptance_rate == 1.0


def test_proposal_bookkeeping():
    model = make_random_graph(8, seed=3)
    params = KernelParams(1, 3, 0.5, 1.5, p_LL=0.5, p_HL=0.25, p_LH=0.25, n_segments=3)
    rng = np.random.default_rng(4)
    x0 = random_state(8, rng)
    record = propose(model, x0, params, rng)
    assert len(record.segments) == 3
    assert record.energy_change == pytest.approx(energy(model, record.proposed_state) - energy(model, x0))
    assert record.walk_length == sum(a + b for a, b in (s.lengths for s in record.segments))
    assert all(s.component in ("LL", "HL", "LH") for s in record.segments)
    # x0 itself is untouched.
    assert np.array_equal(x0, random_state(8, np.random.default_rng(4)))


def test_pure_low_mixture_factorizes():
    """With p_LL = 1 the pair density is the product of two walk densities at gamma_L."""
    model = make_random_graph(6, seed=1)
    x0 = random_state(6, 1)
    params = KernelParams(1, 2, 0.7, 1.4)
    first, second = SawPath((2, 4)), SawPath((4,))
    mid, log_first = saw_log_acceptance(model, x0, first, 0.7)[0], saw_logprob(model, x0, first, 0.7)
    expected = log_first + saw_logprob(model, mid, second, 0.7)
    assert pair_log_mixture(model, x0, (first, second), params) == pytest.approx(expected)


def test_pair_mixture_combines_components():
    model = make_random_graph(5, seed=6)
    x0 = random_state(5, 2)
    first, second = SawPath((0, 3)), SawPath((1,))
    mid = saw_log_acceptance(model, x0, first, 1.0)[0]

    def component(g1, g2):
        return saw_logprob(model, x0, first, g1) + saw_logprob(model, mid, second, g2)

    params = KernelParams(1, 2, 0.5, 2.0, p_LL=0.2, p_HL=0.5, p_LH=0.3)
    expected = math.log(0.2 * math.exp(component(0.5, 0.5)) + 0.5 * math.exp(component(2.0, 0.5))
                        + 0.3 * math.exp(component(0.5, 2.0)))
    assert pair_log_mixture(model, x0, (first, second), params) == pytest.approx(expected)


def test_log_acceptance_ratio_formula():
    assert log_acceptance_ratio(2.0, 1.5, -3.0, -1.0) == pytest.approx(-3.0 + 2.0)


def test_step_rejects_too_long_walks():
    params = KernelParams(1, 5, 1.0, 1.0)
    with pytest.raises(InvalidParameterError):
        sardonics_step(free_spins(4), random_state(4, 0), params, np.random.default_rng(0))


def test_chain_energy_tracking():
    model = make_torus_2d(4, "pm1", "gauss:0.2", seed=7)
    trace = []
    params = KernelParams(1, 4, 0.5, 1.0, p_LL=0.6, p_HL=0.2, p_LH=0.2)
    summary = run_chain(model, random_state(16, 3), FixedPolicy(params), 300, np.random.default_rng(3),
                        sink=lambda *row: trace.append(row))
    assert [row[0] for row in trace] == list(range(1, 301))
    assert trace[-1][1] == pytest.approx(summary.final_energy, abs=1e-9)
    assert summary.final_energy == pytest.approx(energy(model, summary.final_state))
    assert sum(row[2] for row in trace) == summary.accepted
    assert all(row[3] >= 2 for row in trace)


def test_chain_is_deterministic_per_seed():
    model = make_random_graph(7, seed=2)
    params = KernelParams(1, 3, 0.5, 1.0)

    def final(seed):
        return run_chain(model, random_state(7, 0), FixedPolicy(params), 200, np.random.default_rng(seed))

    a, b = final(9), final(9)
    assert a.final_state.tolist() == b.final_state.tolist()
    assert a.accepted == b.accepted


def test_single_walk_step():
    model = make_random_graph(6, seed=4)
    rng = np.random.default_rng(1)
    state = random_state(6, rng)
    for _ in range(50):
        new_state, path, accepted = sardonics_single_step(model, state, [1, 2], 1.0, rng)
        assert len(path) in (1, 2)
        assert hamming_distance(state, new_state) == (len(path) if accepted else 0)
        state = new_state


@pytest.mark.slow
def test_chain_matches_exact_distribution():
    model = make_random_graph(5, edge_prob=0.6, seed=3)
    params = KernelParams(1, 3, 0.5, 1.0, p_LL=0.5, p_HL=0.25, p_LH=0.25, n_segments=2)
    visits = []
    rng = np.random.default_rng(1)
    state = random_state(5, rng)
    for _ in range(100_000):
        state, _, _ = sardonics_step(model, state, params, rng)
        visits.append(state_index(state))
    empirical = empirical_distribution(np.array(visits), 1 << 5)
    assert tv_distance(empirical, exact_distribution(model)) < 0.02
