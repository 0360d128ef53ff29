"""
Brute-force oracles for small models: the exact target distribution, dense
transition matrices of every kernel built by enumeration, and the residuals
the verification suites check them with.

States are indexed with ising_model.state_index (bit b set <=> spin b = +1).
"""
import math
from itertools import permutations

import numpy as np
from scipy.special import log_expit, logsumexp

from baseline_kernels import UnionFind
from errors import DimensionError, InvalidParameterError, OracleBudgetError
from ising_model import (HammingShell, apply_flip, energy, hamming_distance, state_from_index,
                         state_index)
from saw_kernel import SawPath, log_acceptance_ratio, pair_log_mixture, saw_logprob

MAX_EXACT_SPINS = 20
MAX_KERNEL_SPINS = 12
ORACLE_BUDGET = 10 ** 7


def _check_size(model, cap):
    if model.num_spins > cap:
        raise DimensionError(f"exact enumeration is capped at M={cap}, model has M={model.num_spins}")


def all_states(num_spins):
    """(2^M, M) int8 array; row r is state_from_index(r)."""
    codes = np.arange(1 << num_spins, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(num_spins)) & 1
    return (2 * bits - 1).astype(np.int8)


def _energies(model, states):
    s = states.astype(np.float64)
    return -(s[:, model.edge_i] * s[:, model.edge_j]) @ model.edge_J - s @ model.fields


def all_energies(model):
    _check_size(model, MAX_EXACT_SPINS)
    return _energies(model, all_states(model.num_spins))


def exact_distribution(model):
    logits = -model.beta * all_energies(model)
    return np.exp(logits - logsumexp(logits))


def log_partition_function(model, chunk_bits=14):
    """log Z accumulated chunk by chunk without holding all 2^M energies."""
    _check_size(model, MAX_EXACT_SPINS)
    num_spins = model.num_spins
    low_bits = min(chunk_bits, num_spins)
    low = all_states(low_bits)
    result = -np.inf
    for high in range(1 << (num_spins - low_bits)):
        high_bits = (high >> np.arange(num_spins - low_bits)) & 1
        tail = np.broadcast_to((2 * high_bits - 1).astype(np.int8), (len(low), num_spins - low_bits))
        chunk = np.concatenate([low, tail], axis=1)
        result = np.logaddexp(result, logsumexp(-model.beta * _energies(model, chunk)))
    return float(result)


def count_paths(num_spins, k):
    """Number of self-avoiding flip sequences of length k: M! / (M-k)!."""
    return math.perm(num_spins, k)


def _check_budget(count, what):
    if count > ORACLE_BUDGET:
        raise OracleBudgetError(f"{what} needs {count} enumerations, budget is {ORACLE_BUDGET}")


def _as_lengths(k):
    lengths = (int(k),) if np.isscalar(k) else tuple(int(v) for v in k)
    if not lengths:
        raise InvalidParameterError("at least one walk length is needed")
    return lengths


def dense_saw_logprob(model, x0, path, gamma):
    """
    Walk log-probability from a dense softmax over full state energies at every
    step; independent of the candidate stores.
    """
    state = x0.copy()
    remaining = list(range(model.num_spins))
    total = 0.0
    for l in SawPath(path):
        logits = np.array([-gamma * energy(model, apply_flip(state, j)) for j in remaining])
        total += logits[remaining.index(l)] - logsumexp(logits)
        remaining.remove(l)
        state = apply_flip(state, l)
    return float(total)


def enumerate_walks(model, x0, k, gamma, store_kind="auto"):
    """Yields (path, end state, log f) for every length-k walk from x0."""
    for flips in permutations(range(model.num_spins), k):
        path = SawPath(flips)
        yield path, apply_flip(x0, *flips), saw_logprob(model, x0, path, gamma, store_kind)


def exact_sardonics_kernel(model, k, gamma, store_kind="auto"):
    """
    Marginal transition matrix of the single-walk move with lengths drawn
    uniformly from `k` (an int or a sequence). Every walk realization is
    enumerated; rejected mass accumulates on the diagonal.
    """
    _check_size(model, MAX_KERNEL_SPINS)
    lengths = _as_lengths(k)
    num_spins = model.num_spins
    _check_budget((1 << num_spins) * sum(count_paths(num_spins, v) for v in lengths), "exact SAW kernel")
    energies = all_energies(model)
    kernel = np.zeros((1 << num_spins, 1 << num_spins))
    length_weight = 1.0 / len(lengths)
    for x in range(1 << num_spins):
        x0 = state_from_index(x, num_spins)
        rejected = 0.0
        for length in lengths:
            for path, x1, log_fwd in enumerate_walks(model, x0, length, gamma, store_kind):
                y = state_index(x1)
                log_rev = saw_logprob(model, x1, path.reversed(), gamma, store_kind)
                log_alpha = log_acceptance_ratio(model.beta, energies[y] - energies[x], log_fwd, log_rev)
                mass = length_weight * math.exp(log_fwd)
                kernel[x, y] += mass * math.exp(min(0.0, log_alpha))
                rejected -= mass * math.expm1(min(0.0, log_alpha))
        kernel[x, x] += rejected
    return kernel


def exact_pair_kernel(model, params, store_kind="auto"):
    """
    Marginal transition matrix of a one-segment walk-pair move under `params`
    (mixture over bias levels, lengths uniform in k_l..k_u).
    """
    if params.n_segments != 1:
        raise InvalidParameterError("the pair oracle enumerates single-segment moves only")
    _check_size(model, MAX_KERNEL_SPINS)
    params.validate_for(model)
    num_spins = model.num_spins
    lengths = range(params.k_l, params.k_u + 1)
    walks_per_state = sum(count_paths(num_spins, v) for v in lengths)
    _check_budget((1 << num_spins) * walks_per_state ** 2, "exact pair kernel")
    energies = all_energies(model)
    kernel = np.zeros((1 << num_spins, 1 << num_spins))
    length_weight = 1.0 / len(lengths) ** 2
    walks = [SawPath(p) for v in lengths for p in permutations(range(num_spins), v)]
    for x in range(1 << num_spins):
        x0 = state_from_index(x, num_spins)
        rejected = 0.0
        for first in walks:
            for second in walks:
                x1 = apply_flip(apply_flip(x0, *first), *second)
                y = state_index(x1)
                log_fwd = pair_log_mixture(model, x0, (first, second), params, store_kind)
                log_rev = pair_log_mixture(model, x1, (second.reversed(), first.reversed()), params, store_kind)
                log_alpha = log_acceptance_ratio(model.beta, energies[y] - energies[x], log_fwd, log_rev)
                mass = length_weight * math.exp(log_fwd)
                kernel[x, y] += mass * math.exp(min(0.0, log_alpha))
                rejected -= mass * math.expm1(min(0.0, log_alpha))
        kernel[x, x] += rejected
    return kernel


def pathwise_balance_residual(model, k, gamma, store_kind="auto"):
    """
    max over (x0, sigma) of |pi(x0) K(x1, sigma | x0) - pi(x1) K(x0, R(sigma) | x1)|
    for the single-walk move of length k.
    """
    _check_size(model, MAX_KERNEL_SPINS)
    num_spins = model.num_spins
    _check_budget((1 << num_spins) * count_paths(num_spins, k), "pathwise balance check")
    pi = exact_distribution(model)
    energies = all_energies(model)

    def joint(x, y, log_fwd, log_rev):
        log_alpha = log_acceptance_ratio(model.beta, energies[y] - energies[x], log_fwd, log_rev)
        return pi[x] * math.exp(log_fwd + min(0.0, log_alpha))

    worst = 0.0
    for x in range(1 << num_spins):
        x0 = state_from_index(x, num_spins)
        for path, x1, log_fwd in enumerate_walks(model, x0, k, gamma, store_kind):
            y = state_index(x1)
            log_rev = saw_logprob(model, x1, path.reversed(), gamma, store_kind)
            forward = joint(x, y, log_fwd, log_rev)
            backward = joint(y, x, log_rev, log_fwd)
            worst = max(worst, abs(forward - backward))
    return worst


def effective_vs_marginal_alpha(model, x0, x1, k, gamma=1.0, store_kind="auto"):
    """
    (alpha_eff, alpha_m) for a pair of states at Hamming distance k:
    alpha_eff averages the pathwise acceptance over the walks joining them,
    alpha_m is the usual acceptance of the walk-marginalized proposal.
    """
    if hamming_distance(x0, x1) != k:
        raise InvalidParameterError(
            f"states are at Hamming distance {hamming_distance(x0, x1)}, walks of length {k} cannot join them")
    differing = np.flatnonzero(x0 != x1).tolist()
    _check_budget(math.factorial(k), "effective acceptance")
    log_target_ratio = -model.beta * (energy(model, x1) - energy(model, x0))

    log_fwd, log_rev = [], []
    for flips in permutations(differing):
        path = SawPath(flips)
        log_fwd.append(saw_logprob(model, x0, path, gamma, store_kind))
        log_rev.append(saw_logprob(model, x1, path.reversed(), gamma, store_kind))
    log_fwd = np.array(log_fwd)
    log_rev = np.array(log_rev)

    log_q_fwd = logsumexp(log_fwd)
    log_q_rev = logsumexp(log_rev)
    alpha_m = math.exp(min(0.0, log_target_ratio + log_q_rev - log_q_fwd))
    pathwise = np.minimum(0.0, log_target_ratio + log_rev - log_fwd)
    alpha_eff = math.exp(logsumexp(log_fwd + pathwise) - log_q_fwd)
    return alpha_eff, alpha_m


def shell_pairs(center, distance):
    """(center, y) for every y in the Hamming shell around center."""
    return [(center, y) for y in HammingShell(center, distance)]


def _layer_kernel(model, states, layer):
    """Resamples the spins of `layer` jointly from their heat-bath conditionals."""
    fields = states.astype(np.float64) @ model.coupling_matrix.toarray() + model.fields
    log_up = log_expit(2.0 * model.beta * fields)
    log_down = log_expit(-2.0 * model.beta * fields)
    others = np.setdiff1d(np.arange(model.num_spins), layer)
    n = len(states)
    kernel = np.zeros((n, n))
    target_up = states[:, layer] > 0
    for x in range(n):
        agree = np.all(states[:, others] == states[x, others], axis=1)
        logp = np.where(target_up, log_up[x, layer], log_down[x, layer]).sum(axis=1)
        kernel[x] = np.where(agree, np.exp(logp), 0.0)
    return kernel


def exact_gibbs_kernel(model):
    """One systematic sweep: product of the site kernels for sites 0..M-1."""
    _check_size(model, MAX_KERNEL_SPINS)
    states = all_states(model.num_spins)
    kernel = np.eye(len(states))
    for i in range(model.num_spins):
        kernel = kernel @ _layer_kernel(model, states, np.array([i]))
    return kernel


def exact_block_gibbs_kernel(model):
    """Hidden layer given visible, then visible given hidden."""
    _check_size(model, MAX_KERNEL_SPINS)
    visible, hidden = model.layers()
    states = all_states(model.num_spins)
    return _layer_kernel(model, states, hidden) @ _layer_kernel(model, states, visible)


def exact_swendsen_wang_kernel(model):
    """
    Enumerates every bond configuration over satisfied edges (ghost edges for
    the fields included) and every flip pattern of the non-ghost clusters.
    """
    _check_size(model, MAX_KERNEL_SPINS)
    num_spins = model.num_spins
    ghost = num_spins
    edges = list(zip(model.edge_i.tolist(), model.edge_j.tolist(), model.edge_J.tolist()))
    edges += [(i, ghost, h) for i, h in enumerate(model.fields.tolist()) if h != 0.0]
    states = all_states(num_spins)

    def satisfied_edges(s):
        spins = s.tolist() + [1]
        return [(i, j, c) for i, j, c in edges if c * spins[i] * spins[j] > 0]

    _check_budget(sum(1 << len(satisfied_edges(s)) for s in states), "exact Swendsen-Wang kernel")
    kernel = np.zeros((len(states), len(states)))
    for x, s in enumerate(states):
        bonds = satisfied_edges(s)
        probs = [-math.expm1(-2.0 * model.beta * abs(c)) for _, _, c in bonds]
        for mask in range(1 << len(bonds)):
            weight = 1.0
            forest = UnionFind(num_spins + 1)
            for b, ((i, j, _), p) in enumerate(zip(bonds, probs)):
                if mask >> b & 1:
                    weight *= p
                    forest.union(i, j)
                else:
                    weight *= 1.0 - p
            if weight == 0.0:
                continue
            ghost_root = forest.find(ghost)
            roots = np.array([forest.find(i) for i in range(num_spins)])
            free = sorted(set(roots.tolist()) - {ghost_root})
            share = weight / (1 << len(free))
            for pattern in range(1 << len(free)):
                flipped = [r for b, r in enumerate(free) if pattern >> b & 1]
                y = np.where(np.isin(roots, flipped), -s, s)
                kernel[x, state_index(y)] += share
    return kernel


def row_sum_residual(kernel):
    return float(np.abs(kernel.sum(axis=1) - 1.0).max())


def stationarity_residual(pi, kernel):
    """||pi K - pi||_1."""
    return float(np.abs(pi @ kernel - pi).sum())


def detailed_balance_residual(pi, kernel):
    """max over pairs of |pi(x) K(y|x) - pi(y) K(x|y)|."""
    flux = pi[:, None] * kernel
    return float(np.abs(flux - flux.T).max())


def inverse_cdf_index(weights, u):
    """Shadow-array draw: first i with cumsum(weights)[i] > u * total."""
    cumulative = np.cumsum(np.asarray(weights, dtype=np.float64))
    return int(np.searchsorted(cumulative, u * cumulative[-1], side="right"))
