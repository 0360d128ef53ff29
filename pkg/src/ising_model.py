"""
Binary energy models in the unified Ising form

    E(s) = - sum_(i,j) J_ij s_i s_j - sum_i h_i s_i,    s_i in {-1, +1}

with target pi(s) proportional to exp(-beta * E(s)).

Spin states are numpy int8 vectors. The {0,1} formalism maps x=0 <-> s=-1 and
x=1 <-> s=+1; nothing in the library stores the {0,1} form.
"""
import numpy as np
import scipy.sparse as sp

from errors import DimensionError, InvalidParameterError

SPIN_DTYPE = np.int8


class IsingModel:
    """
    Immutable sparse Ising model. Safe to share between chains.

    edges are normalized to i < j and sorted lexicographically; couplings are
    symmetric by construction (each unordered pair is stored once).
    `bipartition` is the visible-layer size k when spins 0..k-1 and k..M-1 form
    the two independent layers of a bipartite model (block-Gibbs eligible).
    """

    def __init__(self, num_spins, edges, fields=None, beta=1.0, bipartition=None, name=None):
        num_spins = int(num_spins)
        if num_spins < 1:
            raise InvalidParameterError(f"num_spins must be >= 1, got {num_spins}")
        if not beta > 0:
            raise InvalidParameterError(f"beta must be > 0, got {beta}")

        normalized = {}
        for i, j, coupling in edges:
            i, j = int(i), int(j)
            if i == j:
                raise InvalidParameterError(f"self-loop on spin {i}")
            if not (0 <= i < num_spins and 0 <= j < num_spins):
                raise DimensionError(f"edge ({i}, {j}) outside 0..{num_spins - 1}")
            key = (i, j) if i < j else (j, i)
            if key in normalized:
                raise InvalidParameterError(f"duplicate edge {key}")
            normalized[key] = float(coupling)

        ordered = sorted(normalized.items())
        self.num_spins = num_spins
        self.beta = float(beta)
        self.name = name
        self.edge_i = np.array([k[0] for k, _ in ordered], dtype=np.int64)
        self.edge_j = np.array([k[1] for k, _ in ordered], dtype=np.int64)
        self.edge_J = np.array([c for _, c in ordered], dtype=np.float64)

        if fields is None:
            fields = np.zeros(num_spins)
        fields = np.asarray(fields, dtype=np.float64)
        if fields.shape != (num_spins,):
            raise DimensionError(f"fields has shape {fields.shape}, expected ({num_spins},)")
        self.fields = fields.copy()

        if bipartition is not None:
            bipartition = int(bipartition)
            if not 1 <= bipartition < num_spins:
                raise InvalidParameterError(f"bipartition {bipartition} outside 1..{num_spins - 1}")
            same_layer = (self.edge_i < bipartition) == (self.edge_j < bipartition)
            if np.any(same_layer):
                raise InvalidParameterError("bipartition declared but intra-layer edges exist")
        self.bipartition = bipartition

        rows = np.concatenate([self.edge_i, self.edge_j])
        cols = np.concatenate([self.edge_j, self.edge_i])
        vals = np.concatenate([self.edge_J, self.edge_J])
        self.coupling_matrix = sp.csr_matrix((vals, (rows, cols)), shape=(num_spins, num_spins))

        # Plain-python adjacency for the per-site loops of the kernels.
        csr = self.coupling_matrix
        self.neighbor_lists = [
            list(zip(csr.indices[csr.indptr[i]:csr.indptr[i + 1]].tolist(),
                     csr.data[csr.indptr[i]:csr.indptr[i + 1]].tolist()))
            for i in range(num_spins)
        ]

        for arr in (self.edge_i, self.edge_j, self.edge_J, self.fields):
            arr.flags.writeable = False

    @property
    def num_edges(self):
        return len(self.edge_J)

    @property
    def edges(self):
        return list(zip(self.edge_i.tolist(), self.edge_j.tolist(), self.edge_J.tolist()))

    @property
    def average_degree(self):
        return 2.0 * self.num_edges / self.num_spins

    def degree(self, i):
        return len(self.neighbor_lists[i])

    def layers(self):
        """Returns (visible, hidden) index arrays of a bipartite model."""
        if self.bipartition is None:
            raise InvalidParameterError("model declares no bipartition")
        return np.arange(self.bipartition), np.arange(self.bipartition, self.num_spins)

    def edges_from_neighbor_lists(self):
        """Rebuilds the sorted edge list from adjacency (consistency check)."""
        rebuilt = set()
        for i, nbrs in enumerate(self.neighbor_lists):
            for j, coupling in nbrs:
                rebuilt.add((min(i, j), max(i, j), coupling))
        return sorted(rebuilt)

    def with_beta(self, beta):
        return IsingModel(self.num_spins, self.edges, self.fields, beta, self.bipartition, self.name)

    def __eq__(self, other):
        if not isinstance(other, IsingModel):
            return NotImplemented
        return (self.num_spins == other.num_spins
                and self.beta == other.beta
                and self.bipartition == other.bipartition
                and np.array_equal(self.edge_i, other.edge_i)
                and np.array_equal(self.edge_j, other.edge_j)
                and np.array_equal(self.edge_J, other.edge_J)
                and np.array_equal(self.fields, other.fields))

    def __repr__(self):
        label = f"{self.name} " if self.name else ""
        return f"IsingModel({label}M={self.num_spins}, edges={self.num_edges}, beta={self.beta})"


def _check_state(model, state):
    if state.shape != (model.num_spins,):
        raise DimensionError(f"state has length {state.shape}, model has M={model.num_spins}")


def _check_index(state, i):
    if not 0 <= i < len(state):
        raise DimensionError(f"index {i} outside 0..{len(state) - 1}")


def make_state(values):
    """Validates and converts a sequence of +-1 values into a spin state."""
    state = np.asarray(values, dtype=SPIN_DTYPE)
    if state.ndim != 1 or not np.all((state == 1) | (state == -1)):
        raise InvalidParameterError("spin states contain only -1 and +1")
    return state


def from_binary(x):
    return (2 * np.asarray(x, dtype=SPIN_DTYPE) - 1).astype(SPIN_DTYPE)


def to_binary(state):
    return ((np.asarray(state) + 1) // 2).astype(np.int8)


def random_state(num_spins, seed):
    if num_spins < 1:
        raise InvalidParameterError(f"num_spins must be >= 1, got {num_spins}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return np.where(rng.random(num_spins) < 0.5, -1, 1).astype(SPIN_DTYPE)


def energy(model, state):
    _check_state(model, state)
    s = state.astype(np.float64)
    return float(-np.dot(model.edge_J, s[model.edge_i] * s[model.edge_j]) - np.dot(model.fields, s))


def local_field(model, state, i):
    _check_index(state, i)
    total = model.fields[i]
    for j, coupling in model.neighbor_lists[i]:
        total += coupling * state[j]
    return float(total)


def local_fields(model, state):
    _check_state(model, state)
    return model.coupling_matrix @ state.astype(np.float64) + model.fields


def flip_delta(model, state, i):
    """Energy change of flipping spin i, in O(degree(i))."""
    _check_index(state, i)
    return 2.0 * float(state[i]) * local_field(model, state, i)


def flip_deltas(model, state):
    return 2.0 * state.astype(np.float64) * local_fields(model, state)


def apply_flip(state, *indices):
    """F(x, i_1, ..., i_k): returns a copy with the given bits inverted left to right."""
    flipped = state.copy()
    for i in indices:
        _check_index(state, i)
        flipped[i] = -flipped[i]
    return flipped


def agreement_set(x, y):
    """P(x, y): indices where the two states agree."""
    if x.shape != y.shape:
        raise DimensionError(f"states of length {len(x)} and {len(y)}")
    return set(np.flatnonzero(x == y).tolist())


def hamming_distance(x, y):
    if x.shape != y.shape:
        raise DimensionError(f"states of length {len(x)} and {len(y)}")
    return int(np.count_nonzero(x != y))


def magnetization(state):
    return float(np.mean(state))


def state_index(state):
    """Integer code of a state: bit b set <=> spin b is +1."""
    bits = (np.asarray(state) > 0).astype(np.int64)
    return int(np.dot(bits, 1 << np.arange(len(bits), dtype=np.int64)))


def state_from_index(index, num_spins):
    bits = (int(index) >> np.arange(num_spins)) & 1
    return (2 * bits - 1).astype(SPIN_DTYPE)


class HammingShell:
    """S_n(center): all states at Hamming distance n from center. Enumerated lazily."""

    def __init__(self, center, distance):
        if not 0 <= distance <= len(center):
            raise InvalidParameterError(f"distance {distance} outside 0..{len(center)}")
        self.center = center
        self.distance = int(distance)

    def size(self):
        from math import comb
        return comb(len(self.center), self.distance)

    def __iter__(self):
        from itertools import combinations
        for positions in combinations(range(len(self.center)), self.distance):
            yield apply_flip(self.center, *positions)
