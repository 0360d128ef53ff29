"""
Reference samplers: single-site heat bath (Gibbs), block-Gibbs for bipartite
models, Swendsen-Wang cluster updates and single-flip Metropolis.

One call of each kernel is one comparison "step": a full sweep for the
site-wise samplers, one cluster update for Swendsen-Wang.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from errors import InvalidParameterError


def heat_bath_probability(beta, field):
    """P(s_i = +1 | rest) for local field f: 1 / (1 + exp(-2 beta f))."""
    return float(expit(2.0 * beta * field))


def gibbs_sweep(model, state, rng, order="systematic"):
    """Resamples every site once from its conditional. Mutates and returns `state`."""
    if order == "systematic":
        sites = range(model.num_spins)
    elif order == "random":
        sites = rng.permutation(model.num_spins).tolist()
    else:
        raise InvalidParameterError(f"unknown scan order '{order}' (systematic | random)")
    fields = model.fields.tolist()
    nbrs = model.neighbor_lists
    spins = state.tolist()
    uniforms = rng.random(model.num_spins).tolist()
    for u, i in zip(uniforms, sites):
        f = fields[i]
        for j, coupling in nbrs[i]:
            f += coupling * spins[j]
        spins[i] = 1 if u < heat_bath_probability(model.beta, f) else -1
    state[:] = spins
    return state


def _resample_layer(model, state, layer, rng):
    fields = model.coupling_matrix[layer] @ state.astype(np.float64) + model.fields[layer]
    p_up = expit(2.0 * model.beta * fields)
    state[layer] = np.where(rng.random(len(layer)) < p_up, 1, -1)


def block_gibbs_sweep(model, state, rng):
    """Hidden layer given visible, then visible given hidden. Mutates and returns `state`."""
    if model.bipartition is None:
        raise InvalidParameterError("block-Gibbs needs a model with a declared bipartition")
    visible, hidden = model.layers()
    _resample_layer(model, state, hidden, rng)
    _resample_layer(model, state, visible, rng)
    return state


class UnionFind:
    """Disjoint-set forest over 0..n-1 with path compression and union by rank."""

    def __init__(self, n):
        self.parent = list(range(n))
        self.rank = [0] * n
        self.n_clusters = n

    def find(self, a):
        root = a
        parent = self.parent
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        self.n_clusters -= 1
        return ra

    def __repr__(self):
        return f"UnionFind({len(self.parent)} nodes, {self.n_clusters} clusters)"


@dataclass
class ClusterState:
    """Bond configuration of one Swendsen-Wang update. Index M is the ghost spin."""
    bond_flags: np.ndarray
    ghost_bonds: np.ndarray
    forest: UnionFind

    def clusters(self):
        groups = {}
        for i in range(len(self.forest.parent)):
            groups.setdefault(self.forest.find(i), []).append(i)
        return list(groups.values())


def place_bonds(model, state, rng):
    """
    Bonds each satisfied edge with probability 1 - exp(-2 beta |J|). Fields act
    as edges to a ghost spin fixed at +1 with coupling h_i.
    """
    s = state.astype(np.float64)
    satisfied = model.edge_J * s[model.edge_i] * s[model.edge_j] > 0
    p_bond = -np.expm1(-2.0 * model.beta * np.abs(model.edge_J))
    bond_flags = satisfied & (rng.random(model.num_edges) < p_bond)

    ghost_satisfied = model.fields * s > 0
    p_ghost = -np.expm1(-2.0 * model.beta * np.abs(model.fields))
    ghost_bonds = ghost_satisfied & (rng.random(model.num_spins) < p_ghost)

    forest = UnionFind(model.num_spins + 1)
    for i, j in zip(model.edge_i[bond_flags].tolist(), model.edge_j[bond_flags].tolist()):
        forest.union(i, j)
    ghost = model.num_spins
    for i in np.flatnonzero(ghost_bonds).tolist():
        forest.union(i, ghost)
    return ClusterState(bond_flags, ghost_bonds, forest)


def swendsen_wang_step(model, state, rng):
    """One cluster update. Mutates and returns `state`."""
    clusters = place_bonds(model, state, rng)
    forest = clusters.forest
    ghost_root = forest.find(model.num_spins)
    roots = np.array([forest.find(i) for i in range(model.num_spins)])
    unique_roots, inverse = np.unique(roots, return_inverse=True)
    flip = rng.random(len(unique_roots)) < 0.5
    flip[unique_roots == ghost_root] = False
    state[flip[inverse]] *= -1
    return state


def metropolis_sweep(model, state, rng):
    """M single-flip Metropolis attempts at uniformly chosen sites. Mutates and returns `state`."""
    beta = model.beta
    fields = model.fields.tolist()
    nbrs = model.neighbor_lists
    spins = state.tolist()
    sites = rng.integers(model.num_spins, size=model.num_spins).tolist()
    uniforms = rng.random(model.num_spins).tolist()
    for i, u in zip(sites, uniforms):
        f = fields[i]
        for j, coupling in nbrs[i]:
            f += coupling * spins[j]
        delta = 2.0 * spins[i] * f
        if delta <= 0 or u < math.exp(-beta * delta):
            spins[i] = -spins[i]
    state[:] = spins
    return state
