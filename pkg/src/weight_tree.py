"""
Weighted sampling over flip candidates.

WeightTree is an implicit complete binary sum tree over the next power of two
>= capacity (zero-padded leaves): node n has children 2n and 2n+1, leaves live
at size..2*size-1, the root at 1. Draws are exact inverse-CDF in leaf order.

Candidate stores keep the per-spin energy increments dE_j of the walk's current
intermediate state and expose the walk's step distribution
    p_g(l) proportional to exp(-g * dE_l) over still-unflipped spins l
for one or more bias levels g sharing the same dE cache.
"""
import math

import numpy as np
from scipy.special import logsumexp

from errors import DimensionError, EmptySupportError, InvalidParameterError
from ising_model import flip_deltas
from logger_config import logger

REBUILD_EVERY = 1 << 16
# Internal sums are recomputed once the mass moved through the tree since the
# last rebuild exceeds this multiple of the current total.
RELATIVE_DRIFT = float(1 << 16)
MAX_EXPONENT = 500.0
MIN_TOTAL = 1e-3


def _check_weight(w):
    if not (math.isfinite(w) and w >= 0.0):
        raise InvalidParameterError(f"weights must be finite and >= 0, got {w}")


class WeightTree:
    def __init__(self, weights):
        weights = np.asarray(weights, dtype=np.float64)
        if weights.ndim != 1 or len(weights) == 0:
            raise InvalidParameterError("WeightTree needs at least one weight")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise InvalidParameterError("weights must be finite and >= 0")
        self.capacity = len(weights)
        self.size = 1 << max(0, (self.capacity - 1).bit_length())
        self._build(weights)

    def _build(self, leaves):
        nodes = np.zeros(2 * self.size)
        nodes[self.size:self.size + self.capacity] = leaves
        width = self.size
        while width > 1:
            half = width // 2
            nodes[half:width] = nodes[width:2 * width:2] + nodes[width + 1:2 * width:2]
            width = half
        # Python floats: the per-node loops below are faster on lists than on numpy scalars.
        self.nodes = nodes.tolist()
        self.updates_since_rebuild = 0
        self.churn = 0.0

    def rebuild(self):
        """Recomputes every internal sum exactly from the leaves."""
        self._build(np.asarray(self.nodes[self.size:self.size + self.capacity]))

    def total(self):
        return self.nodes[1]

    def get(self, i):
        if not 0 <= i < self.capacity:
            raise DimensionError(f"leaf {i} outside 0..{self.capacity - 1}")
        return self.nodes[self.size + i]

    def leaves(self):
        return np.asarray(self.nodes[self.size:self.size + self.capacity])

    def update(self, i, w):
        if not 0 <= i < self.capacity:
            raise DimensionError(f"leaf {i} outside 0..{self.capacity - 1}")
        w = float(w)
        _check_weight(w)
        nodes = self.nodes
        n = self.size + i
        change = w - nodes[n]
        nodes[n] = w
        n >>= 1
        while n:
            nodes[n] += change
            n >>= 1
        self.updates_since_rebuild += 1
        self.churn += abs(change)
        if self.updates_since_rebuild >= REBUILD_EVERY or self.drifted():
            self.rebuild()

    def drifted(self):
        """
        True when rounding left in the internal sums may be large relative to
        the total, e.g. after a dominant leaf was zeroed by subtraction.
        """
        return self.churn > RELATIVE_DRIFT * self.nodes[1]

    def sample(self, u):
        """Leaf i with prefix(i) <= u*total < prefix(i+1)."""
        nodes = self.nodes
        total = nodes[1]
        if not total > 0.0:
            raise EmptySupportError("cannot sample from a tree with zero total weight")
        target = u * total
        n = 1
        size = self.size
        while n < size:
            left = nodes[2 * n]
            if target < left:
                n = 2 * n
            else:
                target -= left
                n = 2 * n + 1
        i = n - size
        if i >= self.capacity or nodes[n] <= 0.0:
            # Rounding pushed the target past the last positive leaf.
            i = self._last_positive(i)
        return i

    def _last_positive(self, start):
        for i in range(min(start, self.capacity - 1), -1, -1):
            if self.nodes[self.size + i] > 0.0:
                return i
        raise EmptySupportError("no leaf with positive weight")


def build(weights):
    return WeightTree(weights)


class FlatCandidateStore:
    """
    Candidate store that recomputes the step distribution densely at every
    query. Preferred for dense couplings where a flip touches most leaves.
    """

    def __init__(self, model, state, gammas):
        self.model = model
        self.state = state.copy()
        self.gammas = tuple(float(g) for g in gammas)
        self.delta = flip_deltas(model, self.state)
        self.active = np.ones(model.num_spins, dtype=bool)
        self.energy_change = 0.0
        self._log_norm = None

    @property
    def n_active(self):
        return int(np.count_nonzero(self.active))

    def _norms(self):
        if self._log_norm is None:
            live = self.delta[self.active]
            if len(live) == 0:
                raise EmptySupportError("no unflipped candidates left")
            self._log_norm = [logsumexp(-g * live) for g in self.gammas]
        return self._log_norm

    def log_probs(self, l):
        """Log step probability of flipping l, one entry per bias level."""
        if not self.active[l]:
            raise InvalidParameterError(f"spin {l} already flipped in this walk")
        norms = self._norms()
        return np.array([-g * self.delta[l] - z for g, z in zip(self.gammas, norms)])

    def draw(self, u, g_index=0):
        g = self.gammas[g_index]
        live = np.flatnonzero(self.active)
        if len(live) == 0:
            raise EmptySupportError("no unflipped candidates left")
        exponents = -g * self.delta[live]
        weights = np.exp(exponents - exponents.max())
        cumulative = np.cumsum(weights)
        pos = int(np.searchsorted(cumulative, u * cumulative[-1], side="right"))
        return int(live[min(pos, len(live) - 1)])

    def flip(self, l):
        if not self.active[l]:
            raise InvalidParameterError(f"spin {l} already flipped in this walk")
        old = float(self.state[l])
        self.energy_change += self.delta[l]
        csr = self.model.coupling_matrix
        lo, hi = csr.indptr[l], csr.indptr[l + 1]
        nbrs = csr.indices[lo:hi]
        self.delta[nbrs] -= 4.0 * csr.data[lo:hi] * self.state[nbrs] * old
        self.delta[l] = -self.delta[l]
        self.state[l] = -self.state[l]
        self.active[l] = False
        self._log_norm = None


class TreeCandidateStore:
    """
    One WeightTree per bias level over exp(-g * (dE_j - ref_g)). ref_g is reset
    (and the tree rebuilt) whenever an updated exponent exceeds +500; the
    negative tail is allowed to underflow towards zero.
    """

    def __init__(self, model, state, gammas):
        self.model = model
        self.state = state.copy()
        self.gammas = tuple(float(g) for g in gammas)
        self.energy_change = 0.0
        self._delta_list = flip_deltas(model, self.state).tolist()
        self._active_list = [True] * model.num_spins
        self.refs = [0.0] * len(self.gammas)
        self.trees = [None] * len(self.gammas)
        for k in range(len(self.gammas)):
            self._rebuild(k)

    @property
    def delta(self):
        return np.asarray(self._delta_list)

    @property
    def active(self):
        return np.asarray(self._active_list)

    @property
    def n_active(self):
        return sum(self._active_list)

    def _rebuild(self, k):
        g = self.gammas[k]
        delta = np.asarray(self._delta_list)
        mask = np.asarray(self._active_list)
        if not mask.any():
            return
        # Anchor at the most probable candidate so the largest weight is 1.
        ref = float(delta[mask].max() if g < 0 else delta[mask].min())
        self.refs[k] = ref
        weights = np.zeros(len(delta))
        with np.errstate(under="ignore"):
            weights[mask] = np.exp(-g * (delta[mask] - ref))
        if self.trees[k] is None:
            self.trees[k] = WeightTree(weights)
        else:
            self.trees[k]._build(weights)
        logger.debug(f"Candidate tree {k} rebuilt (ref={ref:.3f})")

    def log_probs(self, l):
        if not self._active_list[l]:
            raise InvalidParameterError(f"spin {l} already flipped in this walk")
        d = self._delta_list[l]
        return np.array([-g * (d - ref) - math.log(tree.total())
                         for g, ref, tree in zip(self.gammas, self.refs, self.trees)])

    def draw(self, u, g_index=0):
        if not any(self._active_list):
            raise EmptySupportError("no unflipped candidates left")
        return self.trees[g_index].sample(u)

    def flip(self, l):
        if not self._active_list[l]:
            raise InvalidParameterError(f"spin {l} already flipped in this walk")
        delta = self._delta_list
        old = int(self.state[l])
        self.energy_change += delta[l]
        delta[l] = -delta[l]
        self.state[l] = -old
        self._active_list[l] = False

        touched = []
        state = self.state
        for j, coupling in self.model.neighbor_lists[l]:
            delta[j] -= 4.0 * coupling * int(state[j]) * old
            if self._active_list[j]:
                touched.append(j)

        for k, (g, tree) in enumerate(zip(self.gammas, self.trees)):
            tree.update(l, 0.0)
            ref = self.refs[k]
            for j in touched:
                exponent = -g * (delta[j] - ref)
                if exponent > MAX_EXPONENT:
                    self._rebuild(k)
                    break
                tree.update(j, math.exp(exponent))
            else:
                # Removing the dominant leaves leaves a small total built by
                # cancellation; re-anchor before the relative error grows.
                if tree.total() < MIN_TOTAL:
                    self._rebuild(k)


STORES = {"tree": TreeCandidateStore, "flat": FlatCandidateStore}


def preferred_store(model):
    """Tree when the average degree is below M/4, flat otherwise."""
    return "tree" if model.average_degree < model.num_spins / 4.0 else "flat"


def make_candidate_store(model, state, gammas, kind="auto"):
    if kind == "auto":
        kind = preferred_store(model)
    if kind not in STORES:
        raise InvalidParameterError(f"unknown candidate store '{kind}'")
    return STORES[kind](model, state, gammas)
