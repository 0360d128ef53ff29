"""
Self-avoiding-walk moves in state space with pathwise Metropolis-Hastings
acceptance.

A walk of length k from x0 flips k distinct spins; at each step the next spin
is drawn from the not-yet-flipped set with probability proportional to
exp(-gamma * E(F(u, l))), i.e. exp(-gamma * dE_l) once the common E(u) factor
cancels. A proposal is N segments, each a pair of walks whose bias levels
(first, second) are (L, L), (H, L) or (L, H) with probabilities p_LL, p_HL,
p_LH. The reverse move replays the segments backwards with every pair's paths
reversed and swapped, and both directions are scored under the full mixture,
so detailed balance holds on the joint (state, paths) space.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from errors import DimensionError, InvalidParameterError
from ising_model import energy
from logger_config import logger
from weight_tree import make_candidate_store

COMPONENTS = ("LL", "HL", "LH")
MAX_SEGMENTS = 5
ENERGY_RESYNC_EVERY = 1000


@dataclass(frozen=True)
class SawPath:
    flips: tuple

    def __post_init__(self):
        flips = tuple(int(i) for i in self.flips)
        object.__setattr__(self, "flips", flips)
        if len(flips) == 0:
            raise InvalidParameterError("a walk flips at least one spin")
        if len(set(flips)) != len(flips):
            raise InvalidParameterError(f"walk {list(flips)} repeats an index")

    def __len__(self):
        return len(self.flips)

    def __iter__(self):
        return iter(self.flips)

    def reversed(self):
        """R(sigma)."""
        return SawPath(self.flips[::-1])


@dataclass(frozen=True)
class KernelParams:
    k_l: int
    k_u: int
    gamma_L: float
    gamma_H: float
    p_LL: float = 1.0
    p_HL: float = 0.0
    p_LH: float = 0.0
    n_segments: int = 1
    check_irreducible: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        if not 1 <= self.k_l <= self.k_u:
            raise InvalidParameterError(f"need 1 <= k_l <= k_u, got k_l={self.k_l}, k_u={self.k_u}")
        if not self.gamma_H >= self.gamma_L >= 0:
            raise InvalidParameterError(f"need gamma_H >= gamma_L >= 0, got {self.gamma_H}, {self.gamma_L}")
        probs = (self.p_LL, self.p_HL, self.p_LH)
        if min(probs) < 0 or abs(sum(probs) - 1.0) > 1e-12:
            raise InvalidParameterError(f"mixture weights {probs} must lie on the simplex")
        if not 1 <= self.n_segments <= MAX_SEGMENTS:
            raise InvalidParameterError(f"n_segments must be in 1..{MAX_SEGMENTS}, got {self.n_segments}")
        # A single fixed length > 1 keeps the chain on a sub-lattice of states.
        if self.check_irreducible and not (self.k_l == 1 or self.k_u > self.k_l):
            raise InvalidParameterError(
                f"k_l = k_u = {self.k_l} is not irreducible; allow length 1 or a range of lengths")

    @property
    def mixture(self):
        return np.array([self.p_LL, self.p_HL, self.p_LH])

    def component_gammas(self, component):
        low, high = self.gamma_L, self.gamma_H
        return {"LL": (low, low), "HL": (high, low), "LH": (low, high)}[component]

    def validate_for(self, model):
        if self.k_u > model.num_spins:
            raise InvalidParameterError(f"k_u={self.k_u} exceeds the model's {model.num_spins} spins")

    def to_mapping(self):
        return {"k_l": self.k_l, "k_u": self.k_u, "gamma_L": self.gamma_L, "gamma_H": self.gamma_H,
                "p_LL": self.p_LL, "p_HL": self.p_HL, "p_LH": self.p_LH, "n_segments": self.n_segments}

    @classmethod
    def from_mapping(cls, data):
        return cls(int(data["k_l"]), int(data["k_u"]), float(data["gamma_L"]), float(data["gamma_H"]),
                   float(data.get("p_LL", 1.0)), float(data.get("p_HL", 0.0)), float(data.get("p_LH", 0.0)),
                   int(data.get("n_segments", 1)))


@dataclass
class SegmentRecord:
    first: SawPath
    second: SawPath
    component: str

    @property
    def lengths(self):
        return len(self.first), len(self.second)


@dataclass
class ProposalRecord:
    segments: list
    proposed_state: np.ndarray
    log_forward: float
    log_reverse: float
    energy_change: float

    @property
    def walk_length(self):
        return sum(len(s.first) + len(s.second) for s in self.segments)


@dataclass
class ChainSummary:
    steps: int
    accepted: int
    final_state: np.ndarray
    final_energy: float

    @property
    def acceptance_rate(self):
        return self.accepted / self.steps if self.steps else 0.0


class FixedPolicy:
    """One-point parameter policy; draws consume no randomness."""

    def __init__(self, params):
        self.params = params

    def draw(self, rng):
        return self.params


def _walk(store, k, rng=None, path=None, draw_level=0):
    """
    Advances a candidate store along k flips, drawing at bias level `draw_level`
    unless a fixed path is replayed. Returns (flips, log-prob per bias level).
    """
    flips = []
    log_prob = np.zeros(len(store.gammas))
    steps = len(path) if path is not None else k
    for step in range(steps):
        if path is None:
            l = store.draw(rng.random(), draw_level)
        else:
            l = path.flips[step]
            if not 0 <= l < len(store.state):
                raise DimensionError(f"flip index {l} outside 0..{len(store.state) - 1}")
        log_prob += store.log_probs(l)
        store.flip(l)
        flips.append(l)
    return flips, log_prob


def _check_length(model, k):
    if not 1 <= k <= model.num_spins:
        raise InvalidParameterError(f"walk length {k} outside 1..{model.num_spins}")


def sample_saw(model, x0, k, gamma, rng, store_kind="auto"):
    """Draws one energy-biased walk. Returns (path, end state, log f(x1, sigma | x0))."""
    _check_length(model, k)
    store = make_candidate_store(model, x0, (gamma,), store_kind)
    flips, log_prob = _walk(store, k, rng=rng)
    return SawPath(flips), store.state, float(log_prob[0])


def saw_logprob(model, x0, path, gamma, store_kind="auto"):
    """log f(x1, sigma | x0) of a given path."""
    if not isinstance(path, SawPath):
        path = SawPath(path)
    _check_length(model, len(path))
    store = make_candidate_store(model, x0, (gamma,), store_kind)
    _, log_prob = _walk(store, len(path), path=path)
    return float(log_prob[0])


def log_acceptance_ratio(beta, energy_change, log_forward, log_reverse):
    """log of pi(x1) q(reverse) / (pi(x0) q(forward))."""
    return -beta * energy_change + log_reverse - log_forward


def saw_log_acceptance(model, x0, path, gamma, store_kind="auto"):
    """
    Single-walk move: returns (x1, log acceptance ratio) for proposing x1 from x0
    along `path`, with the reverse density taken along R(path) from x1.
    """
    if not isinstance(path, SawPath):
        path = SawPath(path)
    forward = make_candidate_store(model, x0, (gamma,), store_kind)
    _, log_fwd = _walk(forward, len(path), path=path)
    x1 = forward.state
    reverse = make_candidate_store(model, x1, (gamma,), store_kind)
    _, log_rev = _walk(reverse, len(path), path=path.reversed())
    return x1, log_acceptance_ratio(model.beta, forward.energy_change, float(log_fwd[0]), float(log_rev[0]))


def _pair_components(model, x0, first, second, params, store_kind, rng=None, component=None):
    """
    Scores (or draws, when rng is given) a pair of walks under both bias levels.
    Returns (first path, second path, end state, energy change, per-component log densities).
    """
    levels = (params.gamma_L, params.gamma_H)
    if rng is not None:
        g_first, g_second = params.component_gammas(component)
        store = make_candidate_store(model, x0, levels, store_kind)
        flips1, lp1 = _walk(store, first, rng=rng, draw_level=levels.index(g_first))
        mid_state = store.state
        de = store.energy_change
        store = make_candidate_store(model, mid_state, levels, store_kind)
        flips2, lp2 = _walk(store, second, rng=rng, draw_level=levels.index(g_second))
    else:
        store = make_candidate_store(model, x0, levels, store_kind)
        flips1, lp1 = _walk(store, len(first), path=first)
        mid_state = store.state
        de = store.energy_change
        store = make_candidate_store(model, mid_state, levels, store_kind)
        flips2, lp2 = _walk(store, len(second), path=second)
    de += store.energy_change
    # lp[0] is at gamma_L, lp[1] at gamma_H.
    per_component = np.array([lp1[0] + lp2[0], lp1[1] + lp2[0], lp1[0] + lp2[1]])
    return SawPath(flips1), SawPath(flips2), store.state, de, per_component


def _mixture_logsumexp(per_component, params):
    weights = params.mixture
    keep = weights > 0
    return float(logsumexp(per_component[keep], b=weights[keep]))


def pair_log_mixture(model, x0, pair, params, store_kind="auto"):
    """log of p_LL f(pair; L, L) + p_HL f(pair; H, L) + p_LH f(pair; L, H)."""
    first, second = (p if isinstance(p, SawPath) else SawPath(p) for p in pair)
    *_, per_component = _pair_components(model, x0, first, second, params, store_kind)
    return _mixture_logsumexp(per_component, params)


def _evaluate_reverse(model, x1, segments, params, store_kind):
    log_reverse = 0.0
    state = x1
    for segment in reversed(segments):
        first, second = segment.second.reversed(), segment.first.reversed()
        *_, end, _, per_component = _pair_components(model, state, first, second, params, store_kind)
        log_reverse += _mixture_logsumexp(per_component, params)
        state = end
    return log_reverse, state


def propose(model, state, params, rng, store_kind="auto"):
    """Draws the N-segment proposal and scores both directions."""
    segments = []
    log_forward = 0.0
    energy_change = 0.0
    current = state
    for _ in range(params.n_segments):
        component = COMPONENTS[int(rng.choice(3, p=params.mixture))]
        k1 = int(rng.integers(params.k_l, params.k_u + 1))
        k2 = int(rng.integers(params.k_l, params.k_u + 1))
        first, second, current, de, per_component = _pair_components(
            model, current, k1, k2, params, store_kind, rng=rng, component=component)
        segments.append(SegmentRecord(first, second, component))
        log_forward += _mixture_logsumexp(per_component, params)
        energy_change += de
    log_reverse, _ = _evaluate_reverse(model, current, segments, params, store_kind)
    return ProposalRecord(segments, current, log_forward, log_reverse, energy_change)


def sardonics_step(model, state, params, rng, store_kind="auto"):
    """One Metropolis-Hastings move. Returns (new state, proposal record, accepted)."""
    params.validate_for(model)
    record = propose(model, state, params, rng, store_kind)
    log_alpha = log_acceptance_ratio(model.beta, record.energy_change, record.log_forward, record.log_reverse)
    # 1 - U lies in (0, 1], so the log is finite.
    accepted = bool(math.log(1.0 - rng.random()) < log_alpha)
    if accepted:
        return record.proposed_state, record, True
    return state, record, False


def sardonics_single_step(model, state, lengths, gamma, rng, store_kind="auto"):
    """
    Basic single-walk move: length drawn uniformly from `lengths`, one walk at
    bias gamma, accepted on the pathwise ratio. Returns (state, path, accepted).
    """
    k = int(lengths[rng.integers(len(lengths))])
    path, x1, log_fwd = sample_saw(model, state, k, gamma, rng, store_kind)
    _, log_alpha = saw_log_acceptance(model, state, path, gamma, store_kind)
    accepted = bool(math.log(1.0 - rng.random()) < log_alpha)
    return (x1 if accepted else state), path, accepted


def run_chain(model, initial, policy, steps, rng, sink=None, store_kind="auto", log_every=0):
    """
    Iterates sardonics_step with per-step parameters from `policy`, streaming
    (step, energy, accepted, walk length) to `sink`. Energy is tracked from the
    proposals' increments and resynchronized from scratch every
    ENERGY_RESYNC_EVERY steps.
    """
    if steps < 1:
        raise InvalidParameterError(f"steps must be >= 1, got {steps}")
    state = initial.copy()
    current_energy = energy(model, state)
    accepted_count = 0
    for step in range(1, steps + 1):
        params = policy.draw(rng)
        state, record, accepted = sardonics_step(model, state, params, rng, store_kind)
        if accepted:
            accepted_count += 1
            current_energy += record.energy_change
        if step % ENERGY_RESYNC_EVERY == 0:
            current_energy = energy(model, state)
        if sink is not None:
            sink(step, current_energy, accepted, record.walk_length)
        if log_every and step % log_every == 0:
            logger.debug(f"Chain step {step}/{steps}: E={current_energy:.3f} "
                         f"acceptance={accepted_count / step:.3f}")
    return ChainSummary(steps, accepted_count, state, energy(model, state))
