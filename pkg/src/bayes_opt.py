"""
Adaptation of the walk-move parameters by Bayesian optimization.

Parameters live in a 7-dimensional unit box (k_l, k_u, gamma_L, gamma_H, p_LL,
p_HL, N); a zero-mean Gaussian process with an ARD squared-exponential kernel
models the reward -(ACF area) of short chains run at each point, expected
improvement picks the next point, and after the adaptation budget the
surrogate's posterior mean defines a Boltzmann policy over candidate points
that the sampling phase draws its per-step parameters from.
"""
import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.optimize import minimize
from scipy.spatial.distance import cdist
from scipy.special import softmax
from scipy.stats import norm

from diagnostics import EnergyTrace, acf_area
from direct_search import direct_maximize
from errors import GpFitError, InvalidParameterError
from ising_model import random_state
from logger_config import logger
from saw_kernel import FixedPolicy, KernelParams, run_chain

PARAM_NAMES = ("k_l", "k_u", "gamma_L", "gamma_H", "p_LL", "p_HL", "n_segments")
INTEGER_DIMS = (0, 1, 6)
MAX_ITERATIONS = 200
JITTER_ESCALATIONS = 3

LOG_LENGTH_BOUNDS = (math.log(1e-2), math.log(1e2))
LOG_NOISE_BOUNDS = (math.log(1e-6), math.log(1e2))
LOG_SIGNAL_BOUNDS = (math.log(1e-3), math.log(1e4))


@dataclass
class ParamSpace:
    """Search box for the kernel parameters; k ranges are capped at the model size."""
    k_l_range: tuple = (1, 70)
    k_u_range: tuple = (2, 120)
    gamma_L_range: tuple = (0.89, 1.05)
    gamma_H_range: tuple = (0.9, 1.15)
    n_segments_range: tuple = (1, 5)
    num_spins: int = None

    def __post_init__(self):
        if self.num_spins is not None and self.num_spins < 2:
            raise InvalidParameterError(f"parameter adaptation needs M >= 2, got {self.num_spins}")
        lows, highs = self.bounds
        if np.any(lows > highs):
            raise InvalidParameterError(f"empty parameter range: lows={lows}, highs={highs}")

    @property
    def dim(self):
        return len(PARAM_NAMES)

    @property
    def bounds(self):
        cap = self.num_spins if self.num_spins is not None else np.inf
        k_l_hi = min(self.k_l_range[1], cap)
        k_u_hi = min(self.k_u_range[1], cap)
        lows = np.array([self.k_l_range[0], min(self.k_u_range[0], k_u_hi), self.gamma_L_range[0],
                         self.gamma_H_range[0], 0.0, 0.0, self.n_segments_range[0]], dtype=np.float64)
        highs = np.array([k_l_hi, k_u_hi, self.gamma_L_range[1], self.gamma_H_range[1],
                          1.0, 1.0, self.n_segments_range[1]], dtype=np.float64)
        return lows, highs

    def from_unit(self, theta):
        lows, highs = self.bounds
        return lows + np.asarray(theta, dtype=np.float64) * (highs - lows)

    def to_unit(self, values):
        lows, highs = self.bounds
        span = np.where(highs > lows, highs - lows, 1.0)
        return (np.asarray(values, dtype=np.float64) - lows) / span

    def repair(self, theta):
        """Projects a unit-box point onto the feasible region."""
        values = self.from_unit(np.clip(theta, 0.0, 1.0))
        values[1] = max(values[1], values[0])
        values[3] = max(values[3], values[2])
        mass = values[4] + values[5]
        if mass > 1.0:
            values[4:6] /= mass
        return np.clip(self.to_unit(values), 0.0, 1.0)

    def is_feasible(self, theta, tol=1e-9):
        theta = np.asarray(theta, dtype=np.float64)
        if np.any(theta < -tol) or np.any(theta > 1.0 + tol):
            return False
        values = self.from_unit(theta)
        return bool(values[1] >= values[0] - tol and values[3] >= values[2] - tol
                    and values[4] + values[5] <= 1.0 + tol)

    def to_params(self, theta):
        """Rounds the integer dimensions and instantiates KernelParams."""
        values = self.from_unit(self.repair(theta))
        lows, highs = self.bounds
        k_l, k_u, n_segments = (int(round(values[i])) for i in INTEGER_DIMS)
        k_u = max(k_u, k_l)
        if k_u == k_l and k_l > 1:
            if k_u < highs[1]:
                k_u += 1
            else:
                k_l -= 1
        p_ll, p_hl = float(values[4]), float(values[5])
        p_lh = max(0.0, 1.0 - p_ll - p_hl)
        total = p_ll + p_hl + p_lh
        return KernelParams(k_l, k_u, float(values[2]), float(max(values[3], values[2])),
                            p_ll / total, p_hl / total, p_lh / total, n_segments)


@dataclass
class Observation:
    theta: np.ndarray
    reward: float


@dataclass
class GpHypers:
    length_scales: np.ndarray
    noise_std: float = 0.1
    signal_std: float = 1.0

    @classmethod
    def default(cls, dim):
        return cls(np.full(dim, 0.3))

    def to_log(self):
        return np.concatenate([np.log(self.length_scales), [math.log(self.noise_std), math.log(self.signal_std)]])

    @classmethod
    def from_log(cls, vector):
        vector = np.asarray(vector, dtype=np.float64)
        return cls(np.exp(vector[:-2]), float(math.exp(vector[-2])), float(math.exp(vector[-1])))

    def snapshot(self):
        return {"length_scales": self.length_scales.tolist(), "noise_std": self.noise_std,
                "signal_std": self.signal_std}


def ard_kernel(a, b, hypers):
    """signal^2 * exp(-0.5 * sum_d ((a_d - b_d) / length_d)^2)."""
    scaled = cdist(np.atleast_2d(a) / hypers.length_scales, np.atleast_2d(b) / hypers.length_scales,
                   "sqeuclidean")
    return hypers.signal_std ** 2 * np.exp(-0.5 * scaled)


def _factorize(cov):
    """Cholesky of cov, adding escalating diagonal jitter when it is not positive definite."""
    try:
        return cho_factor(cov, lower=True), 0.0
    except LinAlgError:
        pass
    jitter = 1e-8 * float(np.max(np.diag(cov)))
    for _ in range(JITTER_ESCALATIONS + 1):
        try:
            factor = cho_factor(cov + jitter * np.eye(len(cov)), lower=True)
            logger.warning(f"GP covariance needed jitter {jitter:.3g}")
            return factor, jitter
        except LinAlgError:
            jitter *= 10.0
    raise GpFitError(f"covariance not positive definite after {JITTER_ESCALATIONS} jitter escalations")


@dataclass
class GpSurrogate:
    thetas: np.ndarray
    rewards: np.ndarray
    hypers: GpHypers
    factor: tuple = None
    alpha: np.ndarray = None
    jitter: float = 0.0
    degenerate: bool = False

    @classmethod
    def build(cls, thetas, rewards, hypers):
        rewards = np.asarray(rewards, dtype=np.float64)
        thetas = np.asarray(thetas, dtype=np.float64).reshape(len(rewards), len(hypers.length_scales))
        surrogate = cls(thetas, rewards, hypers)
        if len(rewards):
            cov = ard_kernel(thetas, thetas, hypers) + hypers.noise_std ** 2 * np.eye(len(rewards))
            surrogate.factor, surrogate.jitter = _factorize(cov)
            surrogate.alpha = cho_solve(surrogate.factor, rewards)
        return surrogate

    @property
    def num_observations(self):
        return len(self.rewards)

    def log_marginal_likelihood(self):
        n = len(self.rewards)
        lower = self.factor[0]
        return float(-0.5 * self.rewards @ self.alpha - np.sum(np.log(np.diag(lower)))
                     - 0.5 * n * math.log(2.0 * math.pi))

    def predict_many(self, points):
        points = np.atleast_2d(points)
        prior_var = np.full(len(points), self.hypers.signal_std ** 2)
        if self.num_observations == 0:
            return np.zeros(len(points)), prior_var
        cross = ard_kernel(points, self.thetas, self.hypers)
        mu = cross @ self.alpha
        solved = cho_solve(self.factor, cross.T)
        var = prior_var - np.einsum("ij,ji->i", cross, solved)
        return mu, np.maximum(var, 0.0)


def lhs_init(space, n, seed):
    """
    n points stratified into n equal bins per dimension (one point per bin),
    uniform inside the bin, then repaired onto the feasible region.
    """
    if n < 2:
        raise InvalidParameterError(f"a Latin hypercube design needs n >= 2, got {n}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    strata = np.stack([rng.permutation(n) for _ in range(space.dim)], axis=1)
    raw = (strata + rng.random((n, space.dim))) / n
    return [space.repair(point) for point in raw]


def _observation_arrays(observations):
    thetas = np.array([np.asarray(o.theta, dtype=np.float64) for o in observations])
    rewards = np.array([float(o.reward) for o in observations])
    return thetas, rewards


def gp_fit(observations, initial=None, restarts=3, seed=0):
    """
    Maximizes the marginal likelihood over log hyper-parameters with L-BFGS-B
    from `initial` plus `restarts` random starts. The returned hypers never
    have a lower likelihood than `initial`.
    """
    if len(observations) < 2:
        raise InvalidParameterError(f"gp_fit needs >= 2 observations, got {len(observations)}")
    thetas, rewards = _observation_arrays(observations)
    dim = thetas.shape[1]
    if initial is None:
        initial = GpHypers(np.full(dim, 0.3), 0.1 * max(float(np.std(rewards)), 1e-3),
                           max(float(np.std(rewards)), float(np.abs(rewards).max()), 1e-3))
    degenerate = bool(np.all(np.ptp(thetas, axis=0) == 0.0))
    if degenerate:
        logger.warning("All observed parameter points coincide; fitting with jitter")

    bounds = [LOG_LENGTH_BOUNDS] * dim + [LOG_NOISE_BOUNDS, LOG_SIGNAL_BOUNDS]

    def negative_lml(vector):
        try:
            return -GpSurrogate.build(thetas, rewards, GpHypers.from_log(vector)).log_marginal_likelihood()
        except GpFitError:
            return 1e25

    start = np.clip(initial.to_log(), [b[0] for b in bounds], [b[1] for b in bounds])
    best_vector, best_value = initial.to_log(), negative_lml(initial.to_log())
    rng = np.random.default_rng(seed)
    starts = [start] + [rng.uniform([b[0] for b in bounds], [b[1] for b in bounds]) for _ in range(restarts)]
    for x0 in starts:
        result = minimize(negative_lml, x0, method="L-BFGS-B", bounds=bounds)
        if result.fun < best_value:
            best_vector, best_value = result.x, float(result.fun)

    surrogate = GpSurrogate.build(thetas, rewards, GpHypers.from_log(best_vector))
    surrogate.degenerate = degenerate
    logger.debug(f"GP fit on {len(rewards)} points: log-likelihood={-best_value:.4f}")
    return surrogate


def gp_predict(surrogate, theta):
    mu, var = surrogate.predict_many(theta)
    return float(mu[0]), float(var[0])


def ei_value(mu, sigma, best_reward):
    """Expected improvement of N(mu, sigma^2) over best_reward (maximization)."""
    if sigma <= 0.0:
        return max(0.0, mu - best_reward)
    u = (mu - best_reward) / sigma
    return max(0.0, float((mu - best_reward) * norm.cdf(u) + sigma * norm.pdf(u)))


def expected_improvement(surrogate, theta, best_reward):
    mu, var = gp_predict(surrogate, theta)
    return ei_value(mu, math.sqrt(var), best_reward)


def acq_optimize(surrogate, space, budget, best_reward=None):
    """Maximizes EI over the repaired unit box; never worse than the box center."""
    if best_reward is None:
        best_reward = float(surrogate.rewards.max()) if surrogate.num_observations else 0.0
    result = direct_maximize(lambda theta: expected_improvement(surrogate, space.repair(theta), best_reward),
                             space.dim, budget)
    return space.repair(result.point)


@dataclass
class AdaptationRecord:
    iteration: int
    theta: list
    params: dict
    reward: float
    best_reward: float
    acceptance_rate: float
    hypers: dict = field(default_factory=dict)


@dataclass
class AdaptationResult:
    surrogate: GpSurrogate
    records: list
    final_state: np.ndarray

    @property
    def best_record(self):
        return max(self.records, key=lambda r: r.reward)


def adapt(model, space, iterations=20, chain_steps=1000, seed=0, n_init=5, max_lag=100,
          acq_budget=300, store_kind="auto", initial_state=None, trace_sink=None):
    """
    Runs `iterations` evaluation chains of `chain_steps` steps each: the first
    n_init at a Latin hypercube design, the rest where expected improvement is
    largest. Each chain continues from the previous chain's final state; its
    reward is -acf_area of its energy trace.
    """
    if not 2 <= n_init <= iterations:
        raise InvalidParameterError(f"need 2 <= n_init <= iterations, got n_init={n_init}, I={iterations}")
    if iterations > MAX_ITERATIONS:
        raise InvalidParameterError(f"adaptation is capped at {MAX_ITERATIONS} iterations, got {iterations}")
    if chain_steps < 2:
        raise InvalidParameterError(f"evaluation chains need >= 2 steps, got {chain_steps}")
    if space.num_spins is None:
        space = ParamSpace(space.k_l_range, space.k_u_range, space.gamma_L_range,
                           space.gamma_H_range, space.n_segments_range, model.num_spins)

    rng = np.random.default_rng(seed)
    design = lhs_init(space, n_init, rng)
    state = initial_state.copy() if initial_state is not None else random_state(model.num_spins, rng)
    lag = min(max_lag, chain_steps - 1)
    observations, records = [], []
    surrogate = GpSurrogate.build([], [], GpHypers.default(space.dim))
    best_reward = -np.inf

    logger.info(f"Adapting on {model}: {iterations} iterations x {chain_steps} steps")
    for i in range(iterations):
        if i < n_init:
            theta = design[i]
        else:
            theta = acq_optimize(surrogate, space, acq_budget, best_reward)
        params = space.to_params(theta)
        trace = EnergyTrace()
        summary = run_chain(model, state, FixedPolicy(params), chain_steps, rng, sink=trace, store_kind=store_kind)
        state = summary.final_state
        if trace_sink is not None:
            trace_sink(i, trace)
        reward = -acf_area(trace.energies, lag)
        observations.append(Observation(np.asarray(theta), reward))
        best_reward = max(best_reward, reward)

        if len(observations) >= n_init:
            previous = surrogate.hypers if surrogate.num_observations else None
            surrogate = gp_fit(observations, initial=previous, seed=seed + i)

        records.append(AdaptationRecord(i, np.asarray(theta).tolist(), params.to_mapping(), reward, best_reward,
                                        summary.acceptance_rate, surrogate.hypers.snapshot()))
        logger.info(f"[{i + 1}/{iterations}] reward={reward:.4f} best={best_reward:.4f} "
                    f"acceptance={summary.acceptance_rate:.3f} params={params.to_mapping()}")
    return AdaptationResult(surrogate, records, state)


def boltzmann_weights(mu):
    """Policy mass proportional to exp(mu)."""
    return softmax(np.asarray(mu, dtype=np.float64))


class BoltzmannPolicy:
    """Discrete distribution over parameter candidates; draw(rng) returns KernelParams."""

    def __init__(self, candidates, probabilities, thetas=None, mu=None):
        probabilities = np.asarray(probabilities, dtype=np.float64)
        if len(candidates) != len(probabilities) or len(candidates) == 0:
            raise InvalidParameterError("a policy needs one probability per candidate and >= 1 candidate")
        if np.any(probabilities < 0) or abs(probabilities.sum() - 1.0) > 1e-9:
            raise InvalidParameterError("policy probabilities must be a distribution")
        self.candidates = list(candidates)
        self.probabilities = probabilities
        self.thetas = thetas
        self.mu = mu

    def draw(self, rng):
        return self.candidates[int(rng.choice(len(self.candidates), p=self.probabilities))]

    def __len__(self):
        return len(self.candidates)

    def __eq__(self, other):
        if not isinstance(other, BoltzmannPolicy):
            return NotImplemented
        return self.candidates == other.candidates and np.array_equal(self.probabilities, other.probabilities)

    def to_mapping(self):
        entries = []
        for k, (params, p) in enumerate(zip(self.candidates, self.probabilities)):
            entry = {"params": params.to_mapping(), "probability": float(p)}
            if self.thetas is not None:
                entry["theta"] = np.asarray(self.thetas[k]).tolist()
            if self.mu is not None:
                entry["mu"] = float(self.mu[k])
            entries.append(entry)
        return {"candidates": entries}

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_mapping(), f, indent=2)
        logger.info(f"Saved Boltzmann policy with {len(self)} candidates to {path}")

    @classmethod
    def load(cls, path):
        with open(path) as f:
            data = json.load(f)
        entries = data["candidates"]
        thetas = [e["theta"] for e in entries] if all("theta" in e for e in entries) else None
        mu = [e["mu"] for e in entries] if all("mu" in e for e in entries) else None
        return cls([KernelParams.from_mapping(e["params"]) for e in entries],
                   [e["probability"] for e in entries], thetas, mu)


def boltzmann_policy(surrogate, space, n_candidates, seed):
    """
    Candidates are the observed points topped up with fresh Latin hypercube
    draws to n_candidates; when more points were observed, the n_candidates
    with the highest posterior mean are kept.
    """
    if n_candidates < 1:
        raise InvalidParameterError(f"n_candidates must be >= 1, got {n_candidates}")
    thetas = [space.repair(t) for t in surrogate.thetas]
    missing = n_candidates - len(thetas)
    if missing > 0:
        thetas += lhs_init(space, max(missing, 2), seed)[:missing]
    thetas = np.array(thetas)
    mu, _ = surrogate.predict_many(thetas)
    if len(thetas) > n_candidates:
        keep = np.sort(np.argsort(-mu, kind="stable")[:n_candidates])
        thetas, mu = thetas[keep], mu[keep]
    probabilities = boltzmann_weights(mu)
    return BoltzmannPolicy([space.to_params(t) for t in thetas], probabilities, thetas, mu)


def write_adaptation_log(records, path):
    with open(path, "w") as f:
        json.dump([asdict(r) for r in records], f, indent=2)
    logger.info(f"Wrote {len(records)} adaptation records to {path}")


def read_adaptation_log(path):
    with open(path) as f:
        return [AdaptationRecord(**entry) for entry in json.load(f)]


def write_rewards(records, path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["iteration", "reward", "best_reward", "acceptance_rate"])
        for r in records:
            writer.writerow([r.iteration, repr(r.reward), repr(r.best_reward), repr(r.acceptance_rate)])
