"""
Correctness suite behind `main.py verify`: checks every sampler against the
brute-force oracles on small models and reports each property with its
measured residual.

quick: weight tree, walk probabilities, pathwise / marginal detailed balance,
       effective-acceptance inequality, pair mixture balance, exact baseline kernels
full:  quick + long-run stationarity (empirical TV distance to exact pi)
"""
from dataclasses import dataclass, field

import numpy as np

from baseline_kernels import block_gibbs_sweep, gibbs_sweep, swendsen_wang_step
from diagnostics import empirical_distribution, tv_distance
from errors import InvalidParameterError
from exact_oracle import (
    detailed_balance_residual,
    dense_saw_logprob,
    effective_vs_marginal_alpha,
    exact_block_gibbs_kernel,
    exact_distribution,
    exact_gibbs_kernel,
    exact_pair_kernel,
    exact_sardonics_kernel,
    exact_swendsen_wang_kernel,
    inverse_cdf_index,
    pathwise_balance_residual,
    row_sum_residual,
    stationarity_residual,
)
from ising_model import HammingShell, IsingModel, random_state, state_from_index, state_index
from logger_config import logger
from model_zoo import make_bipartite_rbm, make_random_graph
from saw_kernel import KernelParams, sample_saw, saw_logprob, sardonics_step
from weight_tree import WeightTree

LEVELS = ("quick", "full")


@dataclass
class CheckResult:
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self):
        return bool(np.isfinite(self.residual) and self.residual <= self.tolerance)


@dataclass
class VerificationReport:
    level: str
    results: list = field(default_factory=list)

    @property
    def passed(self):
        return all(r.passed for r in self.results)

    @property
    def failures(self):
        return [r for r in self.results if not r.passed]

    def to_mapping(self):
        return {"level": self.level, "passed": self.passed,
                "checks": [{"name": r.name, "residual": r.residual, "tolerance": r.tolerance,
                            "passed": r.passed} for r in self.results]}


def frustrated_model(num_spins, seed):
    return make_random_graph(num_spins, edge_prob=0.6, coupling_spec="gauss:1", field_spec="gauss:0.5", seed=seed)


def check_weight_tree(scripts=1000, seed=0):
    """Number of draws where the tree and the shadow-array oracle disagree."""
    rng = np.random.default_rng(seed)
    mismatches = 0
    for _ in range(scripts):
        capacity = int(rng.integers(1, 40))
        shadow = rng.integers(0, 10, size=capacity).astype(np.float64)
        shadow[int(rng.integers(capacity))] += 1.0
        tree = WeightTree(shadow)
        for _ in range(int(rng.integers(1, 60))):
            if rng.random() < 0.5:
                i = int(rng.integers(capacity))
                w = float(rng.integers(0, 10))
                if w == 0.0 and np.count_nonzero(shadow) == 1 and shadow[i] > 0:
                    w = 1.0
                shadow[i] = w
                tree.update(i, w)
            else:
                u = rng.random()
                mismatches += tree.sample(u) != inverse_cdf_index(shadow, u)
    return float(mismatches)


def check_walk_probabilities(seed=0, walks=20):
    model = frustrated_model(6, seed)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for gamma in (0.0, 0.5, 1.0):
        for _ in range(walks):
            x0 = random_state(model.num_spins, rng)
            k = int(rng.integers(1, model.num_spins + 1))
            path, _, log_prob = sample_saw(model, x0, k, gamma, rng)
            dense = dense_saw_logprob(model, x0, path, gamma)
            for kind in ("tree", "flat"):
                worst = max(worst, abs(saw_logprob(model, x0, path, gamma, kind) - dense))
            worst = max(worst, abs(log_prob - dense))
    return worst


def check_pathwise_balance(model_seeds, gammas=(0.0, 0.5, 1.0)):
    worst = 0.0
    for seed in model_seeds:
        model = frustrated_model(6, seed)
        for gamma in gammas:
            worst = max(worst, pathwise_balance_residual(model, 2, gamma))
    return worst


def check_marginal_balance(model_seeds, gammas=(0.0, 0.5, 1.0)):
    worst = 0.0
    for seed in model_seeds:
        model = frustrated_model(6, seed)
        pi = exact_distribution(model)
        for gamma in gammas:
            kernel = exact_sardonics_kernel(model, 2, gamma)
            worst = max(worst, detailed_balance_residual(pi, kernel), row_sum_residual(kernel))
    return worst


def check_effective_acceptance(seed=0, gamma=1.0):
    """Largest alpha_eff - alpha_m over every pair at distance 3 (negative means the inequality holds)."""
    model = frustrated_model(5, seed)
    worst = -np.inf
    for x in range(1 << model.num_spins):
        x0 = state_from_index(x, model.num_spins)
        for x1 in HammingShell(x0, 3):
            alpha_eff, alpha_m = effective_vs_marginal_alpha(model, x0, x1, 3, gamma)
            worst = max(worst, alpha_eff - alpha_m)
    return max(worst, 0.0)


def check_pair_mixture_balance(seed=0):
    model = frustrated_model(4, seed)
    params = KernelParams(1, 2, 0.5, 1.0, p_LL=0.5, p_HL=0.3, p_LH=0.2)
    kernel = exact_pair_kernel(model, params)
    pi = exact_distribution(model)
    return max(detailed_balance_residual(pi, kernel), row_sum_residual(kernel))


def _three_cycle():
    return IsingModel(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, -1.0)], [0.4, 0.0, 0.0], beta=1.0, name="cycle3")


def check_baseline_kernels(seed=0):
    """Stationarity and row sums of the exact Gibbs, block-Gibbs and Swendsen-Wang matrices."""
    worst = 0.0
    gibbs_model = frustrated_model(6, seed)
    bipartite = make_bipartite_rbm(4, 4, "gauss:0.5", seed=seed)
    cases = [(gibbs_model, exact_gibbs_kernel), (bipartite, exact_block_gibbs_kernel),
             (_three_cycle(), exact_swendsen_wang_kernel),
             (IsingModel(2, [(0, 1, 1.0)]), exact_swendsen_wang_kernel)]
    for model, build in cases:
        kernel = build(model)
        pi = exact_distribution(model)
        worst = max(worst, stationarity_residual(pi, kernel), row_sum_residual(kernel))
    return worst


def empirical_tv(model, step, steps, seed):
    """TV distance between the visited-state histogram of `steps` iterations and exact pi."""
    rng = np.random.default_rng(seed)
    state = random_state(model.num_spins, rng)
    visits = np.empty(steps, dtype=np.int64)
    for t in range(steps):
        state = step(model, state, rng)
        visits[t] = state_index(state)
    return tv_distance(empirical_distribution(visits, 1 << model.num_spins), exact_distribution(model))


STATIONARITY_PARAMS = KernelParams(1, 3, 0.5, 1.0, p_LL=0.5, p_HL=0.25, p_LH=0.25, n_segments=2)


def stationarity_samplers():
    return {
        "walk move": (lambda m, s, r: sardonics_step(m, s, STATIONARITY_PARAMS, r)[0], False),
        "gibbs": (gibbs_sweep, False),
        "swendsen-wang": (swendsen_wang_step, False),
        "block-gibbs": (block_gibbs_sweep, True),
    }


def check_stationarity(name, steps, seed=0):
    step, bipartite = stationarity_samplers()[name]
    model = make_bipartite_rbm(4, 4, "gauss:0.5", seed=seed) if bipartite else frustrated_model(8, seed)
    return empirical_tv(model, step, steps, seed)


def run_verification(level="quick", seed=0, stationarity_steps=10 ** 6, tv_tolerance=0.02):
    if level not in LEVELS:
        raise InvalidParameterError(f"unknown verification level '{level}' ({' | '.join(LEVELS)})")
    model_seeds = range(seed, seed + (5 if level == "full" else 1))
    checks = [
        ("weight tree matches inverse-CDF oracle", lambda: check_weight_tree(seed=seed), 0.0),
        ("walk probabilities match dense softmax", lambda: check_walk_probabilities(seed), 1e-9),
        ("pathwise detailed balance (M=6, k=2)", lambda: check_pathwise_balance(model_seeds), 1e-10),
        ("marginal detailed balance (M=6, k=2)", lambda: check_marginal_balance(model_seeds), 1e-9),
        ("effective acceptance <= marginal acceptance (M=5, k=3)", lambda: check_effective_acceptance(seed), 1e-12),
        ("walk-pair mixture detailed balance (M=4)", lambda: check_pair_mixture_balance(seed), 1e-9),
        ("exact baseline kernels are stationary", lambda: check_baseline_kernels(seed), 1e-8),
    ]
    if level == "full":
        for name in stationarity_samplers():
            checks.append((f"stationarity TV of {name} ({stationarity_steps} steps)",
                           lambda name=name: check_stationarity(name, stationarity_steps, seed), tv_tolerance))

    logger.info(f"=== STARTING {level.upper()} VERIFICATION ===")
    report = VerificationReport(level)
    for i, (name, run, tolerance) in enumerate(checks, start=1):
        logger.info(f"[{i}/{len(checks)}] {name} ...")
        result = CheckResult(name, float(run()), tolerance)
        report.results.append(result)
        if result.passed:
            logger.info(f"[{i}/{len(checks)}] {name} PASS residual={result.residual:.3g}")
        else:
            logger.error(f"[{i}/{len(checks)}] {name} FAIL residual={result.residual:.3g} "
                         f"tolerance={result.tolerance:.3g}")
    logger.info(f"=== VERIFICATION {'PASSED' if report.passed else 'FAILED'} "
                f"({len(report.results) - len(report.failures)}/{len(report.results)}) ===")
    return report


if __name__ == "__main__":
    run_verification()
