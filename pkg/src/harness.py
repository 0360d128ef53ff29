"""
Experiment runner behind the command line: runs every configured sampler for
every seed (seeds in parallel on a thread pool), writes seed-indexed traces
and summaries, drives the adaptation phase and builds ACF comparison tables.
"""
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from baseline_kernels import block_gibbs_sweep, gibbs_sweep, metropolis_sweep, swendsen_wang_step
from bayes_opt import BoltzmannPolicy, ParamSpace, adapt, boltzmann_policy, write_adaptation_log, write_rewards
from diagnostics import EnergyTrace, acf_area, mean_acf, write_acf_table, write_trace
from errors import ConfigError
from ising_model import energy, random_state
from logger_config import add_file_handler, logger, remove_file_handler
from reporting import RunReporter, RunTimer
from saw_kernel import FixedPolicy, KernelParams, run_chain, sardonics_single_step

BASELINES = {
    "gibbs": lambda model, state, rng, spec: gibbs_sweep(model, state, rng, spec.get("order", "systematic")),
    "block-gibbs": lambda model, state, rng, spec: block_gibbs_sweep(model, state, rng),
    "swendsen-wang": lambda model, state, rng, spec: swendsen_wang_step(model, state, rng),
    "metropolis": lambda model, state, rng, spec: metropolis_sweep(model, state, rng),
}


@dataclass
class RunResult:
    label: str
    seed: int
    trace: EnergyTrace
    summary: dict
    policy: object = None
    adaptation: list = field(default_factory=list)


def param_space_from_spec(spec, num_spins):
    space = spec.get("space", {})
    ranges = {key: tuple(space[key]) for key in
              ("k_l_range", "k_u_range", "gamma_L_range", "gamma_H_range", "n_segments_range") if key in space}
    return ParamSpace(num_spins=num_spins, **ranges)


def _run_baseline(model, spec, steps, rng, trace):
    kernel = BASELINES[spec["kind"]]
    state = random_state(model.num_spins, rng)
    changed = 0
    for step in range(1, steps + 1):
        before = state.copy()
        kernel(model, state, rng, spec)
        moved = bool(np.any(before != state))
        changed += moved
        trace(step, energy(model, state), moved, 0)
    return changed / steps, state


def _run_basic(model, spec, steps, rng, trace, store):
    lengths = [int(k) for k in spec["lengths"]]
    gamma = float(spec["gamma"])
    state = random_state(model.num_spins, rng)
    current = energy(model, state)
    accepted_count = 0
    for step in range(1, steps + 1):
        state, path, accepted = sardonics_single_step(model, state, lengths, gamma, rng, store)
        if accepted:
            accepted_count += 1
            current = energy(model, state)
        trace(step, current, accepted, len(path))
    return accepted_count / steps, state


def run_sampler(model, spec, steps, seed, stride=1, store="auto", max_lag=100, burn_in=0.2, adapt_dir=None):
    """
    Runs one sampler for one seed. The random stream (and so the trace) is a
    function of the seed only. Adaptive samplers adapt first, then sample
    from the Boltzmann policy starting at the adaptation's final state.
    """
    rng = np.random.default_rng(seed)
    trace = EnergyTrace(step_stride=stride)
    kind = spec["kind"]
    policy, records = None, []
    with RunTimer() as timer:
        if kind in BASELINES:
            acceptance, state = _run_baseline(model, spec, steps, rng, trace)
        elif kind == "sardonics-basic":
            acceptance, state = _run_basic(model, spec, steps, rng, trace, store)
        else:
            initial = random_state(model.num_spins, rng)
            if kind == "sardonics-adaptive":
                settings = spec["adaptation"]
                space = param_space_from_spec(spec, model.num_spins)
                result = adapt(model, space, settings["iterations"], settings["chain_steps"],
                               seed=int(rng.integers(2 ** 31)), n_init=settings["n_init"],
                               max_lag=settings["max_lag"], acq_budget=settings["acq_budget"],
                               store_kind=store, initial_state=initial,
                               trace_sink=_evaluation_trace_writer(adapt_dir))
                records = result.records
                policy = boltzmann_policy(result.surrogate, space, settings["n_candidates"],
                                          int(rng.integers(2 ** 31)))
                initial = result.final_state
                if adapt_dir is not None:
                    write_adaptation_log(records, os.path.join(adapt_dir, "adaptation.json"))
                    write_rewards(records, os.path.join(adapt_dir, "rewards.csv"))
                    policy.save(os.path.join(adapt_dir, "policy.json"))
            elif "policy_file" in spec:
                policy = BoltzmannPolicy.load(spec["policy_file"])
            else:
                policy = FixedPolicy(KernelParams.from_mapping(spec["params"]))
            summary = run_chain(model, initial, policy, steps, rng, sink=trace, store_kind=store,
                                log_every=max(steps // 10, 1))
            acceptance, state = summary.acceptance_rate, summary.final_state

    energies = trace.after_burn_in(burn_in)
    lag = min(max_lag, len(energies) - 1)
    summary = {
        "steps": steps,
        "acceptance_rate": acceptance,
        "mean_energy": float(np.mean(trace.as_array())) if len(trace) else float("nan"),
        "acf_area": acf_area(energies, lag) if lag >= 1 else float("nan"),
        "acf_lag": lag,
        "final_energy": energy(model, state),
        "wall_time": timer.elapsed,
    }
    return RunResult(spec["label"], seed, trace, summary, policy, records)


def _evaluation_trace_writer(adapt_dir):
    if adapt_dir is None:
        return None
    trace_dir = os.path.join(adapt_dir, "evaluations")
    os.makedirs(trace_dir, exist_ok=True)

    def sink(iteration, trace):
        write_trace(trace, os.path.join(trace_dir, f"iter_{iteration:03d}.csv"))

    return sink


class ExperimentRunner:
    def __init__(self, config):
        self.config = config
        self.model = config.build_model()
        config.check_model(self.model)
        self.out_dir = os.path.join(config.out_dir, config.name)
        self.reporter = RunReporter(self.out_dir)
        config.save(os.path.join(self.out_dir, "config.json"))
        self.log_handler = add_file_handler(os.path.join(self.out_dir, "run.log"))
        logger.info(f"Experiment '{config.name}' on {self.model} -> {self.out_dir}")

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False

    def close(self):
        """Detaches the run.log mirror."""
        if self.log_handler is not None:
            remove_file_handler(self.log_handler)
            self.log_handler = None

    def _sampler_dir(self, label):
        path = os.path.join(self.out_dir, label)
        os.makedirs(path, exist_ok=True)
        return path

    def _run_seed(self, spec, seed):
        cfg = self.config
        sampler_dir = self._sampler_dir(spec["label"])
        adapt_dir = None
        if spec["kind"] == "sardonics-adaptive":
            adapt_dir = os.path.join(sampler_dir, f"adapt_seed{seed}")
            os.makedirs(adapt_dir, exist_ok=True)
        result = run_sampler(self.model, spec, cfg.steps, seed, cfg.stride, cfg.store, cfg.max_lag,
                             cfg.burn_in, adapt_dir)
        write_trace(result.trace, os.path.join(sampler_dir, f"trace_seed{seed}.csv"))
        result.summary = self.reporter.log_run(spec["label"], seed, result.summary)
        return result

    def run_all(self, specs=None):
        """Every sampler for every seed; results ordered by sampler, then seed."""
        specs = specs if specs is not None else self.config.samplers
        jobs = [(spec, seed) for spec in specs for seed in self.config.seeds]
        with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
            results = list(pool.map(lambda job: self._run_seed(*job), jobs))
        self.reporter.write_summary()
        return results

    def adapt_all(self):
        """Adaptation phase only, for every adaptive sampler and seed."""
        specs = [s for s in self.config.samplers if s["kind"] == "sardonics-adaptive"]
        if not specs:
            raise ConfigError("adapt needs at least one 'sardonics-adaptive' sampler")
        outcomes = []
        for spec in specs:
            settings = spec["adaptation"]
            space = param_space_from_spec(spec, self.model.num_spins)
            for seed in self.config.seeds:
                adapt_dir = os.path.join(self._sampler_dir(spec["label"]), f"adapt_seed{seed}")
                os.makedirs(adapt_dir, exist_ok=True)
                with RunTimer() as timer:
                    result = adapt(self.model, space, settings["iterations"], settings["chain_steps"], seed=seed,
                                   n_init=settings["n_init"], max_lag=settings["max_lag"],
                                   acq_budget=settings["acq_budget"], store_kind=self.config.store,
                                   trace_sink=_evaluation_trace_writer(adapt_dir))
                policy = boltzmann_policy(result.surrogate, space, settings["n_candidates"], seed)
                write_adaptation_log(result.records, os.path.join(adapt_dir, "adaptation.json"))
                write_rewards(result.records, os.path.join(adapt_dir, "rewards.csv"))
                policy.save(os.path.join(adapt_dir, "policy.json"))
                best = result.best_record
                self.reporter.log_run(spec["label"], seed, {
                    "steps": settings["iterations"] * settings["chain_steps"],
                    "acceptance_rate": float(np.mean([r.acceptance_rate for r in result.records])),
                    "best_reward": best.reward,
                    "best_params": best.params,
                    "wall_time": timer.elapsed,
                })
                outcomes.append((spec["label"], seed, result, policy))
        self.reporter.write_summary("adapt_summary.json")
        return outcomes

    def compare(self):
        """Runs every sampler and writes the seed-averaged post-burn-in ACF per sampler."""
        cfg = self.config
        if len(cfg.samplers) < 2:
            raise ConfigError("compare needs at least two samplers")
        if len(set(cfg.labels)) != len(cfg.labels):
            raise ConfigError("sampler labels must be unique for compare")
        results = self.run_all()
        columns, areas = {}, {}
        for label in cfg.labels:
            series = [r.trace.after_burn_in(cfg.burn_in) for r in results if r.label == label]
            columns[label] = mean_acf(series, cfg.max_lag)
            areas[label] = [acf_area(s, cfg.max_lag) for s in series]
        table_path = os.path.join(self.out_dir, "acf_table.csv")
        write_acf_table(columns, table_path)
        self.reporter.write_json("compare_summary.json", {
            "max_lag": cfg.max_lag,
            "burn_in": cfg.burn_in,
            "seeds": list(cfg.seeds),
            "acf_area_per_seed": areas,
            "mean_acf_area": {label: float(np.mean(v)) for label, v in areas.items()},
        })
        for label, values in areas.items():
            self.reporter.log_event(f"COMPARE {label}: mean ACF area {np.mean(values):.4f} over {len(values)} seeds")
        return columns, areas
