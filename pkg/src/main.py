import argparse
import json
import os
import sys

from errors import ConfigError, SamplerError, VerificationError
from experiment_config import ExperimentConfig
from harness import ExperimentRunner
from logger_config import logger
from model_io import save_model
from model_zoo import build_model
from system_check import run_verification

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VERIFICATION_FAILED = 2


def build_parser():
    parser = argparse.ArgumentParser(prog="sardonics", description="Self-avoiding-walk samplers for binary models")
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment_flags(p):
        p.add_argument("--config", required=True, help="experiment JSON file")
        p.add_argument("--seed", type=int, action="append", dest="seeds", help="seed (repeatable)")
        p.add_argument("--steps", type=int)
        p.add_argument("--out", dest="out_dir")
        p.add_argument("--stride", type=int)
        p.add_argument("--max-lag", type=int, dest="max_lag")
        p.add_argument("--burn-in", type=float, dest="burn_in")
        p.add_argument("--workers", type=int)

    gen = sub.add_parser("generate", help="write a model file")
    gen.add_argument("output", help="model file to write")
    gen.add_argument("--config", help="take the model section of this experiment file")
    gen.add_argument("--preset")
    gen.add_argument("--generator")
    gen.add_argument("--size", type=int)
    gen.add_argument("--couplings")
    gen.add_argument("--fields")
    gen.add_argument("--beta", type=float)
    gen.add_argument("--model-seed", type=int, dest="seed")

    for name, text in (("run", "run every sampler for every seed"),
                       ("adapt", "adaptation phase only: write policies and adaptation logs"),
                       ("compare", "run samplers and write the seed-averaged ACF table")):
        experiment_flags(sub.add_parser(name, help=text))

    verify = sub.add_parser("verify", help="check the samplers against exact oracles")
    verify.add_argument("--level", choices=("quick", "full"), default="quick")
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--steps", type=int, default=10 ** 6, help="steps per stationarity run (full level)")
    verify.add_argument("--out", dest="out_dir", help="directory for verify_report.json")
    return parser


def load_config(args):
    config = ExperimentConfig.from_file(args.config)
    return config.with_overrides(seeds=args.seeds, steps=args.steps, out_dir=args.out_dir, stride=args.stride,
                                 max_lag=args.max_lag, burn_in=args.burn_in, workers=args.workers)


def cmd_generate(args):
    spec = {}
    if args.config:
        spec.update(ExperimentConfig.from_file(args.config).model)
    flags = {"preset": args.preset, "generator": args.generator, "size": args.size, "couplings": args.couplings,
             "fields": args.fields, "beta": args.beta, "seed": args.seed}
    spec.update({k: v for k, v in flags.items() if v is not None})
    if not spec:
        raise ConfigError("generate needs --config, --preset or --generator")
    model = build_model(spec)
    directory = os.path.dirname(args.output)
    if directory:
        os.makedirs(directory, exist_ok=True)
    save_model(model, args.output)
    return EXIT_OK


def cmd_run(args):
    with ExperimentRunner(load_config(args)) as runner:
        runner.run_all()
    return EXIT_OK


def cmd_adapt(args):
    with ExperimentRunner(load_config(args)) as runner:
        outcomes = runner.adapt_all()
    for label, seed, result, policy in outcomes:
        best = result.best_record
        logger.info(f"{label} seed={seed}: best reward {best.reward:.4f} at iteration {best.iteration} "
                    f"params={best.params}; policy over {len(policy)} candidates")
    return EXIT_OK


def cmd_compare(args):
    with ExperimentRunner(load_config(args)) as runner:
        _, areas = runner.compare()
    for label, values in areas.items():
        logger.info(f"{label}: per-seed ACF areas {[round(v, 3) for v in values]}")
    return EXIT_OK


def cmd_verify(args):
    report = run_verification(args.level, seed=args.seed, stationarity_steps=args.steps)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        with open(os.path.join(args.out_dir, "verify_report.json"), "w") as f:
            json.dump(report.to_mapping(), f, indent=2)
    if not report.passed:
        names = ", ".join(r.name for r in report.failures)
        raise VerificationError(f"{len(report.failures)} check(s) failed: {names}")
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "run": cmd_run, "adapt": cmd_adapt, "compare": cmd_compare,
            "verify": cmd_verify}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except VerificationError as e:
        logger.critical(f"Verification failed: {e}")
        return EXIT_VERIFICATION_FAILED
    except SamplerError as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_ERROR
    except OSError as e:
        logger.critical(f"I/O error during {args.command}: {e}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
