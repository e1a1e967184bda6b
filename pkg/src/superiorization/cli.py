"""Command-line driver for the CT superiorization experiments."""
from __future__ import annotations

import argparse
import logging
import sys

from .experiment import ConfigError, ExperimentConfig, run_experiment

# flag -> ExperimentConfig field
FLAG_FIELDS = {
    "method": "method",
    "size": "J",
    "views": "views",
    "noise": "noise_level",
    "seed": "seed",
    "trials": "trials",
    "epsilon": "epsilon",
    "eta0": "eta0",
    "kernel": "kernel",
    "nk": "nk",
    "lambda": "relaxation",
    "max_iter": "max_iter",
    "out": "output_dir",
    "cw_bound": "cw_bound",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="superiorization",
        description="Reconstruct a simulated fan-beam CT scan of the Shepp-Logan phantom with "
                    "ART, optionally superiorized by component-wise (cw) or negative-gradient (ng) "
                    "TV perturbations.",
    )
    parser.add_argument("--config", help="JSON file with ExperimentConfig keys; flags override it")
    parser.add_argument("--method", help="cw, ng, none, a comma-separated list of them, or all")
    parser.add_argument("--size", type=int, help="image side J in pixels")
    parser.add_argument("--views", type=int, help="number of source positions over a full turn")
    parser.add_argument("--noise", type=float, help="relative Gaussian noise level, e.g. 0.02")
    parser.add_argument("--seed", type=int, help="noise seed of trial 0 (trial t uses seed + t)")
    parser.add_argument("--trials", type=int)
    parser.add_argument("--epsilon", type=float, help="stop once ||Au - y|| <= epsilon")
    parser.add_argument("--eta0", type=float, help="first perturbation size")
    parser.add_argument("--kernel", type=float, help="geometric ratio of the step sizes")
    parser.add_argument("--nk", type=int, help="perturbation steps per ART sweep")
    parser.add_argument("--lambda", type=float, help="ART relaxation parameter in (0, 2)")
    parser.add_argument("--max-iter", dest="max_iter", type=int)
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--cw-bound", dest="cw_bound", choices=("ball", "pixel"),
                        help="per-pixel bound of cw steps (default: ball)")
    parser.add_argument("--strict", action="store_true", default=None,
                        help="check every perturbation against its nonascending ball")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def config_from_args(args) -> ExperimentConfig:
    data = {}
    if args.config:
        data = ExperimentConfig.from_json(args.config).to_dict()
        data["relaxation"] = data.pop("lambda")
    for flag, name in FLAG_FIELDS.items():
        value = getattr(args, flag)
        if value is not None:
            data[name] = value
    if args.strict is not None:
        data["strict"] = args.strict
    return ExperimentConfig(**data)


def format_summary(summary: dict) -> str:
    lines = [f"{'method':<7}{'n':>4}{'TV':>20}{'time (s)':>18}{'iterations':>18}{'rel. error':>18}{'done':>7}"]
    for method, s in summary.items():
        cells = [f"{m:.1f} ± {sd:.1f}" for m, sd in (s["tv_out"], s["time_s"], s["iterations"])]
        rel = "{:.4f} ± {:.4f}".format(*s["rel_error"])
        lines.append(f"{method:<7}{s['n']:>4}{cells[0]:>20}{cells[1]:>18}{cells[2]:>18}{rel:>18}"
                     f"{s['terminated'][0]:>7.0%}")
    return "\n".join(lines)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
        result = run_experiment(config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1
    print(format_summary(result.summary()))
    unfinished = [m for m in result.metrics if not m.terminated]
    if unfinished:
        print(f"{len(unfinished)} run(s) hit max_iter before reaching epsilon", file=sys.stderr)
    print(f"results written to {config.output_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
