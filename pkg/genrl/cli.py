"""
Command line entry point.

```
genrl run --config <file> [--mode genrl|base1|base2|base3] [--seed N] [--output-dir D]
genrl eval --generator <file> --benchmark <id> [--config <file>] [--instances 0-9]
genrl list-benchmarks
```

Exit codes: 0 on completion, 1 on a configuration error, 2 on any other genrl error.
"""

import argparse
import logging
import sys
from collections.abc import Sequence
from dataclasses import replace

from genrl.__version__ import __version__
from genrl._core.reports import summarize, summary_table
from genrl._services.benchmarks import BenchmarkService
from genrl._utils.config import MODES, Config, ExperimentConfig
from genrl.client import Client
from genrl.errors import ConfigError, GenRLError, InvalidInputError

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_TRAINING = 2


def parse_indices(text: str) -> list[int]:
    """`"0-3,7"` is `[0, 1, 2, 3, 7]`."""
    out = set()
    try:
        for part in text.split(","):
            part = part.strip()
            if "-" in part:
                lo, hi = (int(p) for p in part.split("-", 1))
                out.update(range(lo, hi + 1))
            elif part:
                out.add(int(part))
    except ValueError as err:
        raise InvalidInputError(f"instances: cannot parse '{text}'.") from err
    if not out or min(out) < 0:
        raise InvalidInputError(f"instances: need non-negative indices, got '{text}'.")
    return sorted(out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="genrl", description="Learn policy generators for inductive task families."
    )
    parser.add_argument("--version", action="version", version=f"genrl {__version__}")
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level (default: INFO).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Train and evaluate the configured experiment.")
    run.add_argument("--config", help="Experiment config (toml).")
    run.add_argument("--mode", choices=MODES, help="Only run this mode.")
    run.add_argument("--seed", type=int, help="Only run this seed.")
    run.add_argument("--output-dir", help="Override the config's output directory.")

    ev = sub.add_parser("eval", help="Evaluate a stored generator on a benchmark.")
    ev.add_argument("--generator", required=True, help="Generator file.")
    ev.add_argument("--benchmark", required=True, help="Benchmark id.")
    ev.add_argument("--config", help="Experiment config for evaluation settings.")
    ev.add_argument("--instances", default="0-9", help="Indices, e.g. '0-9' or '0,3,5'.")
    ev.add_argument("--rollouts", type=int, help="Rollouts per instance.")
    ev.add_argument("--seed", type=int, default=0)

    sub.add_parser("list-benchmarks", help="List benchmark ids.")
    return parser


def _client(config_path: str | None, **overrides) -> Client:
    client = Client(config_path=config_path)
    if overrides:
        experiment = replace(client.config.experiment, **overrides)
        client = Client(config=Config(experiment=experiment))
    return client


def _run(args: argparse.Namespace) -> int:
    overrides = {"output_dir": args.output_dir} if args.output_dir else {}
    client = _client(args.config, **overrides)
    reports = client.run(mode=args.mode, seed=args.seed)
    print(summary_table(summarize(reports)), end="")
    return EXIT_OK


def _eval(args: argparse.Namespace) -> int:
    if args.config is None:
        experiment = ExperimentConfig(benchmark=args.benchmark, train=[0])
        client = Client(config=Config(experiment=experiment))
    else:
        client = _client(args.config, benchmark=args.benchmark)
    task = client.benchmarks.get(args.benchmark)
    indices = [i for i in parse_indices(args.instances) if task.in_range(i)]
    generator = client.generators.read(args.generator)
    estimates = client.generators.evaluate(
        generator, task, indices, seed=args.seed, n_rollouts=args.rollouts
    )
    print("instance  probability  passed")
    for e in estimates:
        print(f"{e.index:<8}  {e.probability:<11.3f}  {'yes' if e.passed else 'no'}")
    return EXIT_OK


def _list(args: argparse.Namespace) -> int:
    benches = BenchmarkService().list()
    width = max(len(b.id) for b in benches)
    for b in benches:
        print(f"{b.id.ljust(width)}  {b.description}")
    return EXIT_OK


COMMANDS = {"run": _run, "eval": _eval, "list-benchmarks": _list}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except ConfigError as err:
        print(f"genrl: configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except GenRLError as err:
        print(f"genrl: {err}", file=sys.stderr)
        return EXIT_TRAINING


if __name__ == "__main__":
    sys.exit(main())
