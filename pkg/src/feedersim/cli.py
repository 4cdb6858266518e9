"""Command-line interface.

Subcommands:

    simulate    run one configuration and write results CSV
    bench       run a benchmark suite and emit the report
    gen-config  print a self-contained config scaffold to stdout

Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.
All randomness flows from the config/CLI seed; nothing reads the clock
for entropy.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

from .bench import load_suite, run_suite
from .coordinator import ExchangeSchedule, coordinator_run
from .engine import simulate_sequential
from .fileio import (
    ConfigError,
    ParseError,
    RunConfig,
    feeder_plans,
    load_run_config,
    scaffold_config,
    write_house_results,
    write_results,
)
from .population import PRESETS
from .shared_exec import run_shared

USAGE_ERROR = 1
RUNTIME_ERROR = 2


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; we reserve 2
    for runtime failures."""

    def error(self, message: str) -> None:  # noqa: D102
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="feedersim",
        description="Bottom-up power distribution load simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one configured simulation")
    sim.add_argument("--config", required=True, help="run-config JSON file")
    sim.add_argument("--mode", choices=("seq", "shared", "mp"))
    sim.add_argument("--workers", type=int, help="shared-mode worker count")
    sim.add_argument("--feeders", type=int, help="mp-mode feeder count")
    sim.add_argument("--seed", type=int, help="override the config seed")
    sim.add_argument("--out", help="output directory (default from config)")
    sim.add_argument("--per-house", action="store_true",
                     help="also write per-house loads (seq/shared only)")
    sim.add_argument("--transport", choices=("thread", "process"),
                     help="mp-mode worker transport")

    bench = sub.add_parser("bench", help="run a benchmark suite")
    bench.add_argument("--suite", required=True, help="suite JSON file")
    bench.add_argument("--out", required=True, help="report directory")
    bench.add_argument("--plots", action="store_true",
                       help="emit plot images (needs matplotlib)")

    gen = sub.add_parser("gen-config", help="print a config scaffold")
    gen.add_argument("--houses", type=int, required=True,
                     help="houses per feeder")
    gen.add_argument("--feeders", type=int, required=True)
    gen.add_argument("--seed", type=int, default=42)
    gen.add_argument("--population", default="default",
                     choices=sorted(PRESETS))
    gen.add_argument("--mode", default="seq", choices=("seq", "shared", "mp"))
    return parser


def _apply_overrides(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    updates = {}
    if args.mode is not None:
        updates["mode"] = args.mode
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        updates["workers"] = args.workers
    if args.feeders is not None:
        if args.feeders < 1:
            raise ConfigError("--feeders must be >= 1")
        updates["feeders"] = args.feeders
    if args.out is not None:
        updates["out_dir"] = args.out
    if args.per_house:
        updates["per_house"] = True
    if args.transport is not None:
        updates["transport"] = args.transport
    if args.seed is not None and args.seed != config.seed:
        updates["seed"] = args.seed
        updates["population"] = dataclasses.replace(
            config.population, master_seed=args.seed
        )
    config = dataclasses.replace(config, **updates)
    if config.mode == "mp" and config.per_house:
        raise ConfigError(
            "per_house output is unavailable in mp mode (workers only "
            "report aggregates); use seq or shared"
        )
    return config


def _schedule_for(config: RunConfig) -> ExchangeSchedule:
    n = config.sim.n_steps
    if config.schedule == "end_only":
        return ExchangeSchedule.end_only(n)
    if config.schedule == "per_step":
        return ExchangeSchedule.every_step(n)
    return ExchangeSchedule(tuple(config.schedule))


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = _apply_overrides(load_run_config(args.config), args)
    plans = feeder_plans(config)

    started = time.perf_counter()
    if config.mode == "seq":
        runs = simulate_sequential(plans, config.sim, config.per_house)
    elif config.mode == "shared":
        runs = run_shared(
            plans, config.sim, config.workers, config.per_house
        ).per_feeder
    else:
        runs = coordinator_run(
            plans, config.sim, _schedule_for(config),
            transport=config.transport,
        ).per_feeder
    wall = time.perf_counter() - started

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results_path = out_dir / "results.csv"
    write_results(runs, results_path)
    if config.per_house:
        write_house_results(runs, out_dir / "results_houses.csv")

    houses = sum(config.houses_per_feeder for _ in runs)
    print(
        f"simulated {len(runs)} feeder(s), {houses} houses, "
        f"{config.sim.n_steps} steps in {wall:.2f} s [{config.mode}] "
        f"-> {results_path}"
    )
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    suite = load_suite(args.suite)
    rows = run_suite(suite, args.out, plots=args.plots)
    print(f"{len(rows)} benchmark rows -> {Path(args.out) / 'bench.csv'}")
    return 0


def _cmd_gen_config(args: argparse.Namespace) -> int:
    config = scaffold_config(
        houses=args.houses, feeders=args.feeders, seed=args.seed,
        population=args.population, mode=args.mode,
    )
    json.dump(config, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "bench":
            return _cmd_bench(args)
        return _cmd_gen_config(args)
    except (ConfigError, ParseError, ValueError, FileNotFoundError) as exc:
        print(f"feedersim: config error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (RuntimeError, TimeoutError, OSError) as exc:
        print(f"feedersim: runtime error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
