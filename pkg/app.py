#!/usr/bin/env python3
"""
Main application entry point for the APDS downlink simulator.
Provides CLI commands to run, compare and validate scenarios.
"""

import argparse
import logging
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional

from src import config
from src.core import ALL_CLASSES, SimulationError
from src.engine import FrameStats, run_simulation
from src.metrics import MetricsReport, build_report, emit_csv
from src.scenario import SUPPORTED_SCHEDULERS, Scenario, ScenarioError, load_scenario, scenario_hash
from src.scheduler import SchedulerKind

# Set up logging
handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
if config.LOG_FILE:
    handlers.append(logging.FileHandler(config.LOG_FILE))
logging.basicConfig(level=config.LOG_LEVEL, format=config.LOG_FORMAT, handlers=handlers, force=True)
logger = logging.getLogger(__name__)

EXIT_FAILURE = 1
EXIT_USAGE = 2


def prepare_scenario(path: str, seed: Optional[int] = None) -> Scenario:
    """Load a scenario and apply the --seed override."""
    scenario = load_scenario(path)
    if seed is not None:
        scenario = scenario.model_copy(update={"seed": seed})
    return scenario


def simulate(scenario: Scenario, scheduler: str, progress: bool = False) -> List[FrameStats]:
    """Run one scheduler over the scenario."""
    return run_simulation(scenario, SchedulerKind(scheduler), progress=progress)


def print_summary(report: MetricsReport):
    """Print per-class cumulative throughput/delay for every scheduler."""
    print("\n" + "=" * 80)
    print(f"SCENARIO {report.scenario_name}  (seed {report.seed}, hash {report.scenario_hash})")
    print("=" * 80)
    print(f"{'scheduler':<10}{'class':<9}{'throughput kbps':>17}{'delay ms':>12}{'dropped':>10}{'max streak':>12}")
    for scheduler in report.schedulers:
        for service_class in ALL_CLASSES:
            metrics = report.classes[(scheduler, service_class)]
            delay = "-" if metrics.mean_delay is None else f"{metrics.mean_delay:.3f}"
            print(
                f"{scheduler.upper():<10}{service_class.label:<9}"
                f"{metrics.mean_throughput / 1000:>17.1f}{delay:>12}"
                f"{metrics.dropped_packets:>10}{metrics.max_interrupt_streak:>12}"
            )
        cases = ", ".join(f"{case}={count}" for case, count in report.cases[scheduler].items())
        print(f"{'':<10}frames: {cases}")
    print("=" * 80)


def write_report(runs: Dict[str, List[FrameStats]], scenario: Scenario, window: int, out_path: Path) -> Path:
    report = build_report(
        runs,
        scenario_name=scenario.name,
        scenario_hash=scenario_hash(scenario),
        seed=scenario.seed,
        window=window,
        frame_duration=scenario.frame,
    )
    path = emit_csv(report, out_path)
    print_summary(report)
    print(f"\nCSV written to {path}")
    return path


def run_command(args) -> int:
    """Run a single scheduler."""
    scenario = prepare_scenario(args.scenario, args.seed)
    scheduler = args.scheduler or scenario.scheduler

    logger.info("=" * 80)
    logger.info(f"Running {scheduler.upper()} on '{scenario.name}'")
    logger.info("=" * 80)

    series = simulate(scenario, scheduler, progress=args.progress)
    out_path = Path(args.out) / f"{scenario.name}_{scheduler}.csv"
    write_report({scheduler: series}, scenario, args.window, out_path)
    return 0


def parse_scheduler_list(value: str, parser: argparse.ArgumentParser) -> List[str]:
    """Split --schedulers; unsupported ones are skipped with a note, unknown ones are usage errors."""
    requested = [name.strip().lower() for name in value.split(",") if name.strip()]
    schedulers = []
    for name in requested:
        if name in config.UNSUPPORTED_SCHEDULERS:
            print(f"note: scheduler '{name}' is not supported; skipping", file=sys.stderr)
            logger.warning(f"Scheduler '{name}' requested but not supported")
        elif name in SUPPORTED_SCHEDULERS:
            if name not in schedulers:
                schedulers.append(name)
        else:
            parser.error(f"unknown scheduler '{name}' (choose from {', '.join(SUPPORTED_SCHEDULERS)})")
    if not schedulers:
        parser.error("no supported scheduler requested")
    return schedulers


def compare_command(args, parser: argparse.ArgumentParser) -> int:
    """Run several schedulers on the same scenario and merge their metrics."""
    schedulers = parse_scheduler_list(args.schedulers, parser)
    scenario = prepare_scenario(args.scenario, args.seed)

    logger.info("=" * 80)
    logger.info(f"Comparing {', '.join(s.upper() for s in schedulers)} on '{scenario.name}'")
    logger.info("=" * 80)

    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            futures = {
                name: pool.submit(run_simulation, scenario, SchedulerKind(name)) for name in schedulers
            }
            runs = {name: futures[name].result() for name in schedulers}
    else:
        runs = {name: simulate(scenario, name, progress=args.progress) for name in schedulers}

    out_path = Path(args.out) / f"{scenario.name}_compare.csv"
    write_report(runs, scenario, args.window, out_path)
    return 0


def validate_command(args) -> int:
    """Validate a scenario file and print what it contains."""
    scenario = prepare_scenario(args.scenario)
    connections = scenario.resolved_connections()
    per_class = Counter(setup.service_class for setup in connections)
    reserved = sum(setup.qos.min_bytes(scenario.frame) for setup in connections)

    print("\n" + "=" * 80)
    print(f"SCENARIO {scenario.name}: valid")
    print("=" * 80)
    print(f"Link rate       : {scenario.link} bps")
    print(f"Frame           : {scenario.frame} us x {scenario.duration} frames")
    print(f"B_total         : {scenario.total_bytes} bytes/frame")
    print(f"Queue capacity  : {scenario.queue_capacity} packets")
    print(f"eta             : {scenario.eta}")
    print(f"Scheduler       : {scenario.scheduler}")
    print(f"Seed            : {scenario.seed}")
    print(f"Hash            : {scenario_hash(scenario)}")
    print(f"Connections     : {len(connections)}")
    for service_class in ALL_CLASSES:
        print(f"  {service_class.label:<8}: {per_class.get(service_class, 0)}")
    print(f"Reserved load   : {reserved} bytes/frame ({reserved / scenario.total_bytes:.1%} of B_total)")
    print("=" * 80)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="APDS downlink scheduling simulator (IEEE 802.16)",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Run APDS on the bundled reference scenario
  python app.py run data/scenarios/reference.json

  # Run FIFO with another seed and 50-frame windows
  python app.py run data/scenarios/reference.json --scheduler fifo --seed 7 --window 50

  # Compare schedulers in parallel
  python app.py compare data/scenarios/reference.json --schedulers apds,fifo,dfpq --workers 3

  # Check a scenario file
  python app.py validate data/scenarios/reference.json
        """
    )
    commands = parser.add_subparsers(dest="command")

    def add_run_options(command: argparse.ArgumentParser):
        command.add_argument("scenario", type=str, help="Scenario JSON file")
        command.add_argument("--seed", type=int, help="Override the scenario seed")
        command.add_argument(
            "--out",
            type=str,
            default=str(config.OUTPUT_DIR),
            help=f"Output directory for CSV files (default: {config.OUTPUT_DIR})"
        )
        command.add_argument(
            "--window",
            type=int,
            default=config.DEFAULT_WINDOW,
            help=f"Frames per metric window (default: {config.DEFAULT_WINDOW})"
        )
        command.add_argument("--progress", action="store_true", help="Show a progress bar")

    run = commands.add_parser("run", help="Run one scheduler")
    add_run_options(run)
    run.add_argument(
        "--scheduler",
        type=str.lower,
        choices=SUPPORTED_SCHEDULERS,
        help="Scheduler to use (default: the scenario's)"
    )

    compare = commands.add_parser("compare", help="Run several schedulers on one scenario")
    add_run_options(compare)
    compare.add_argument(
        "--schedulers",
        type=str,
        default=",".join(config.DEFAULT_SCHEDULERS),
        help=f"Comma-separated schedulers (default: {','.join(config.DEFAULT_SCHEDULERS)})"
    )
    compare.add_argument("--workers", type=int, default=1, help="Worker processes (default: 1)")

    validate = commands.add_parser("validate", help="Validate a scenario file")
    validate.add_argument("scenario", type=str, help="Scenario JSON file")

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main application entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command is None:
        parser.print_help()
        return EXIT_USAGE
    if getattr(args, "window", 1) < 1:
        parser.error("--window must be >= 1")
    if getattr(args, "workers", 1) < 1:
        parser.error("--workers must be >= 1")

    try:
        if args.command == "run":
            return run_command(args)
        if args.command == "compare":
            return compare_command(args, parser)
        return validate_command(args)
    except ScenarioError as e:
        logger.error(f"✗ Scenario rejected: {e}")
        print(f"ScenarioError: {e}", file=sys.stderr)
    except SimulationError as e:
        logger.error(f"✗ Simulation failed: {e}")
        print(f"SimulationError: {e}", file=sys.stderr)
    except OSError as e:
        logger.error(f"✗ Output failed: {e}")
        print(f"OSError: {e}", file=sys.stderr)
    return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
