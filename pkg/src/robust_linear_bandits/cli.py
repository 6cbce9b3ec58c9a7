"""Command-line entry point: run studies, run the diagnostic checks, run the lower-bound pair."""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Callable, Optional, Sequence

from .config import DEFAULT_OUTPUT_ROOT, OUTPUT_ROOT_ENV, ExperimentConfig, load_config, parse_seeds
from .exceptions import ConfigurationError, ContractError, EpisodeError, FileSystemError, NumericalError
from .harness import paired_lower_bound_run
from .logging_setup import configure_logging
from .policies import PolicyKind
from .storage import ResultStore
from .study import ExperimentRunner, write_lower_bound

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_RUNTIME_ERROR = 3


def _load(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config)
    seeds = parse_seeds(args.seeds) if args.seeds else None
    return config.with_overrides(seeds=seeds, snapshot_interval=args.snapshot_interval, jobs=args.jobs)


def cmd_run(args: argparse.Namespace) -> int:
    """Run every episode of a configuration and write logs, aggregates and metadata."""
    config = _load(args)
    store = ResultStore(config.output_dir(args.out))
    cells = ExperimentRunner(config, args.jobs).run(store)
    for cell in cells:
        for policy_name in cell.episodes:
            curve = cell.curve(policy_name)
            print(
                f"{cell.plan.cell.name:<20} {policy_name:<24} mean regret {curve.mean[-1]:12.4f} "
                f"(std {curve.std[-1]:.4f}, {curve.num_seeds} seeds)"
            )
    print(f"Results written to {store.root}")
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    """Run a configuration and print every hard check and violation rate; exit 1 on a failed hard check."""
    config = _load(args)
    store = ResultStore(config.output_dir(args.out))
    _, report = ExperimentRunner(config, args.jobs).check(store)

    frame = report.to_frame()
    for (check, policy), group in frame.groupby(["check", "policy"], sort=True):
        failed = int((group["passed"] == 0).sum())
        status = "PASS" if failed == 0 else "FAIL"
        print(f"{status}  {check:<26} {policy:<24} min margin {group['margin'].min():.6g}  ({failed}/{len(group)} runs failed)")
    for rate in report.rates:
        status = "ok" if rate.within_delta else "HIGH"
        print(
            f"RATE  {rate.name:<26} {rate.policy:<24} {rate.violations}/{rate.runs} = {rate.rate:.4f} "
            f"vs delta {rate.delta:g} [{status}]"
        )
    print(f"Diagnostics written to {store.root / 'diagnostics.csv'}")
    return EXIT_OK if report.all_hard_passed else EXIT_CHECKS_FAILED


def cmd_lowerbound(args: argparse.Namespace) -> int:
    """Run the paired lower-bound experiment; exit 1 if the two runs are distinguishable too early."""
    report = paired_lower_bound_run(args.d, args.budget, args.policy, args.K, args.seed)
    out = args.out or Path(os.environ.get(OUTPUT_ROOT_ENV) or DEFAULT_OUTPUT_ROOT) / f"lowerbound_d{args.d}_b{args.budget:g}"
    write_lower_bound(ResultStore(out), report)

    print(f"theta A0: {list(report.theta_a0)}")
    print(f"theta A1: {list(report.theta_a1)}")
    print(f"flip budget {report.budget:g}, realized C {report.C_realized:g} over {report.rounds_corrupted} rounds")
    print(f"regret A0 {report.regret_a0:.6g}, regret A1 {report.regret_a1:.6g}")
    print(f"divergence round: {report.divergence_round}, first declined flip: {report.first_declined_round}")
    if report.bound_applicable:
        verdict = "holds" if report.bound_holds else "VIOLATED"
        print(f"A1 regret bound K/8 - budget/2 = {report.regret_bound:.6g}: {verdict}")
    else:
        print("A1 regret bound not applicable: the flip budget was exhausted")
    print(f"indistinguishable until budget exhaustion: {report.indistinguishable}")
    return EXIT_OK if report.indistinguishable else EXIT_CHECKS_FAILED


def _add_study_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", help="YAML experiment configuration")
    parser.add_argument("--seeds", help="Seed list: 0,1,5 or start:count (overrides the config)")
    parser.add_argument("--out", help=f"Output directory (default: ${OUTPUT_ROOT_ENV} or ./{DEFAULT_OUTPUT_ROOT})")
    parser.add_argument("--jobs", type=int, help="Worker processes (default: CPU count)")
    parser.add_argument("--snapshot-interval", type=int, help="Rounds between design snapshots")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robust-linear-bandits",
        description="Corruption-robust linear contextual bandit experiments",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s run study.yaml                           # Run a study
  %(prog)s run study.yaml --seeds 0:20 --jobs 4     # 20 seeds on 4 workers
  %(prog)s check study.yaml                         # Run and verify the inequalities
  %(prog)s lowerbound --d 5 --budget 8 --policy oful --K 5000
        """,
    )
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")
    parser.add_argument("--no-color", action="store_true", help="Disable colored log output")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run every episode of a configuration")
    _add_study_arguments(run)
    run.set_defaults(handler=cmd_run)

    check = sub.add_parser("check", help="Run a configuration and check the per-run inequalities")
    _add_study_arguments(check)
    check.set_defaults(handler=cmd_check)

    lower = sub.add_parser("lowerbound", help="Run the paired lower-bound instances")
    lower.add_argument("--d", type=int, required=True, help="Dimension (>= 2)")
    lower.add_argument("--budget", type=float, required=True, help="Budget parameter; flip budget is 4*budget/(d-1)")
    lower.add_argument("--policy", choices=[k.value for k in PolicyKind], default=PolicyKind.CW_OFUL.value)
    lower.add_argument("--K", type=int, required=True, help="Horizon")
    lower.add_argument("--seed", type=int, default=0, help="Shared episode seed")
    lower.add_argument("--out", help="Output directory")
    lower.set_defaults(handler=cmd_lowerbound)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point; returns the process exit status."""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(logging.DEBUG if args.debug else logging.INFO, enable_colors=False if args.no_color else None)

    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except ConfigurationError as e:
        logger.error(str(e))
        print(str(e), file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (EpisodeError, NumericalError, ContractError, FileSystemError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(str(e), file=sys.stderr)
        return EXIT_RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
