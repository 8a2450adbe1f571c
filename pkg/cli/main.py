#!/usr/bin/env python3
"""Conformal CLI - prediction regions, membership queries, tuning and simulations."""

import argparse
import sys
from typing import Any

from cli import __version__

RUN_FLAGS = (
    "alpha",
    "bandwidth",
    "tune",
    "tuner",
    "grid_size",
    "grid_span",
    "beta",
    "scale",
    "seed",
    "threads",
    "kernel",
    "grid_res",
    "header",
)


def _add_run_flags(p: argparse.ArgumentParser, tuning: bool = True) -> None:
    """Flags shared by region, member and tune. Defaults are None so a --config file can fill them."""
    p.add_argument("--config", default=None, help="TOML/JSON run config (flags override it)")
    p.add_argument("--alpha", type=float, default=None, help="Miscoverage level (default 0.1)")
    p.add_argument("--bandwidth", type=float, default=None, help="Fixed bandwidth h")
    if tuning:
        p.add_argument(
            "--tune",
            action="store_const",
            const=True,
            default=None,
            help="Pick h by minimizing region volume",
        )
    p.add_argument("--tuner", choices=["bonferroni", "split"], default=None)
    p.add_argument("--grid-size", dest="grid_size", type=int, default=None)
    p.add_argument("--grid-span", dest="grid_span", type=float, default=None)
    p.add_argument("--beta", type=float, default=None, help="Smoothness for the A2 bandwidth")
    p.add_argument("--scale", type=float, default=None, help="Constant in the A2 bandwidth")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument(
        "--kernel",
        choices=["epanechnikov", "biweight", "triweight", "uniform-box"],
        default=None,
    )
    p.add_argument("--grid-res", dest="grid_res", type=int, default=None)
    p.add_argument(
        "--header",
        action="store_const",
        const=True,
        default=None,
        help="CSV inputs start with a header row",
    )


def _run_flags(args: argparse.Namespace) -> dict[str, Any]:
    return {k: getattr(args, k) for k in RUN_FLAGS if hasattr(args, k)}


def create_parser() -> argparse.ArgumentParser:
    """Create the argument parser for the CLI."""
    parser = argparse.ArgumentParser(
        prog="conformal",
        description="Conformal prediction regions from kernel density estimates",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  conformal region data.csv --alpha 0.1 --out region.json
  conformal region data.csv --tune --tuner split
  conformal member data.csv --query points.csv
  conformal member region.json --query points.csv --out flags.csv
  conformal tune data.csv --tuner bonferroni --curve curve.csv
  conformal simulate table1 --repetitions 50 --threads 4
        """,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    subparsers = parser.add_subparsers(dest="command", help="Commands", metavar="COMMAND")

    region_parser = subparsers.add_parser("region", help="Build the conformal region for a sample")
    region_parser.add_argument("data", help="CSV of sample points, one per row")
    region_parser.add_argument("--out", default=None, help="Write the region JSON here")
    _add_run_flags(region_parser)

    member_parser = subparsers.add_parser("member", help="P-values and membership for query points")
    member_parser.add_argument("source", help="CSV sample, or a region JSON from `conformal region`")
    member_parser.add_argument("--query", required=True, help="CSV of query points")
    member_parser.add_argument("--out", default=None, help="Write the CSV here (default stdout)")
    _add_run_flags(member_parser)

    tune_parser = subparsers.add_parser("tune", help="Volume-driven bandwidth selection")
    tune_parser.add_argument("data", help="CSV of sample points, one per row")
    tune_parser.add_argument("--out", default=None, help="Write the tuned region JSON here")
    tune_parser.add_argument("--curve", default=None, help="Write the (h, volume) CSV here")
    _add_run_flags(tune_parser, tuning=False)

    simulate_parser = subparsers.add_parser("simulate", help="Run a Monte-Carlo experiment")
    simulate_parser.add_argument("config", help="Experiment config path or shipped name")
    simulate_parser.add_argument("--repetitions", type=int, default=None)
    simulate_parser.add_argument("--seed", type=int, default=None)
    simulate_parser.add_argument("--threads", type=int, default=None)
    simulate_parser.add_argument("--out", default=None, help="Report directory (default reports)")
    simulate_parser.add_argument(
        "--timing", action="store_true", help="Record wall time in the JSON report"
    )
    simulate_parser.add_argument(
        "--log", action="store_true", help="Also write per-repetition rows"
    )

    return parser


def main() -> int:
    """Main CLI entry point."""
    parser = create_parser()
    args = parser.parse_args()

    if args.command == "region":
        from cli.commands.region import region_cmd

        return region_cmd(args.data, out=args.out, config=args.config, **_run_flags(args))
    if args.command == "member":
        from cli.commands.member import member_cmd

        return member_cmd(
            args.source, args.query, out=args.out, config=args.config, **_run_flags(args)
        )
    if args.command == "tune":
        from cli.commands.tune import tune_cmd

        return tune_cmd(
            args.data, out=args.out, curve=args.curve, config=args.config, **_run_flags(args)
        )
    if args.command == "simulate":
        from cli.commands.simulate import simulate_cmd

        return simulate_cmd(
            args.config,
            repetitions=args.repetitions,
            seed=args.seed,
            threads=args.threads,
            out=args.out,
            timing=args.timing,
            log=args.log,
        )
    parser.print_help()
    return 1


if __name__ == "__main__":
    sys.exit(main())
