#!/usr/bin/env python
"""
CLI interface to fbmc-cpd

Run a link-level scenario and write the result table, dump the interference
histogram of a scenario, or print the interference weights of a prototype.
"""
from __future__ import annotations

import argparse
from collections.abc import Sequence
import logging
import sys

import attr

from fbmc_cpd import __version__
from fbmc_cpd.harness import RECEIVER_MODES, emit_histogram, load_scenario, run_scenario
from fbmc_cpd.prototype import compute_weights, design_prototype

version_str = "fbmc-cpd [version {}]".format(__version__)


def main(args: Sequence[str] | None = None) -> int:
    namespace = parse_args(args)
    logging.basicConfig(
        level=namespace.log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    return namespace.func(namespace)


def _load(name: str):
    try:
        return load_scenario(name)
    except OSError:
        sys.stderr.write(f'Cannot open file "{name}".\n')
        sys.exit(1)


def simulate(namespace: argparse.Namespace) -> int:
    """Run the Monte Carlo of a scenario and write the CSV table."""
    scenario = _load(namespace.scenario)
    changes = {}
    if namespace.seed is not None:
        changes["seed"] = namespace.seed
    if namespace.trials is not None:
        changes["trials_per_point"] = namespace.trials
    if namespace.modes:
        changes["receiver_modes"] = namespace.modes
    scenario = attr.evolve(scenario, **changes)
    try:
        rows = run_scenario(scenario, namespace.out, workers=namespace.workers)
    except OSError:
        sys.stderr.write(f'Cannot open file "{namespace.out}".\n')
        sys.exit(1)
    unreliable = sum(not row.reliable for row in rows)
    print(f"{len(rows)} rows written to {namespace.out} ({unreliable} unreliable)")
    return 0


def histogram(namespace: argparse.Namespace) -> int:
    """Write the pseudo-symbol interference histogram of a scenario."""
    scenario = _load(namespace.scenario)
    try:
        result = emit_histogram(scenario, namespace.out, namespace.frames, namespace.bins)
    except OSError:
        sys.stderr.write(f'Cannot open file "{namespace.out}".\n')
        sys.exit(1)
    print(f"mean {result.mean:.6g} variance {result.variance:.6g} ({result.count} samples)")
    return 0


def weights(namespace: argparse.Namespace) -> int:
    """Print beta, gamma and delta of the prototype for M subcarriers."""
    result = compute_weights(design_prototype(namespace.M, namespace.K))
    for name, value in result.as_dict().items():
        print(f"{name} = {value:.6f}")
    return 0


def mode_list(value: str) -> tuple[str, ...]:
    """Comma-separated receiver modes, e.g. ``informed,perfect_csi``."""
    modes = tuple(item.strip() for item in value.split(",") if item.strip())
    if not modes:
        raise argparse.ArgumentTypeError("expected at least one receiver mode")
    unknown = [mode for mode in modes if mode not in RECEIVER_MODES]
    if unknown:
        raise argparse.ArgumentTypeError(
            f"unknown receiver mode(s) {', '.join(unknown)}; "
            f"choose from {', '.join(RECEIVER_MODES)}"
        )
    return modes


def parse_args(args: Sequence[str] | None) -> argparse.Namespace:
    """Parse input CLI arguments."""
    parser = argparse.ArgumentParser(
        description="Link-level simulation of FBMC/OQAM with tensor-based receivers",
        # NOTE: Remember to update README.md w/ the output of `fbmc-cpd -h`
        epilog=(
            """
Examples:

  $ fbmc-cpd simulate --scenario peda --out peda.csv --workers 8
  $ fbmc-cpd simulate --scenario vehb --out vehb.csv --modes informed,perfect_csi
  $ fbmc-cpd histogram --scenario peda --out interference.csv
  $ fbmc-cpd weights --M 32 --K 4
"""
        ),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-v", "--version", action="version", version=version_str)
    parser.add_argument(
        "--log-level",
        default="warning",
        choices=["debug", "info", "warning", "error"],
        help="logging verbosity",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    sim = commands.add_parser("simulate", help="run a scenario and write the result CSV")
    sim.add_argument("--scenario", required=True, help="packaged scenario name or file path")
    sim.add_argument("--out", required=True, help="output CSV path")
    sim.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    sim.add_argument("--trials", type=int, default=None, help="override trials per point")
    sim.add_argument(
        "--modes", type=mode_list, metavar="M1,M2,...", help="receiver modes to compare"
    )
    sim.add_argument("--workers", type=int, default=1, help="worker processes")
    sim.set_defaults(func=simulate)

    hist = commands.add_parser("histogram", help="write the interference histogram")
    hist.add_argument("--scenario", required=True, help="packaged scenario name or file path")
    hist.add_argument("--out", required=True, help="output CSV path")
    hist.add_argument("--frames", type=int, default=200, help="random frames to draw")
    hist.add_argument("--bins", type=int, default=50, help="histogram bins")
    hist.set_defaults(func=histogram)

    wts = commands.add_parser("weights", help="print the interference weights")
    wts.add_argument("--M", type=int, default=32, help="number of subcarriers")
    wts.add_argument("--K", type=int, default=4, help="overlap factor")
    wts.set_defaults(func=weights)
    return parser.parse_args(args)


if __name__ == "__main__":
    exit_code = main(sys.argv[1:])
    sys.exit(exit_code)
