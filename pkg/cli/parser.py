"""
Command-line parser for the simulator.
"""

import argparse

from core.experiment import SOLVER_CHOICES, SOLVERS
from core.sweep_manager import AXES, INTEGER_AXES
from utils.config import Config


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from e


def build_parser():
    """
    Build the argument parser with one subcommand per workflow.

    Returns:
        argparse.ArgumentParser: The parser
    """
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment INI file (default: the shipped operating point)")
    common.add_argument("--seed", type=int, help="master seed (overrides the configuration)")
    common.add_argument("--dictionary", help="dictionary cache to load instead of rebuilding")
    common.add_argument("--workers", type=int, help=f"worker threads (default: ${Config.WORKERS_ENV} or 1)")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(
        prog="main.py",
        description=f"{Config.APP_NAME}: lens-assisted Rydberg receiver AoA simulator",
    )
    parser.add_argument("--version", action="version", version=Config.version_string())
    sub = parser.add_subparsers(dest="command", required=True)

    build = sub.add_parser("build-dict", parents=[common], help="build and cache the power dictionary")
    build.add_argument("--out", required=True, help="cache file to write")

    simulate = sub.add_parser("simulate", parents=[common], help="run one trial and print its record")
    simulate.add_argument("--solver", choices=SOLVER_CHOICES, help="solver(s) to run")

    sweep = sub.add_parser("sweep", parents=[common], help="RMSE sweep over one parameter")
    sweep.add_argument("--axis", choices=AXES, required=True)
    sweep.add_argument("--values", type=_float_list, required=True,
                       help="comma-separated axis values (dB, users, cells or degrees)")
    sweep.add_argument("--trials", type=int, help="trials per axis value")
    sweep.add_argument("--solver", choices=SOLVER_CHOICES)
    sweep.add_argument("--out", required=True, help="summary CSV")
    sweep.add_argument("--trials-out", help="also write the per-trial CSV")

    bench = sub.add_parser("bench", parents=[common], help="solver runtime vs number of cells")
    bench.add_argument("--cells", type=_int_list, default=list(Config.BENCH_CELLS))
    bench.add_argument("--repetitions", type=int, default=Config.BENCH_REPETITIONS)
    bench.add_argument("--out", required=True)

    traces = sub.add_parser("traces", parents=[common], help="convergence traces on the -8/3/10 deg scenario")
    traces.add_argument("--solver", choices=SOLVERS, required=True)
    traces.add_argument("--noisy", action="store_true", help="use simulated snapshots instead of the expected profile")
    traces.add_argument("--out", required=True)

    field = sub.add_parser("field", parents=[common], help="BPM field intensity at every depth")
    field.add_argument("--theta", type=float, required=True, help="angle of arrival in degrees")
    field.add_argument("--out", required=True)

    return parser


def parse_args(argv=None):
    """
    Parse a command line, rejecting non-integral user or cell counts.

    Returns:
        argparse.Namespace: The parsed arguments
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "sweep" and args.axis in INTEGER_AXES:
        fractional = [v for v in args.values if v != int(v)]
        if fractional:
            parser.error(f"--axis {args.axis} takes whole numbers, got {fractional}")
        args.values = [int(v) for v in args.values]
    return args
