"""
Rydberg Lens AoA

A simulator for lens-assisted, magnitude-only Rydberg atomic receivers.
It propagates plane waves through an RF lens, simulates the vapor-cell
power measurements and recovers multi-user angles of arrival with the
NN-LASSO and SIC solvers, from single trials up to Monte-Carlo sweeps.
"""

import logging
import sys

from cli.commands import CommandRunner
from cli.parser import parse_args
from core.errors import ProbeError
from utils.log import setup_logging


def main(argv=None):
    """Main entry point for the application."""
    args = parse_args(argv)
    setup_logging("DEBUG" if args.verbose else None)

    try:
        return CommandRunner(args).run()
    except ProbeError as e:
        logging.getLogger(__name__).error("%s", e)
        return 2


if __name__ == "__main__":
    sys.exit(main())
