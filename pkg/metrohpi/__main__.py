#!/usr/bin/python3
# Copyright (C) 2026 The metrohpi authors
# This file is a part of metrohpi.
#
# This program is free software; you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation; either version 2 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program; if not, write to the Free Software
# Foundation, Inc., 51 Franklin Street, Fifth Floor, Boston, MA 02110-1301 USA

"""Command line interface."""

import argparse
import logging
import sys
from typing import List, Optional

from . import version_string
from .config import load_config
from .errors import ConfigError, DataError, NumericalError, StageError
from .pipeline import STAGES, run
from .synth import write_synth

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="metrohpi")
    parser.add_argument("--version", action="version", version=version_string)
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in STAGES + ("run", "synth"):
        sub = subparsers.add_parser(command)
        sub.add_argument("--config", required=True, help="Configuration file.")
        sub.add_argument("--out", help="Output directory.")
        sub.add_argument("--seed", type=int, help="Random seed.")
        sub.add_argument("--verbose", action="store_true")
        if command == "run":
            sub.add_argument(
                "--stage-only", choices=STAGES, help="Run only this stage."
            )
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    if args.verbose:
        logging.basicConfig(level=logging.DEBUG, format="%(message)s")
    else:
        logging.basicConfig(level=logging.INFO, format="%(message)s")
    try:
        config = load_config(args.config).with_overrides(args.out, args.seed)
        if args.command == "synth":
            written = write_synth(config, config.output_dir)
            logging.info("Synthetic data written; run with %s", written.output_dir)
        elif args.command == "run":
            run(config, [args.stage_only] if args.stage_only else STAGES)
        else:
            run(config, [args.command])
    except ConfigError as e:
        logging.error("Configuration error: %s", e)
        return EXIT_CONFIG
    except (DataError, StageError) as e:
        logging.error("%s", e)
        return EXIT_DATA
    except NumericalError as e:
        logging.error("Numerical failure: %s", e)
        return EXIT_NUMERICAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
