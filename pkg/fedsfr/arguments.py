# SPDX-License-Identifier: Apache-2.0

"""Argument parsing module"""

import argparse
from typing import Any

from fedsfr.checks import SUITES

SWEEP_AXES = ("eta_s0", "split", "algorithm", "seed")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "-v",
        "--verbose",
        action="store_true",
        dest="verbosity",
        help="increase verbosity",
    )

    parser.add_argument(
        "-c",
        "--config",
        action="store",
        dest="config",
        help="path to the run config (YAML)",
        type=str,
        default=None,
    )

    parser.add_argument(
        "-s",
        "--seed",
        action="store",
        dest="seed",
        help="override the run seed",
        type=int,
        default=None,
    )

    parser.add_argument(
        "-o",
        "--out",
        action="store",
        dest="out",
        help="override the output directory",
        type=str,
        default=None,
    )

    parser.add_argument(
        "-t",
        "--threads",
        action="store",
        dest="threads",
        help="cap the number of client worker threads (results do not depend on it)",
        type=int,
        default=None,
    )


def parse_args(args: Any) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        description="Simulates federated learning with semantic feature reconstruction",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="train once and write metrics, checkpoint and resolved config")
    _add_common(run)

    sweep = commands.add_parser("sweep", help="train once per setting along one axis")
    _add_common(sweep)
    sweep.add_argument(
        "-a",
        "--axis",
        action="store",
        dest="axis",
        help="sweep axis",
        choices=SWEEP_AXES,
        type=str,
        required=True,
    )

    check = commands.add_parser("check", help="run the oracle suites")
    _add_common(check)
    check.add_argument(
        "--only",
        action="append",
        dest="only",
        help="run only the named suite (repeatable)",
        choices=sorted(SUITES),
        type=str,
        default=None,
    )
    return parser.parse_args(args)
