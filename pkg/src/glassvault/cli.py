"""Command-line entry point.

    glassvault run <scenario.jsonl> [--mode protocol|ideal|both] [--out DIR]
                   [--seed N] [--no-figures]
    glassvault render <out-dir>

Exit codes: 0 success, 2 scenario validation error, 3 divergence in both
mode. Set GV_LOG=debug|info|warning for verbosity.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

from .driver import MODES, run_scenario
from .errors import GlassVaultError, ScenarioError
from .figures import render_figures
from .outputs import emit
from .scenario import load_scenario

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DIVERGENCE = 3

logger = logging.getLogger(__name__)


def _configure_logging() -> None:
    level_name = os.environ.get("GV_LOG", "warning").upper()
    level = getattr(logging, level_name, logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glassvault",
        description="Replay exposure-analytics scenarios over the enclave FE stack.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="replay a scenario and emit the transcript")
    run.add_argument("scenario", help="path to a scenario .jsonl file")
    run.add_argument("--mode", choices=MODES, default="protocol")
    run.add_argument("--out", default="out", help="output directory (default: ./out)")
    run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run.add_argument(
        "--no-figures", action="store_true", help="skip rendering PNG figures"
    )

    render = sub.add_parser("render", help="re-render figures for an existing run")
    render.add_argument("out_dir", help="directory holding the emitted transcript files")
    return parser


def cmd_run(args: argparse.Namespace) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    try:
        transcript = run_scenario(scenario, mode=args.mode)
    except GlassVaultError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    paths = emit(transcript, args.out, cells=scenario.params.cells)
    for path in paths:
        logger.info("wrote %s", path)
    if not args.no_figures:
        for path in render_figures(args.out):
            logger.info("wrote %s", path)
    if transcript.equivalence == "divergent":
        print(f"divergence: {transcript.divergence}", file=sys.stderr)
        return EXIT_DIVERGENCE
    if transcript.equivalence == "equivalent":
        print("equivalent")
    return EXIT_OK


def cmd_render(args: argparse.Namespace) -> int:
    written = render_figures(args.out_dir)
    for path in written:
        print(path)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "render":
        return cmd_render(args)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
