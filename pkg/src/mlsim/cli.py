"""Command-line entry point.

Two subcommands, one per scenario.  The CLI fixes the master seed,
drives the run loop, and owns all filesystem output: run.csv under the
output directory, optional exchange files, optional SVG charts.  Exit
codes: 0 success, 1 runtime failure (one-line diagnostic naming the
failing component), 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import MAX_SEED, parse_config
from .epidemic import EpidemicSimulation
from .errors import MlsimError
from .output import EPIDEMIC_COLUMNS, POLLUTION_COLUMNS, emit_svg_plots, write_csv
from .pollution import PollutionSimulation


def _add_common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", required=True, help="path to the JSON run config")
    sub.add_argument("--seed", type=int, default=None,
                     help="master seed (overrides the config)")
    sub.add_argument("--steps", type=int, default=None,
                     help="number of steps (overrides the config)")
    sub.add_argument("--workers", type=int, default=None,
                     help="worker count for parallel sub-models (overrides the config)")
    sub.add_argument("--out", default=None,
                     help="output directory (fallback: $MLSIM_OUT)")
    sub.add_argument("--plots", action="store_true",
                     help="also emit SVG charts next to run.csv")
    sub.add_argument("--exchange-files", action="store_true",
                     help="route micro/macro exchanges through JSON files")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlsim",
        description="Multilevel micro/macro simulation runner",
    )
    subs = parser.add_subparsers(dest="scenario", required=True)
    epidemic = subs.add_parser(
        "epidemic", help="multi-city epidemic with mobility and lockdown"
    )
    _add_common_flags(epidemic)
    pollution = subs.add_parser(
        "pollution", help="vehicle pollution on a patch grid with fleet transition"
    )
    _add_common_flags(pollution)
    pollution.add_argument(
        "--grid-dumps", type=int, default=None, metavar="N",
        help="dump the grid as grid_<step>.csv every N steps",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    out = args.out or os.environ.get("MLSIM_OUT")
    if not out:
        parser.error("no output directory: pass --out or set MLSIM_OUT")
    out_dir = Path(out)

    if args.seed is not None and not (0 <= args.seed <= MAX_SEED):
        parser.error(f"--seed must be in [0, {MAX_SEED}]")
    if args.steps is not None and args.steps < 1:
        parser.error("--steps must be >= 1")
    if args.workers is not None and args.workers < 1:
        parser.error("--workers must be >= 1")
    grid_dumps = getattr(args, "grid_dumps", None)
    if grid_dumps is not None and grid_dumps < 1:
        parser.error("--grid-dumps must be >= 1")

    try:
        config = parse_config(args.config)
    except FileNotFoundError as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return 1
    except MlsimError as exc:
        print(f"error [{exc.component}]: {exc}", file=sys.stderr)
        return 1

    if config.scenario != args.scenario:
        parser.error(
            f"config declares scenario {config.scenario!r} but the "
            f"{args.scenario!r} subcommand was used"
        )

    if args.seed is not None:
        config.master_seed = args.seed
    if args.steps is not None:
        config.steps = args.steps
    if args.workers is not None:
        config.worker_count = args.workers

    use_files = args.exchange_files or config.exchange_mode == "json_files"
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        exchange_dir = None
        if use_files:
            exchange_dir = out_dir / "exchange"
            exchange_dir.mkdir(exist_ok=True)

        if config.scenario == "epidemic":
            sim = EpidemicSimulation(config, exchange_dir=exchange_dir)
            columns = EPIDEMIC_COLUMNS
        else:
            dump_dir = None
            if grid_dumps is not None:
                dump_dir = out_dir / "grids"
                dump_dir.mkdir(exist_ok=True)
            sim = PollutionSimulation(
                config, exchange_dir=exchange_dir,
                grid_dump_dir=dump_dir, grid_dump_period=grid_dumps or 1,
            )
            columns = POLLUTION_COLUMNS
        rows = sim.run()
        csv_path = write_csv(rows, out_dir / "run.csv", columns)
        if args.plots:
            emit_svg_plots(csv_path, out_dir)
    except MlsimError as exc:
        print(f"error [{exc.component}]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error [io]: {exc}", file=sys.stderr)
        return 1

    print(f"wrote {csv_path} ({len(rows)} rows, seed {config.master_seed})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
