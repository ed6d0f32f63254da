"""Command-line experiment runner.

    manifold-loss run --config cfg.json [--preset cdc+epochR ...]
                      [--out DIR] [--seed N ...] [--jobs N] [--dump-images]
    manifold-loss analyze --in DIR [--no-figures]

The MANIFOLD_LOSS_SEED environment variable overrides the config seeds.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import runner
from .config import ConfigError, parse_config

SEED_ENV = "MANIFOLD_LOSS_SEED"


def build_parser():
    p = argparse.ArgumentParser(prog="manifold-loss",
                                description="random-weights loss-prior experiments")
    sub = p.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment or an ablation grid")
    run_p.add_argument("--config", required=True, help="JSON experiment config")
    run_p.add_argument("--preset", action="append", default=[],
                       help="configuration cell, a '+'-joined preset chain; repeatable")
    run_p.add_argument("--out", help="override output directory")
    run_p.add_argument("--seed", action="append", type=int, default=[],
                       help="override config seeds; repeatable")
    run_p.add_argument("--jobs", type=int, default=1,
                       help="worker processes for grid cells")
    run_p.add_argument("--dump-images", action="store_true",
                       help="write PGM dumps of clean/noisy/denoised samples")
    run_p.add_argument("--no-figures", action="store_true")

    an_p = sub.add_parser("analyze", help="rebuild the JSON summary from CSVs")
    an_p.add_argument("--in", dest="in_dir", required=True)
    an_p.add_argument("--no-figures", action="store_true")
    return p


def cmd_run(args) -> int:
    try:
        cfg = parse_config(Path(args.config).read_text())
    except (OSError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.out:
        cfg.output_dir = args.out
    if args.seed:
        cfg.seeds = args.seed
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None:
        cfg.seeds = [int(env_seed)]
    cells = args.preset or None
    try:
        summary, n_aborted = runner.run_experiment(
            cfg, cells=cells, jobs=args.jobs,
            dump_images=args.dump_images, figures=not args.no_figures,
        )
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(summary["cells"], indent=2))
    if n_aborted:
        print(f"{n_aborted} run(s) aborted", file=sys.stderr)
        return 1
    return 0


def cmd_analyze(args) -> int:
    summary = runner.analyze(args.in_dir, figures=not args.no_figures)
    print(json.dumps(summary["cells"], indent=2))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    return cmd_analyze(args)


if __name__ == "__main__":
    sys.exit(main())
