"""
cli.py
------
Command-line interface for the open-vocabulary segmentation pipeline.

Usage:
    wild-ovs <stage> --config path/to/config.json [--out DIR] [--seed N] [--verbose]

Stages: gen, features, uncertainty, train-ae, targets, train-field, query, eval.
Extra commands: ablate, style-vote, seg3d.

Exit codes: 0 success, 2 invalid config, 3 stage failure.
"""

import argparse
import os
import sys

from .ablation import VARIANTS, ablation_suite, write_ablation
from .config import ConfigError, load_config
from .pipeline import STAGES, StageError, run_pipeline, run_seg3d, run_style_vote

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wild-ovs",
        description="Open-vocabulary segmentation of synthetic in-the-wild scenes with a multi-appearance language field."
    )
    commands = parser.add_subparsers(dest="command", required=True)

    for name in STAGES + ("ablate", "style-vote", "seg3d"):
        sub = commands.add_parser(name, help=f"Run the pipeline through '{name}'" if name in STAGES else None)
        sub.add_argument('--config', required=True, help='Path to the pipeline config file')
        sub.add_argument('--out', default=None, help='Output directory (overrides the config)')
        sub.add_argument('--seed', type=int, default=None, help='Master seed (overrides the config)')
        sub.add_argument('--verbose', action='store_true', help='Enable detailed logging')
        if name == "ablate":
            sub.add_argument('--variants', default=None,
                             help=f"Comma-separated variants (default all): {', '.join(VARIANTS)}")
            sub.add_argument('--seeds', default=None, help='Comma-separated seeds to average over')
    return parser


def _int_list(text: str) -> list:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"Expected comma-separated integers, got '{text}'")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    try:
        cfg = load_config(args.config, seed=args.seed, out=args.out)
        variants = args.variants.split(",") if getattr(args, "variants", None) else None
        seeds = _int_list(args.seeds) if getattr(args, "seeds", None) else None
        if variants:
            unknown = set(variants) - set(VARIANTS)
            if unknown:
                raise ConfigError(f"Unknown ablation variants: {sorted(unknown)}")
    except (ConfigError, FileNotFoundError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command in STAGES:
            result = run_pipeline(cfg, until=args.command, verbose=args.verbose)
            if result.metrics is not None:
                print(f"mIoU {result.metrics.miou:.4f}  mPA {result.metrics.mpa:.4f}  mP {result.metrics.mp:.4f}")
        elif args.command == "ablate":
            rows = ablation_suite(cfg, variants, seeds, verbose=args.verbose)
            write_ablation(os.path.join(cfg.out, "ablation.csv"), rows)
            for r in rows:
                print(f"{r.variant:<22} mIoU {r.miou:.4f}  mPA {r.mpa:.4f}  mP {r.mp:.4f}")
        elif args.command == "style-vote":
            print(run_style_vote(cfg, verbose=args.verbose))
        elif args.command == "seg3d":
            masks = run_seg3d(cfg, verbose=args.verbose)
            for label, mask in masks.items():
                print(f"{label}: {int(mask.sum())} Gaussians")
    except (ConfigError, FileNotFoundError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as e:
        print(f"stage error: {e}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
