"""Command-line experiment runner.

Usage::

    qntklab <kind> --config cfg.json [--seed N] [--out DIR] [--threads K]

where <kind> is one of qntk-stats, train, train-supervised, eigen-scan,
haar-check, decay-fit.  Exit codes: 0 success, 1 config validation error,
2 a haar-check identity fell outside its band, 3 every training trial
diverged.
"""

from __future__ import annotations

import argparse
import sys

from .experiments import (
    EXIT_CONFIG,
    KINDS,
    ConfigError,
    load_config,
    run_experiment,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qntklab", description="Seeded kernel/training experiments with CSV/JSON outputs."
    )
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        p.add_argument("--config", required=True, help="path to the JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="override the config's master seed")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--threads", type=int, default=None, help="worker count (overrides config)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, kind=args.kind)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("config key 'seed': must be >= 0")
            cfg["seed"] = args.seed
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("config key 'threads': must be a positive integer")
            cfg["threads"] = args.threads
        out_dir = args.out or cfg.get("out")
        if out_dir is None:
            raise ConfigError("config key 'out': provide it in the config or pass --out")
        return run_experiment(cfg, out_dir)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entry():  # console-script shim
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
