"""Command-line entry point: ``streamgp run`` and ``streamgp scaling-study``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, load_config
from .results import emit_results
from .runner import run_experiment, run_scaling_study


def _alphas(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad alpha list {text!r}") from None
    if not values or any(v <= 0 for v in values):
        raise argparse.ArgumentTypeError("alphas must be positive")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="streamgp", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-batch progress")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("run", "replay the stream through all configured models"),
                            ("scaling-study", "SSGP pseudo-point count study")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--seed", type=int, help="override the field and observation seeds")
        p.add_argument("--output", type=Path, help="output directory")
        if name == "scaling-study":
            p.add_argument("--alphas", type=_alphas, default=(0.5, 1.0, 2.0, 4.0))
    return parser


def _resolve(args) -> tuple[ExperimentConfig, Path]:
    config = load_config(args.config)
    if args.seed is not None:
        config = config.replace(seed=args.seed, field_seed=args.seed)
    output = args.output or Path(config.output_path)
    return config, output


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config, output = _resolve(args)
        if args.command == "run":
            table = run_experiment(config)
            csv_path, _ = emit_results(table, output / "results.csv")
            print(csv_path)
        else:
            tables = run_scaling_study(config, args.alphas)
            for key, table in tables.items():
                stem = "gpr" if key == "GPR" else key.replace("=", "_")
                csv_path, _ = emit_results(table, output / f"scaling_{stem}.csv")
                print(csv_path)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
