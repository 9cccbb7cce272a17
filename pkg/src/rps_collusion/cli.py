"""Command line entry point: ``rps-collusion train`` and ``rps-collusion analyze``."""
from __future__ import annotations

import argparse
import logging
import sys

from .analysis import analyze_directory
from .config import ConfigError, apply_overrides, load_config, protocol_summary
from .harness import run_campaign
from .logs import LogFormatError


def _train_parser(sub) -> None:
    p = sub.add_parser("train", help="run a seeded training campaign")
    p.add_argument("--config", metavar="PATH", help="INI config file (flags override it)")
    p.add_argument("--mode", choices=["fair", "explicit", "implicit"])
    p.add_argument("--lr", metavar="LR[,LR...]", help="learning rate(s), comma separated")
    p.add_argument("--episodes", type=int)
    p.add_argument("--steps", type=int, help="steps per episode")
    p.add_argument("--runs", type=int, help="runs per learning rate")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--scale", choices=["desk", "paper"])
    p.add_argument("--fair-random", action="store_true", help="replace the fair agent with a random player")
    p.add_argument("--out", metavar="DIR", help="output directory for logs and manifest")
    p.add_argument("--workers", type=int, default=1, help="parallel runs (default 1)")
    p.add_argument("--dry-run", action="store_true", help="print the resolved protocol and exit")


def _analyze_parser(sub) -> None:
    p = sub.add_parser("analyze", help="stage report and plot data from step logs")
    p.add_argument("--input", required=True, metavar="DIR")
    p.add_argument("--report", metavar="PATH", help="stage report path (default DIR/stage_report.txt)")
    p.add_argument("--plot-data", metavar="DIR", help="plot CSV directory (default DIR/plot_data)")
    p.add_argument("--max-period", type=int, default=6)
    p.add_argument("--bucket", type=int, default=1, help="episodes per distribution bucket")
    p.add_argument("--shaped", action="store_true", help="use shaped instead of raw rewards")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rps-collusion", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _train_parser(sub)
    _analyze_parser(sub)
    return parser


def resolve_config(args):
    cfg = load_config(args.config, args.scale)
    experiment, mode = {}, {}
    if args.lr is not None:
        experiment["learning_rates"] = args.lr
    for flag, key in (("episodes", "episodes"), ("steps", "steps_per_episode"),
                      ("runs", "runs_per_lr"), ("seed", "base_seed")):
        value = getattr(args, flag)
        if value is not None:
            experiment[key] = str(value)
    if args.runs is not None:
        experiment["control_runs_per_lr"] = str(args.runs)
    if args.out is not None:
        experiment["output_dir"] = args.out
    if args.mode is not None:
        mode["kind"] = args.mode
    if args.fair_random:
        mode["fair_is_random"] = "true"
    return apply_overrides(cfg, experiment, mode, {})


def print_summary(cfg, stream) -> None:
    summary = protocol_summary(cfg)
    for key, value in summary.items():
        print(f"{key} = {value}", file=stream)
    print("", file=stream)
    cfg.to_parser().write(stream)


def cmd_train(args) -> int:
    try:
        cfg = resolve_config(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    if args.dry_run:
        print_summary(cfg, sys.stdout)
        return 0
    if args.out is None and args.config is None:
        print("error: --out is required (or output_dir in --config)", file=sys.stderr)
        return 2
    try:
        out = run_campaign(cfg, workers=max(1, args.workers))
    except PermissionError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    print(f"wrote {cfg.total_runs} run logs ({cfg.total_games} games) to {out}")
    return 0


def cmd_analyze(args) -> int:
    try:
        written = analyze_directory(args.input, args.report, args.plot_data, args.max_period,
                                    args.bucket, args.shaped)
    except (FileNotFoundError, LogFormatError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "train":
        return cmd_train(args)
    return cmd_analyze(args)


if __name__ == "__main__":
    sys.exit(main())
