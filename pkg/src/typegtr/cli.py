"""Command-line entry point.

Commands follow the pipeline order: build-dataset, train-gen, train-sim,
infer, eval, ablate; demo runs the whole synthetic pipeline end to end.
Exit codes: 0 success, 1 missing prerequisites or runtime failure,
2 configuration errors.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .checkpoint import CheckpointError
from .config import ConfigError, RunConfig, apply_overrides, load_config
from .pipeline import (
    MissingPrerequisite,
    run_ablate,
    run_build_dataset,
    run_demo,
    run_eval,
    run_infer,
    run_train_gen,
    run_train_sim,
)

log = logging.getLogger(__name__)

COMMANDS = ("build-dataset", "train-gen", "train-sim", "infer", "eval", "ablate", "demo")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="typegtr",
        description="Generate-then-rank type inference for Python functions.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="path to a key = value config file")
    parser.add_argument("--seed", type=int, help="seed override (beats TIGER_SEED)")
    parser.add_argument("--beam-k", dest="beam_k", type=int, help="beam width")
    parser.add_argument("--epochs", type=int, help="training epochs")
    parser.add_argument("--lr", type=float, help="learning rate")
    parser.add_argument("--batch", type=int, help="batch size")
    parser.add_argument(
        "--mode",
        choices=("full", "generating-only", "ranking-only"),
        help="inference mode for infer/eval",
    )
    parser.add_argument("--workdir", help="working directory override")
    parser.add_argument("--quiet", action="store_true", help="warnings only")
    return parser


def dispatch(command: str, cfg: RunConfig) -> int:
    log.info("command=%s seed=%d config_hash=%s", command, cfg.seed, cfg.config_hash())
    try:
        if command == "build-dataset":
            run_build_dataset(cfg)
        elif command == "train-gen":
            run_train_gen(cfg)
        elif command == "train-sim":
            run_train_sim(cfg)
        elif command == "infer":
            run_infer(cfg)
        elif command == "eval":
            report = run_eval(cfg)
            print(report.format_table())
        elif command == "ablate":
            reports = run_ablate(cfg)
            for mode, report in reports.items():
                print(f"== mode: {mode}")
                print(report.format_table())
                print()
        elif command == "demo":
            report = run_demo(cfg)
            print(report.format_table())
        else:  # pragma: no cover - argparse restricts choices
            raise ValueError(command)
    except (MissingPrerequisite, CheckpointError) as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        cfg = apply_overrides(cfg, args)
        if args.workdir:
            import dataclasses

            cfg = dataclasses.replace(cfg, workdir=args.workdir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return dispatch(args.command, cfg)


if __name__ == "__main__":
    sys.exit(main())
