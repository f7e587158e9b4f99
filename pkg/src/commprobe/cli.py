"""Command-line entry point.

Subcommands mirror the pipeline stages (ingest, detect, profile,
build-dataset, generate, eval-align, screen, report) plus `all`, which runs
them in order. Every subcommand takes --config/--seed/--out.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .aligneval import AlignEvalError
from .backend import BackendError
from .config import ConfigError, load_config
from .corpus import CorpusError
from .dataset import DatasetError
from .graph import GraphError
from .pipeline import STAGE_ORDER, StageError, run_all, run_stage
from .screener import ScreenerError

_DOMAIN_ERRORS = (
    StageError,
    CorpusError,
    GraphError,
    DatasetError,
    BackendError,
    AlignEvalError,
    ScreenerError,
)

SUBCOMMANDS = STAGE_ORDER + ("all",)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="commprobe",
        description="Community detection, community-aligned LLM probing, and risk screening.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the {name} stage" if name != "all" else "run every stage")
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        p.add_argument("--out", default=None, help="override paths.out")
        p.add_argument(
            "--binary-edges",
            action="store_true",
            default=None,
            help="unweighted retweet edges (parity experiments)",
        )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(
            args.config, seed=args.seed, out=args.out, binary_edges=args.binary_edges
        )
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "all":
            return run_all(cfg)
        return run_stage(cfg, args.command)
    except _DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
