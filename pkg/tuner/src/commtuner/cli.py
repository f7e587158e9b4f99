"""commtuner CLI: `tune` a base model on an exported dataset, `serve` the
resulting artifact over the chat-completions protocol."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .data import DatasetError
from .tune import TuneError, TuneJob, tune

CACHE_ENV = "COMMTUNER_CACHE_DIR"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="commtuner")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("tune", help="supervised finetuning on an Alpaca-format dataset")
    t.add_argument("--dataset", required=True, help="Alpaca-compatible JSON export")
    t.add_argument("--base", default="tiny", help="base model: tiny, tiny:<L>x<D>, or artifact dir")
    t.add_argument("--epochs", type=int, default=3)
    t.add_argument("--batch-size", type=int, default=8)
    t.add_argument("--lr", type=float, default=3e-3)
    t.add_argument("--max-seq", type=int, default=256)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--method", choices=("auto", "full", "lora"), default="auto")
    t.add_argument("--lora-rank", type=int, default=8)
    t.add_argument("--out", default="tuned", help="artifact output directory")

    s = sub.add_parser("serve", help="serve an artifact over /v1/chat/completions")
    s.add_argument("--artifact", required=True)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8080)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    cache = os.environ.get(CACHE_ENV)
    if cache:
        os.environ.setdefault("HF_HOME", cache)
    if args.command == "tune":
        job = TuneJob(
            dataset=args.dataset,
            base_model=args.base,
            epochs=args.epochs,
            batch_size=args.batch_size,
            learning_rate=args.lr,
            max_seq=args.max_seq,
            seed=args.seed,
            out_dir=args.out,
            method=args.method,
            lora_rank=args.lora_rank,
        )
        try:
            result = tune(job)
        except (DatasetError, TuneError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        print(f"artifact written to {result.artifact_dir}")
        print("epoch mean loss:", ", ".join(f"{v:.4f}" for v in result.epoch_means))
        return 0
    if args.command == "serve":
        from .serve import serve

        serve(args.artifact, host=args.host, port=args.port)
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
