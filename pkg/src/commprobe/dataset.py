"""Instruction-tuning dataset construction.

Per community: rank cleaned posts by perplexity (lower = more fluent), keep
the best up to a cap, pair each with a generation instruction from the
20-template pool, and optionally fold in the general-purpose Alpaca
demonstrations so a tuned model keeps instruction-following ability.
Also builds the community-classification train/test sets.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass
from importlib.resources import files
from pathlib import Path
from typing import Mapping, NamedTuple, Optional, Sequence

from .backend import render

logger = logging.getLogger("commprobe.dataset")

ORIGINS = ("tweet_gen", "classification", "alpaca_aug")

COMMUNITY_PLACEHOLDER = "{community_name}"

DEFAULT_QUALITY_CAP = 10_000
DEFAULT_PER_COMMUNITY = 3_000
DEFAULT_SPLIT = 0.95


class DatasetError(Exception):
    pass


class CleanedPost(NamedTuple):
    post_id: str
    text: str


@dataclass(frozen=True)
class Demonstration:
    """One instruction-response pair."""

    instruction: str
    response: str
    origin: str
    community: Optional[str] = None

    def __post_init__(self):
        if self.origin not in ORIGINS:
            raise DatasetError(f"unknown origin {self.origin!r}")
        if not self.instruction or not self.response:
            raise DatasetError("instruction and response must be non-empty")
        if self.origin in ("tweet_gen", "classification") and not self.community:
            raise DatasetError(f"{self.origin} demonstrations must carry a community")

    def to_record(self) -> dict:
        return {
            "instruction": self.instruction,
            "response": self.response,
            "origin": self.origin,
            "community": self.community,
        }


@dataclass(frozen=True)
class PerplexityScore:
    post_id: str
    score: float

    def __post_init__(self):
        if not math.isfinite(self.score) or self.score <= 0:
            raise DatasetError(f"perplexity for {self.post_id} must be finite and > 0")


class InstructionPool:
    """Ordered tweet-generation templates, each with the community placeholder."""

    def __init__(self, templates: Sequence[str]):
        if not templates:
            raise DatasetError("instruction pool is empty")
        for t in templates:
            if COMMUNITY_PLACEHOLDER not in t:
                raise DatasetError(f"template missing {COMMUNITY_PLACEHOLDER}: {t!r}")
        self.templates = tuple(templates)

    def __len__(self) -> int:
        return len(self.templates)

    @classmethod
    def default(cls) -> "InstructionPool":
        text = files("commprobe").joinpath("data/instructions.txt").read_text(encoding="utf-8")
        return cls.from_text(text)

    @classmethod
    def from_text(cls, text: str) -> "InstructionPool":
        lines = [l.strip() for l in text.splitlines()]
        return cls([l for l in lines if l and not l.startswith("#")])

    @classmethod
    def load(cls, path: str | Path) -> "InstructionPool":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


def load_score_file(path: str | Path) -> dict[str, float]:
    """JSON Lines {post_id, perplexity} -> mapping."""
    scores: dict[str, float] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            scores[rec["post_id"]] = PerplexityScore(rec["post_id"], float(rec["perplexity"])).score
    return scores


def mock_perplexities(posts: Sequence[CleanedPost], seed: int = 0) -> dict[str, float]:
    """Deterministic stand-in scorer for offline runs; scores in (1, 101)."""
    import hashlib

    out = {}
    for p in posts:
        h = int.from_bytes(
            hashlib.sha256(f"ppl:{seed}:{p.post_id}:{p.text}".encode()).digest()[:8], "big"
        )
        out[p.post_id] = 1.0 + 100.0 * (h % 10**9) / 10**9
    return out


def select_quality(
    posts: Sequence[CleanedPost],
    scores: Mapping[str, float],
    cap: int = DEFAULT_QUALITY_CAP,
) -> list[CleanedPost]:
    """Keep the `cap` lowest-perplexity posts (all of them when fewer).

    Ties break by post_id ascending. Every candidate must have a score.
    """
    if cap < 1:
        raise DatasetError("cap must be >= 1")
    for p in posts:
        if p.post_id not in scores:
            raise DatasetError(f"missing perplexity score for post {p.post_id}")
    ranked = sorted(posts, key=lambda p: (scores[p.post_id], p.post_id))
    return ranked[: min(cap, len(ranked))]


def pair_instructions(
    posts: Sequence[CleanedPost],
    pool: InstructionPool,
    community: str,
    seed: int = 0,
) -> list[Demonstration]:
    """Pair each post with a uniformly drawn template (with replacement)."""
    rng = random.Random(seed)
    demos = []
    for p in posts:
        template = rng.choice(pool.templates)
        demos.append(
            Demonstration(
                instruction=template.replace(COMMUNITY_PLACEHOLDER, community),
                response=p.text,
                origin="tweet_gen",
                community=community,
            )
        )
    return demos


def _load_alpaca_records(path: str | Path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"alpaca file not found: {path}")
    try:
        if path.suffix == ".jsonl":
            records = [json.loads(l) for l in path.read_text(encoding="utf-8").splitlines() if l.strip()]
        else:
            records = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"alpaca file is not valid JSON: {exc}") from exc
    if not isinstance(records, list):
        raise DatasetError("alpaca file must contain a list of records")
    return records


def augment_alpaca(
    demos: Sequence[Demonstration], alpaca_path: str | Path, seed: int = 0
) -> list[Demonstration]:
    """Concatenate community demos with the Alpaca records and shuffle.

    Records with a non-empty `input` fold it into the instruction separated
    by a blank line.
    """
    combined = list(demos)
    for i, rec in enumerate(_load_alpaca_records(alpaca_path)):
        if not isinstance(rec, dict):
            raise DatasetError(f"alpaca record {i} is not an object")
        instruction = rec.get("instruction")
        response = rec.get("output", rec.get("response"))
        if not instruction or not response:
            raise DatasetError(f"alpaca record {i} lacks instruction/output")
        extra = rec.get("input", "")
        if extra:
            instruction = f"{instruction}\n\n{extra}"
        combined.append(
            Demonstration(instruction=instruction, response=response, origin="alpaca_aug")
        )
    random.Random(seed).shuffle(combined)
    return combined


def build_classification_set(
    stores: Mapping[str, Sequence[CleanedPost]],
    per_community: int = DEFAULT_PER_COMMUNITY,
    split: float = DEFAULT_SPLIT,
    seed: int = 0,
) -> tuple[list[Demonstration], list[Demonstration]]:
    """Sample posts per community into which-community-is-this demonstrations
    and split them stratified per community.
    """
    if not 0.0 < split < 1.0:
        raise DatasetError("split must be inside (0, 1)")
    rng = random.Random(seed)
    train: list[Demonstration] = []
    test: list[Demonstration] = []
    for community, posts in stores.items():
        posts = list(posts)
        if len(posts) >= per_community:
            chosen = rng.sample(posts, per_community)
        else:
            logger.warning(
                "community %r has only %d cleaned posts (< %d); keeping all",
                community,
                len(posts),
                per_community,
            )
            chosen = list(posts)
        demos = [
            Demonstration(
                instruction=render("classification", {"Tweet": p.text}),
                response=community,
                origin="classification",
                community=community,
            )
            for p in chosen
        ]
        rng.shuffle(demos)
        n_train = int(round(len(demos) * split))
        train.extend(demos[:n_train])
        test.extend(demos[n_train:])
    rng.shuffle(train)
    rng.shuffle(test)
    return train, test


def write_demonstrations_jsonl(demos: Sequence[Demonstration], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for d in demos:
            f.write(json.dumps(d.to_record(), sort_keys=True, ensure_ascii=False))
            f.write("\n")


def load_demonstrations_jsonl(path: str | Path) -> list[Demonstration]:
    demos = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                rec = json.loads(line)
                demos.append(
                    Demonstration(
                        instruction=rec["instruction"],
                        response=rec["response"],
                        origin=rec["origin"],
                        community=rec.get("community"),
                    )
                )
    return demos


def write_alpaca_json(demos: Sequence[Demonstration], path: str | Path) -> None:
    """Alpaca-compatible export for the tuner: {instruction, input, output},
    `input` always the empty string (any original input is already folded).
    """
    rows = [
        {"instruction": d.instruction, "input": "", "output": d.response} for d in demos
    ]
    with open(path, "w", encoding="utf-8") as f:
        json.dump(rows, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")
