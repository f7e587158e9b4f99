"""Supervised finetuning on instruction->response pairs.

Consumes the pipeline's Alpaca-compatible export, trains a causal LM (a
built-in tiny preset from scratch, a previous artifact, or a Hugging Face
checkpoint when one is available locally), logs loss per step, and writes a
servable artifact directory.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import random
from dataclasses import dataclass
from pathlib import Path

import torch

from .data import load_alpaca, render_example
from .model import (
    ModelConfig,
    TinyGPT,
    apply_lora,
    merge_lora,
    parse_preset,
    trainable_parameters,
)
from .tokenizer import IGNORE_INDEX, ByteTokenizer

logger = logging.getLogger("commtuner.tune")

ARTIFACT_CONFIG = "config.json"
ARTIFACT_WEIGHTS = "weights.pt"
ARTIFACT_LOSS_LOG = "loss_log.csv"
ARTIFACT_MANIFEST = "job_manifest.json"


class TuneError(Exception):
    pass


@dataclass
class TuneJob:
    dataset: str
    base_model: str = "tiny"
    epochs: int = 3
    batch_size: int = 8
    learning_rate: float = 3e-3
    max_seq: int = 256
    seed: int = 0
    out_dir: str = "tuned"
    method: str = "auto"  # auto | full | lora
    lora_rank: int = 8

    def __post_init__(self):
        if self.epochs < 1:
            raise TuneError("epochs must be >= 1")
        if self.batch_size < 1:
            raise TuneError("batch_size must be >= 1")
        if self.method not in ("auto", "full", "lora"):
            raise TuneError(f"unknown method {self.method!r}")


@dataclass
class TuneResult:
    artifact_dir: Path
    step_losses: list[float]
    epoch_means: list[float]


def resolve_base(job: TuneJob) -> tuple[TinyGPT, ByteTokenizer, str]:
    """Preset name, previous artifact directory, or (lazily) a HF checkpoint."""
    preset = parse_preset(job.base_model)
    if preset is not None:
        preset.max_seq = max(preset.max_seq, job.max_seq)
        torch.manual_seed(job.seed)
        return TinyGPT(preset), ByteTokenizer(), "preset"
    base_path = Path(job.base_model)
    if (base_path / ARTIFACT_CONFIG).exists():
        model, tokenizer = load_artifact(base_path)
        return model, tokenizer, "artifact"
    raise TuneError(
        f"base model {job.base_model!r} is neither a tiny preset nor an artifact "
        "directory; desk-scale runs use presets like 'tiny' or 'tiny:4x128'"
    )


def load_artifact(path: str | Path) -> tuple[TinyGPT, ByteTokenizer]:
    path = Path(path)
    config = json.loads((path / ARTIFACT_CONFIG).read_text(encoding="utf-8"))
    model = TinyGPT(ModelConfig(**config["model"]))
    state = torch.load(path / ARTIFACT_WEIGHTS, map_location="cpu", weights_only=True)
    model.load_state_dict(state)
    return model, ByteTokenizer()


def _batches(examples: list[tuple[list[int], list[int]]], batch_size: int, rng: random.Random):
    order = list(range(len(examples)))
    rng.shuffle(order)
    for start in range(0, len(order), batch_size):
        chunk = [examples[i] for i in order[start : start + batch_size]]
        width = max(len(ids) for ids, _ in chunk)
        pad = ByteTokenizer.pad_id
        ids = torch.full((len(chunk), width), pad, dtype=torch.long)
        labels = torch.full((len(chunk), width), IGNORE_INDEX, dtype=torch.long)
        for row, (i_ids, i_labels) in enumerate(chunk):
            ids[row, : len(i_ids)] = torch.tensor(i_ids, dtype=torch.long)
            labels[row, : len(i_labels)] = torch.tensor(i_labels, dtype=torch.long)
        yield ids, labels


def tune(job: TuneJob) -> TuneResult:
    """Run supervised finetuning and export a servable artifact."""
    rows = load_alpaca(job.dataset)  # pre-flight: fails before any training
    model, tokenizer, source = resolve_base(job)

    method = job.method
    if method == "auto":
        method = "full" if source == "preset" else "lora"
    if method == "lora":
        wrapped = apply_lora(model, rank=job.lora_rank)
        logger.info("LoRA adapters on %d linear layers", wrapped)
    else:
        for p in model.parameters():
            p.requires_grad_(True)

    examples = [
        tokenizer.encode_example(prompt, completion, job.max_seq)
        for prompt, completion in (render_example(r) for r in rows)
    ]
    torch.manual_seed(job.seed)
    rng = random.Random(job.seed)
    optimizer = torch.optim.AdamW(trainable_parameters(model), lr=job.learning_rate)

    step_losses: list[float] = []
    epoch_means: list[float] = []
    log_rows: list[tuple[int, int, float]] = []
    step = 0
    model.train()
    for epoch in range(1, job.epochs + 1):
        epoch_losses = []
        for ids, labels in _batches(examples, job.batch_size, rng):
            optimizer.zero_grad()
            loss = model.loss(ids, labels)
            value = float(loss.item())
            if not math.isfinite(value):
                raise TuneError(
                    f"non-finite loss {value} at step {step} (epoch {epoch}); "
                    "lower the learning rate or check the dataset"
                )
            loss.backward()
            optimizer.step()
            step += 1
            step_losses.append(value)
            epoch_losses.append(value)
            log_rows.append((step, epoch, value))
        mean = sum(epoch_losses) / len(epoch_losses)
        epoch_means.append(mean)
        logger.info("epoch %d/%d mean loss %.4f", epoch, job.epochs, mean)

    if method == "lora":
        merge_lora(model)
    out = Path(job.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), out / ARTIFACT_WEIGHTS)
    (out / ARTIFACT_CONFIG).write_text(
        json.dumps(
            {"model": model.cfg.to_dict(), "tokenizer": "byte", "method": method},
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    with open(out / ARTIFACT_LOSS_LOG, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["step", "epoch", "loss"])
        writer.writerows(log_rows)
    (out / ARTIFACT_MANIFEST).write_text(
        json.dumps(
            {
                "dataset": str(job.dataset),
                "base_model": job.base_model,
                "epochs": job.epochs,
                "batch_size": job.batch_size,
                "learning_rate": job.learning_rate,
                "max_seq": job.max_seq,
                "seed": job.seed,
                "method": method,
                "n_examples": len(examples),
                "epoch_mean_loss": epoch_means,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    return TuneResult(artifact_dir=out, step_losses=step_losses, epoch_means=epoch_means)
