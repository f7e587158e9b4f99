"""Dataset contract: the Alpaca-compatible JSON export produced by the
pipeline's dataset stage. Every row is {instruction, input, output} with
string values; validation failures name the offending row and abort before
any training starts.
"""

from __future__ import annotations

import json
from pathlib import Path

REQUIRED_KEYS = ("instruction", "input", "output")


class DatasetError(Exception):
    pass


def load_alpaca(path: str | Path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset file not found: {path}")
    try:
        rows = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"dataset is not valid JSON: {exc}") from exc
    if not isinstance(rows, list) or not rows:
        raise DatasetError("dataset must be a non-empty JSON array")
    for i, row in enumerate(rows):
        if not isinstance(row, dict):
            raise DatasetError(f"row {i}: not an object")
        for key in REQUIRED_KEYS:
            if key not in row:
                raise DatasetError(f"row {i}: missing key {key!r}")
            if not isinstance(row[key], str):
                raise DatasetError(f"row {i}: {key!r} must be a string")
        extra = set(row) - set(REQUIRED_KEYS)
        if extra:
            raise DatasetError(f"row {i}: unexpected keys {sorted(extra)}")
        if not row["instruction"].strip():
            raise DatasetError(f"row {i}: empty instruction")
        if not row["output"].strip():
            raise DatasetError(f"row {i}: empty output")
    return rows


def render_example(row: dict) -> tuple[str, str]:
    """Prompt/completion pair for supervised finetuning."""
    prompt = row["instruction"]
    if row["input"]:
        prompt = f"{prompt}\n\n{row['input']}"
    return prompt, row["output"]
