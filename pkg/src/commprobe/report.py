"""Report rendering: matplotlib figures plus delimited summaries of the
pipeline's metric and screening artifacts.

Figures are written as PNG with fixed dpi and no software metadata so a
rerun over identical artifacts is byte-identical.
"""

from __future__ import annotations

import csv
import json
import shutil
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .backend import EMOTION_LABELS

_SAVE_KWARGS = {"dpi": 120, "metadata": {"Software": None}}

TAG_COLORS = {"human": "#444444", "vanilla": "#1f77b4", "finetuned": "#d62728"}


def _slug(name: str) -> str:
    from .pipeline import slugify

    return slugify(name)


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)
    return path


def community_sizes_figure(communities_csv: Path, out_path: Path) -> Path:
    with open(communities_csv, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    labels = [r["community"] for r in rows]
    sizes = [int(r["size"]) for r in rows]
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.bar(range(len(sizes)), sizes, color="#1f77b4")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels)
    ax.set_xlabel("community id")
    ax.set_ylabel("users")
    ax.set_title("Largest detected communities")
    fig.tight_layout()
    return _save(fig, out_path)


def toxicity_figure(name: str, slices: dict, out_path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    for tag in ("human", "vanilla", "finetuned"):
        entry = slices.get(tag)
        if not entry or entry["retained"] == 0:
            continue
        edges = entry["bin_edges"]
        counts = entry["hist"]
        total = sum(counts)
        centers = [(lo + hi) / 2 for lo, hi in zip(edges[:-1], edges[1:])]
        ax.step(centers, [c / total for c in counts], where="mid", label=tag, color=TAG_COLORS[tag])
    ax.set_xlabel("toxicity score")
    ax.set_ylabel("fraction of retained posts")
    ax.set_title(f"Toxicity distribution: {name}")
    ax.legend()
    fig.tight_layout()
    return _save(fig, out_path)


def emotion_figure(name: str, slices: dict, out_path: Path) -> Path:
    labels = list(EMOTION_LABELS)
    x = range(len(labels))
    width = 0.27
    fig, ax = plt.subplots(figsize=(9, 4))
    for offset, tag in zip((-width, 0.0, width), ("human", "vanilla", "finetuned")):
        entry = slices.get(tag)
        freqs = entry.get("freqs") if entry else None
        if not freqs:
            continue
        ax.bar(
            [i + offset for i in x],
            [freqs[l] for l in labels],
            width=width,
            label=tag,
            color=TAG_COLORS[tag],
        )
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, rotation=45, ha="right")
    ax.set_ylabel("frequency")
    ax.set_title(f"Emotion distribution: {name}")
    ax.legend()
    fig.tight_layout()
    return _save(fig, out_path)


def fid_figure(metrics: dict, out_path: Path) -> Path:
    names = sorted(metrics)
    x = range(len(names))
    width = 0.38
    fig, ax = plt.subplots(figsize=(9, 4))
    for offset, key, tag in ((-width / 2, "fid_vanilla", "vanilla"), (width / 2, "fid_finetuned", "finetuned")):
        values = [metrics[n].get(key) or 0.0 for n in names]
        ax.bar([i + offset for i in x], values, width=width, label=tag, color=TAG_COLORS[tag])
    ax.set_xticks(list(x))
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_ylabel("Fréchet distance to human corpus")
    ax.set_title("Embedding-set distance by generation source")
    ax.legend()
    fig.tight_layout()
    return _save(fig, out_path)


def wcs_figure(screening: dict, out_path: Path) -> Path:
    rows = screening["communities"]
    names = [r["community"] for r in rows]
    values = [r["wcs"] if r["wcs"] is not None else 0.0 for r in rows]
    colors = ["#d62728" if r["complete"] else "#bbbbbb" for r in rows]
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.bar(range(len(names)), values, color=colors)
    for i, r in enumerate(rows):
        marks = "".join(
            c for c, flag in zip(("1", "2", "3"), (r["c1"], r["c2"], r["c3"])) if flag
        )
        label = f"C{marks}" if marks else ("incomplete" if not r["complete"] else "")
        if label:
            ax.text(i, values[i], label, ha="center", va="bottom", fontsize=8)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_ylabel("Weight Concerns Scale (0-100)")
    ax.set_title("Screening outcome per community")
    fig.tight_layout()
    return _save(fig, out_path)


def render_all(cfg) -> list[Path]:
    """Render every figure and table the report stage owns."""
    out = cfg.out_dir / "report"
    figures = out / "figures"
    tables = out / "tables"
    figures.mkdir(parents=True, exist_ok=True)
    tables.mkdir(parents=True, exist_ok=True)
    outputs: list[Path] = []

    outputs.append(
        community_sizes_figure(cfg.out_dir / "graph/communities.csv", figures / "community_sizes.png")
    )

    metrics = json.loads((cfg.out_dir / "metrics/metrics.json").read_text(encoding="utf-8"))
    communities = metrics["communities"]
    for name, entry in sorted(communities.items()):
        slug = _slug(name)
        outputs.append(toxicity_figure(name, entry["toxicity"], figures / f"toxicity_{slug}.png"))
        outputs.append(emotion_figure(name, entry["emotion"], figures / f"emotion_{slug}.png"))
    outputs.append(fid_figure(communities, figures / "fid.png"))

    screening = json.loads((cfg.out_dir / "screening/screening.json").read_text(encoding="utf-8"))
    outputs.append(wcs_figure(screening, figures / "wcs.png"))

    for rel in ("metrics/fid.csv", "metrics/accuracy.csv", "metrics/jsd.csv", "screening/screening.csv"):
        src = cfg.out_dir / rel
        if src.exists():
            dst = tables / Path(rel).name
            shutil.copyfile(src, dst)
            outputs.append(dst)

    summary = {
        "communities": {
            name: {
                "fid_vanilla": entry.get("fid_vanilla"),
                "fid_finetuned": entry.get("fid_finetuned"),
                "accuracy_vanilla": entry.get("accuracy_vanilla"),
                "accuracy_finetuned": entry.get("accuracy_finetuned"),
            }
            for name, entry in sorted(communities.items())
        },
        "overall": metrics.get("overall", {}),
        "screening": [
            {k: r[k] for k in ("community", "wcs", "c1", "c2", "c3", "complete")}
            for r in screening["communities"]
        ],
    }
    summary_path = out / "summary.json"
    summary_path.write_text(
        json.dumps(summary, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    outputs.append(summary_path)
    return outputs
