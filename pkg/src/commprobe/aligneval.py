"""Alignment metrics between generated and human corpora.

Covers the four quantitative probes: Fréchet distance between Gaussian fits
of embedding sets, thresholded toxicity histograms, multi-label emotion
frequency distributions, and exact-match classification accuracy. Histogram
pairs are compared with Jensen-Shannon divergence in bits.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .backend import EMOTION_LABELS, score_labels
from .graph import GROUP_NAMES

FID_EPS = 1e-6
JSD_SMOOTHING = 1e-12
SOURCE_TAGS = ("human", "vanilla", "finetuned")

DEFAULT_TOXICITY_THRESHOLD = 0.05
DEFAULT_TOXICITY_BINS = 20
DEFAULT_EMOTION_DECISION = 0.5


class AlignEvalError(Exception):
    pass


@dataclass
class EmbeddingSet:
    """n x d matrix of text embeddings from one source."""

    vectors: np.ndarray
    source_tag: Optional[str] = None
    community: Optional[str] = None

    def __post_init__(self):
        self.vectors = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        if not np.isfinite(self.vectors).all():
            raise AlignEvalError("embedding set contains non-finite entries")
        if self.source_tag is not None and self.source_tag not in SOURCE_TAGS:
            raise AlignEvalError(f"unknown source tag {self.source_tag!r}")
        n, d = self.vectors.shape
        if n < d + 1:
            warnings.warn(
                f"embedding set has n={n} < d+1={d + 1}; covariance will rely on regularization",
                stacklevel=2,
            )

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class GaussianSummary:
    mean: np.ndarray
    cov: np.ndarray


def gaussian_summary(es: EmbeddingSet) -> GaussianSummary:
    """Sample mean and epsilon-regularized unbiased sample covariance."""
    if es.n < 2:
        raise AlignEvalError("need at least 2 vectors to estimate covariance")
    mean = es.vectors.mean(axis=0)
    cov = np.atleast_2d(np.cov(es.vectors, rowvar=False, ddof=1))
    cov = (cov + cov.T) / 2.0 + FID_EPS * np.eye(es.dim)
    lo = float(np.linalg.eigvalsh(cov).min())
    if lo < -1e-8:
        raise AlignEvalError(f"covariance has eigenvalue {lo} below tolerance")
    return GaussianSummary(mean=mean, cov=cov)


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def fid(a: EmbeddingSet, b: EmbeddingSet) -> float:
    """Fréchet distance between Gaussian fits of two embedding sets.

    ||mu_a - mu_b||^2 + Tr(C_a + C_b - 2 (C_a C_b)^{1/2}), the trace term
    computed from the symmetric product sqrt(C_a) C_b sqrt(C_a) with negative
    eigenvalues clamped to zero. Result is clamped to >= 0.
    """
    if a.dim != b.dim:
        raise AlignEvalError(f"dimension mismatch: {a.dim} vs {b.dim}")
    ga, gb = gaussian_summary(a), gaussian_summary(b)
    sqrt_a = _psd_sqrt(ga.cov)
    inner = sqrt_a @ gb.cov @ sqrt_a
    inner = (inner + inner.T) / 2.0
    vals = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    tr_sqrt = float(np.sqrt(vals).sum())
    diff = ga.mean - gb.mean
    value = float(diff @ diff + np.trace(ga.cov) + np.trace(gb.cov) - 2.0 * tr_sqrt)
    return max(value, 0.0)


def toxicity_distribution(
    texts_by_tag: Mapping[str, Sequence[str]],
    scorer,
    threshold: float = DEFAULT_TOXICITY_THRESHOLD,
    bins: int = DEFAULT_TOXICITY_BINS,
) -> dict[str, dict]:
    """Histogram of toxicity scores per source tag.

    Scores >= threshold (inclusive) are retained; the histogram spans [0, 1]
    with `bins` equal bins and its mass equals the retained count.
    """
    out: dict[str, dict] = {}
    for tag, texts in texts_by_tag.items():
        scores = score_labels(scorer, list(texts), "toxicity")
        retained = [s for s in scores if s >= threshold]
        counts, edges = np.histogram(retained, bins=bins, range=(0.0, 1.0))
        out[tag] = {
            "hist": [int(c) for c in counts],
            "bin_edges": [float(e) for e in edges],
            "retained": len(retained),
            "scored": len(scores),
        }
    return out


def emotion_distribution(
    texts_by_tag: Mapping[str, Sequence[str]],
    scorer,
    decision: float = DEFAULT_EMOTION_DECISION,
) -> dict[str, dict]:
    """Normalized frequency of expressed emotions per source tag.

    A text expresses label L when score_L >= decision (multi-label), and
    frequencies are normalized by the total number of label activations.
    A tag with no activations is flagged degenerate.
    """
    out: dict[str, dict] = {}
    for tag, texts in texts_by_tag.items():
        rows = score_labels(scorer, list(texts), "emotion")
        counts = {label: 0 for label in EMOTION_LABELS}
        for row in rows:
            for label in EMOTION_LABELS:
                if row[label] >= decision:
                    counts[label] += 1
        total = sum(counts.values())
        if total == 0:
            out[tag] = {"freqs": None, "degenerate": True, "n_texts": len(rows)}
        else:
            out[tag] = {
                "freqs": {label: counts[label] / total for label in EMOTION_LABELS},
                "degenerate": False,
                "n_texts": len(rows),
            }
    return out


@dataclass
class AccuracyReport:
    accuracy: float
    n: int
    unparseable: int
    confusion: dict[str, dict[str, int]] = field(default_factory=dict)


def _normalize_label(s: str) -> str:
    return " ".join(s.split()).casefold()


def classification_accuracy(
    predictions: Sequence[str],
    gold: Sequence[str],
    labels: Sequence[str] = GROUP_NAMES,
) -> AccuracyReport:
    """Exact-match accuracy after case/whitespace normalization.

    Predictions that do not normalize to any label count as wrong and are
    tallied separately; no fuzzy matching.
    """
    if not predictions or not gold:
        raise AlignEvalError("predictions and gold must be non-empty")
    if len(predictions) != len(gold):
        raise AlignEvalError("predictions and gold must have equal length")
    canon = {_normalize_label(l): l for l in labels}
    correct = 0
    unparseable = 0
    confusion: dict[str, dict[str, int]] = {}
    for pred, g in zip(predictions, gold):
        g_canon = canon.get(_normalize_label(g))
        if g_canon is None:
            raise AlignEvalError(f"gold label {g!r} outside the label space")
        p_canon = canon.get(_normalize_label(pred))
        cell = p_canon if p_canon is not None else "<unparseable>"
        if p_canon is None:
            unparseable += 1
        elif p_canon == g_canon:
            correct += 1
        confusion.setdefault(g_canon, {})
        confusion[g_canon][cell] = confusion[g_canon].get(cell, 0) + 1
    return AccuracyReport(
        accuracy=correct / len(gold),
        n=len(gold),
        unparseable=unparseable,
        confusion=confusion,
    )


def distribution_distance(pa: Sequence[float], pb: Sequence[float]) -> float:
    """Jensen-Shannon divergence in bits between two histograms.

    Histograms must share binning (same length). Zero bins are smoothed by
    1e-12 before renormalization. Ranges over [0, 1] bits.
    """
    a = np.asarray(pa, dtype=float)
    b = np.asarray(pb, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise AlignEvalError("histogram binning mismatch")
    if (a < 0).any() or (b < 0).any():
        raise AlignEvalError("histograms must be non-negative")
    if a.sum() == 0 or b.sum() == 0:
        raise AlignEvalError("cannot compare an empty histogram")

    def _prep(x: np.ndarray) -> np.ndarray:
        x = x / x.sum()
        x = np.where(x == 0.0, JSD_SMOOTHING, x)
        return x / x.sum()

    p, q = _prep(a), _prep(b)
    m = (p + q) / 2.0

    def _kl(x: np.ndarray, y: np.ndarray) -> float:
        return float(np.sum(x * np.log2(x / y)))

    return 0.5 * _kl(p, m) + 0.5 * _kl(q, m)
