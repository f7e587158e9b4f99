"""Run configuration: one TOML file, env-var overrides, CLI flag overrides.

Sections: [paths], [backend.<role>], [perplexity], [sampling], [thresholds],
[dataset], [run]. Roles are generator_vanilla, generator_finetuned,
classifier, embedder, scorer; each is either an HTTP endpoint (base_url) or
a mock (script path / hash fallback). Env vars of the form
COMMPROBE_<SECTION>__<KEY> override file values (e.g. COMMPROBE_RUN__SEED=7).
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from importlib.resources import files
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .backend import HttpBackend, MockBackend, MockScorer, load_mock_script

ENV_PREFIX = "COMMPROBE_"

BACKEND_ROLES = (
    "generator_vanilla",
    "generator_finetuned",
    "classifier",
    "embedder",
    "scorer",
    "profiler",
)


class ConfigError(Exception):
    """Carries every validation problem found, not just the first."""

    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {e}" for e in errors))


@dataclass
class BackendConfig:
    kind: str = "mock"  # mock | http
    script: Optional[str] = None
    base_url: Optional[str] = None
    model: str = "default"
    seed: Optional[int] = None
    requests_per_second: Optional[float] = None
    max_retries: int = 3
    timeout: float = 30.0
    embed_dim: int = 8
    community_urls: dict = field(default_factory=dict)


@dataclass
class RunConfig:
    # paths
    corpus: Optional[str] = None
    keywords: Optional[str] = None
    alpaca: Optional[str] = None
    questionnaire: Optional[str] = None
    grouping: Optional[str] = None
    topics: Optional[str] = None
    out: str = "out"
    # backends
    backends: dict[str, BackendConfig] = field(default_factory=dict)
    # perplexity provider
    perplexity_provider: str = "mock"  # mock | file
    perplexity_path: Optional[str] = None
    # sampling
    tweets_per_topic: int = 400
    swed_samples: int = 50
    temperature: float = 1.0
    profile_sample: int = 200
    concurrency: int = 4
    eval_max_texts: int = 5000
    # thresholds
    toxicity_threshold: float = 0.05
    emotion_decision: float = 0.5
    quality_cap: int = 10_000
    min_valid_fraction: float = 0.5
    # dataset
    per_community: int = 3_000
    split: float = 0.95
    # run
    seed: int = 0
    anonymize_secret: Optional[str] = None
    binary_edges: bool = False
    top_k: int = 20

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    def secret(self) -> str:
        # derived from the seed by default so reruns are byte-identical
        return self.anonymize_secret or f"commprobe:{self.seed}"

    def keywords_path(self) -> Path:
        if self.keywords:
            return Path(self.keywords)
        return Path(str(files("commprobe").joinpath("data/keywords.txt")))

    def topics_path(self) -> Path:
        if self.topics:
            return Path(self.topics)
        return Path(str(files("commprobe").joinpath("data/topics.txt")))

    def grouping_path(self) -> Path:
        if self.grouping:
            return Path(self.grouping)
        return Path(str(files("commprobe").joinpath("data/grouping.json")))

    def snapshot(self) -> dict:
        """Flat JSON-safe dump used in stage manifests."""
        snap = {
            k: v
            for k, v in self.__dict__.items()
            if k != "backends"
        }
        snap["backends"] = {
            role: {k: v for k, v in cfg.__dict__.items()} for role, cfg in self.backends.items()
        }
        return snap


def _apply_env_overrides(data: dict) -> dict:
    for key, value in os.environ.items():
        if not key.startswith(ENV_PREFIX) or "__" not in key:
            continue
        section, _, name = key[len(ENV_PREFIX):].partition("__")
        section, name = section.lower(), name.lower()
        try:
            parsed = tomllib.loads(f"v = {value}")["v"]
        except tomllib.TOMLDecodeError:
            parsed = value
        data.setdefault(section, {})[name] = parsed
    return data


def _get(data: dict, section: str, key: str, default):
    return data.get(section, {}).get(key, default)


def load_config(
    path: str | Path | None = None,
    seed: Optional[int] = None,
    out: Optional[str] = None,
    binary_edges: Optional[bool] = None,
) -> RunConfig:
    """Parse, override, and validate the run configuration.

    Relative paths inside the file resolve against the file's directory.
    """
    data: dict = {}
    base = Path.cwd()
    if path is not None:
        with open(path, "rb") as f:
            data = tomllib.load(f)
        base = Path(path).resolve().parent
    data = _apply_env_overrides(data)

    def _resolve(p) -> str:
        p = Path(str(p))
        return str(p if p.is_absolute() else base / p)

    cfg = RunConfig()
    paths = data.get("paths", {})
    for name in ("corpus", "keywords", "alpaca", "questionnaire", "grouping", "topics"):
        if name in paths:
            setattr(cfg, name, _resolve(paths[name]))
    if "out" in paths:
        cfg.out = _resolve(paths["out"])

    for role, raw in data.get("backend", {}).items():
        bc = BackendConfig()
        for key in (
            "kind",
            "script",
            "base_url",
            "model",
            "seed",
            "requests_per_second",
            "max_retries",
            "timeout",
            "embed_dim",
        ):
            if key in raw:
                setattr(bc, key, raw[key])
        if bc.script is not None:
            bc.script = _resolve(bc.script)
        bc.community_urls = dict(raw.get("communities", {}))
        cfg.backends[role] = bc

    cfg.perplexity_provider = _get(data, "perplexity", "provider", cfg.perplexity_provider)
    p = _get(data, "perplexity", "path", None)
    cfg.perplexity_path = _resolve(p) if p is not None else None

    cfg.tweets_per_topic = int(_get(data, "sampling", "tweets_per_topic", cfg.tweets_per_topic))
    cfg.swed_samples = int(_get(data, "sampling", "swed_samples", cfg.swed_samples))
    cfg.temperature = float(_get(data, "sampling", "temperature", cfg.temperature))
    cfg.profile_sample = int(_get(data, "sampling", "profile_sample", cfg.profile_sample))
    cfg.concurrency = int(_get(data, "sampling", "concurrency", cfg.concurrency))
    cfg.eval_max_texts = int(_get(data, "sampling", "eval_max_texts", cfg.eval_max_texts))

    cfg.toxicity_threshold = float(_get(data, "thresholds", "toxicity", cfg.toxicity_threshold))
    cfg.emotion_decision = float(_get(data, "thresholds", "emotion_decision", cfg.emotion_decision))
    cfg.quality_cap = int(_get(data, "thresholds", "quality_cap", cfg.quality_cap))
    cfg.min_valid_fraction = float(
        _get(data, "thresholds", "min_valid_fraction", cfg.min_valid_fraction)
    )

    cfg.per_community = int(_get(data, "dataset", "per_community", cfg.per_community))
    cfg.split = float(_get(data, "dataset", "split", cfg.split))

    cfg.seed = int(_get(data, "run", "seed", cfg.seed))
    secret = _get(data, "run", "anonymize_secret", None)
    cfg.anonymize_secret = str(secret) if secret else None
    cfg.binary_edges = bool(_get(data, "run", "binary_edges", cfg.binary_edges))
    cfg.top_k = int(_get(data, "run", "top_k", cfg.top_k))

    if seed is not None:
        cfg.seed = seed
    if out is not None:
        cfg.out = out
    if binary_edges is not None:
        cfg.binary_edges = binary_edges

    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    """Check paths and numeric ranges; reports every problem at once."""
    errors: list[str] = []
    for name in ("corpus", "keywords", "alpaca", "questionnaire", "grouping", "topics"):
        value = getattr(cfg, name)
        if value is not None and not Path(value).exists():
            errors.append(f"paths.{name}: file not found: {value}")
    for role, bc in cfg.backends.items():
        if role not in BACKEND_ROLES:
            errors.append(f"backend.{role}: unknown role (expected one of {BACKEND_ROLES})")
        if bc.kind not in ("mock", "http"):
            errors.append(f"backend.{role}.kind must be 'mock' or 'http'")
        if bc.kind == "http" and not bc.base_url:
            errors.append(f"backend.{role}: http backend needs base_url")
        if bc.script is not None and not Path(bc.script).exists():
            errors.append(f"backend.{role}.script: file not found: {bc.script}")
    if cfg.perplexity_provider not in ("mock", "file"):
        errors.append("perplexity.provider must be 'mock' or 'file'")
    if cfg.perplexity_provider == "file":
        if not cfg.perplexity_path:
            errors.append("perplexity.path required when provider = 'file'")
        elif not Path(cfg.perplexity_path).exists():
            errors.append(f"perplexity.path: file not found: {cfg.perplexity_path}")
    if cfg.tweets_per_topic < 1:
        errors.append("sampling.tweets_per_topic must be >= 1")
    if cfg.swed_samples < 1:
        errors.append("sampling.swed_samples must be >= 1")
    if not 0.0 <= cfg.temperature <= 2.0:
        errors.append("sampling.temperature must be in [0, 2]")
    if cfg.concurrency < 1:
        errors.append("sampling.concurrency must be >= 1")
    if cfg.eval_max_texts < 2:
        errors.append("sampling.eval_max_texts must be >= 2")
    if not 0.0 <= cfg.toxicity_threshold <= 1.0:
        errors.append("thresholds.toxicity must be in [0, 1]")
    if not 0.0 < cfg.emotion_decision <= 1.0:
        errors.append("thresholds.emotion_decision must be in (0, 1]")
    if cfg.quality_cap < 1:
        errors.append("thresholds.quality_cap must be >= 1")
    if not 0.0 <= cfg.min_valid_fraction <= 1.0:
        errors.append("thresholds.min_valid_fraction must be in [0, 1]")
    if cfg.per_community < 1:
        errors.append("dataset.per_community must be >= 1")
    if not 0.0 < cfg.split < 1.0:
        errors.append("dataset.split must be inside (0, 1)")
    if cfg.top_k < 1:
        errors.append("run.top_k must be >= 1")
    if errors:
        raise ConfigError(errors)


def make_backend(cfg: RunConfig, role: str, community_slug: Optional[str] = None):
    """Instantiate the configured backend for a role (mock when unset)."""
    bc = cfg.backends.get(role, BackendConfig())
    seed = bc.seed if bc.seed is not None else cfg.seed
    if bc.kind == "http":
        base_url = bc.community_urls.get(community_slug, bc.base_url) if community_slug else bc.base_url
        return HttpBackend(
            base_url=base_url,
            model=bc.model,
            max_retries=bc.max_retries,
            timeout=bc.timeout,
            requests_per_second=bc.requests_per_second,
            backend_id=f"{role}:{base_url}",
        )
    script = load_mock_script(bc.script) if bc.script else None
    return MockBackend(script=script, seed=seed, backend_id=f"mock:{role}", embed_dim=bc.embed_dim)


def make_scorer(cfg: RunConfig) -> MockScorer:
    bc = cfg.backends.get("scorer", BackendConfig())
    seed = bc.seed if bc.seed is not None else cfg.seed
    table: list = []
    if bc.script:
        raw = load_mock_script(bc.script)
        table = [(pattern, value) for pattern, value in raw.items()]
    return MockScorer(table=table, seed=seed)
