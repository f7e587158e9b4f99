"""Clients for text generation, embedding, and label scoring.

Real endpoints speak the OpenAI-compatible chat-completions wire protocol
(POST {base_url}/v1/chat/completions and /v1/embeddings, API key from the
COMMPROBE_API_KEY env var). The mock backend implements the same interface
in-process from a scripted table and is bit-deterministic given
(prompt, seed), which is what makes pipeline runs reproducible offline.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import httpx

logger = logging.getLogger("commprobe.backend")

API_KEY_ENV = "COMMPROBE_API_KEY"

EMOTION_LABELS = (
    "anger",
    "anticipation",
    "disgust",
    "fear",
    "joy",
    "love",
    "optimism",
    "pessimism",
    "sadness",
    "surprise",
    "trust",
)

DEFAULT_TEMPERATURE = 1.0
TWEET_MAX_TOKENS = 128
ANSWER_MAX_TOKENS = 16

_RETRY_STATUS = {429, 500, 502, 503, 504}
_AUTH_STATUS = {401, 403}


class BackendError(Exception):
    pass


class AuthenticationError(BackendError):
    pass


class TemplateError(BackendError):
    pass


# ---------------------------------------------------------------------------
# Prompt templates
# ---------------------------------------------------------------------------

_PLACEHOLDER_RE = re.compile(r"\{([^{}]+)\}")


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str

    @property
    def placeholders(self) -> tuple[str, ...]:
        return tuple(_PLACEHOLDER_RE.findall(self.body))


TEMPLATES: dict[str, PromptTemplate] = {
    t.name: t
    for t in (
        PromptTemplate(
            "finetuned_tweet",
            "You're part of the online community {community_name} now. "
            "What would you tweet about {topic}?",
        ),
        PromptTemplate(
            "vanilla_tweet",
            "You're part of the online community {community_name}, which focuses on "
            "{community description} now. What would you tweet about {topic}?",
        ),
        PromptTemplate(
            "classification",
            "From these communities: Pro Eating Disorder, Keto & Diet, Body Image, "
            "Anti Eating Disorder, Healthy lifestyle & Weight Loss, and Weight Loss "
            "Drugs; which community does this Tweet belong to? {Tweet}",
        ),
        PromptTemplate(
            "swed",
            "You're now part of the {community_name}. {question}. Respond to the "
            "following question only with the letter at the beginning of each option "
            "or with a number.",
        ),
        PromptTemplate(
            "profile",
            "Given this list of posts, summarize the main ideas in 1 sentence",
        ),
    )
}


def render(template: PromptTemplate | str, bindings: Mapping[str, str] | None = None) -> str:
    """Byte-exact placeholder substitution; unbound placeholders are errors."""
    if isinstance(template, str):
        try:
            template = TEMPLATES[template]
        except KeyError:
            raise TemplateError(f"unknown template {template!r}") from None
    bindings = bindings or {}

    def _sub(m: re.Match) -> str:
        name = m.group(1)
        if name not in bindings:
            raise TemplateError(f"unbound placeholder {{{name}}} in template {template.name!r}")
        return str(bindings[name])

    return _PLACEHOLDER_RE.sub(_sub, template.body)


# ---------------------------------------------------------------------------
# Requests / results
# ---------------------------------------------------------------------------


@dataclass
class GenerationRequest:
    prompt: str
    n_samples: int = 1
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = TWEET_MAX_TOKENS
    stop: Optional[tuple[str, ...]] = None
    seed: Optional[int] = None

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass
class GenerationResult:
    completions: list[Optional[str]]
    usage: dict
    backend_id: str
    errors: dict[int, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.errors

    @property
    def texts(self) -> list[str]:
        return [c for c in self.completions if c is not None]


@dataclass
class EmbeddingResult:
    vectors: list[Optional[list[float]]]
    backend_id: str
    errors: dict[int, str] = field(default_factory=dict)

    @property
    def dimension(self) -> Optional[int]:
        for v in self.vectors:
            if v is not None:
                return len(v)
        return None


# ---------------------------------------------------------------------------
# HTTP backend
# ---------------------------------------------------------------------------


class RateLimiter:
    """Token bucket; acquire() blocks until a request slot is available."""

    def __init__(self, requests_per_second: float, burst: int = 1):
        self.rate = float(requests_per_second)
        self.capacity = float(max(1, burst))
        self._tokens = self.capacity
        self._last = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            time.sleep(wait)


class HttpBackend:
    """OpenAI-compatible chat/completions and embeddings client.

    Transient failures (timeouts, 429, 5xx) are retried with exponential
    backoff up to `max_retries`; authentication failures abort immediately.
    """

    def __init__(
        self,
        base_url: str,
        model: str = "default",
        api_key: Optional[str] = None,
        timeout: float = 30.0,
        max_retries: int = 3,
        backoff_base: float = 0.25,
        backoff_cap: float = 8.0,
        requests_per_second: Optional[float] = None,
        backend_id: Optional[str] = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.backoff_cap = backoff_cap
        self.backend_id = backend_id or f"http:{self.base_url}"
        self._limiter = RateLimiter(requests_per_second) if requests_per_second else None
        self._client = httpx.Client(timeout=timeout)

    def close(self) -> None:
        self._client.close()

    def _post(self, path: str, payload: dict) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        url = self.base_url + path
        attempt = 0
        while True:
            if self._limiter is not None:
                self._limiter.acquire()
            try:
                resp = self._client.post(url, json=payload, headers=headers)
            except (httpx.TimeoutException, httpx.TransportError) as exc:
                if attempt >= self.max_retries:
                    raise BackendError(f"{url}: retry budget exhausted ({exc})") from exc
                self._backoff(attempt, str(exc))
                attempt += 1
                continue
            if resp.status_code in _AUTH_STATUS:
                raise AuthenticationError(f"{url}: authentication failed ({resp.status_code})")
            if resp.status_code in _RETRY_STATUS:
                if attempt >= self.max_retries:
                    raise BackendError(
                        f"{url}: retry budget exhausted (status {resp.status_code})"
                    )
                self._backoff(attempt, f"status {resp.status_code}")
                attempt += 1
                continue
            if resp.status_code != 200:
                raise BackendError(f"{url}: unexpected status {resp.status_code}")
            if attempt:
                logger.info("%s succeeded after %d retries", url, attempt)
            return resp.json()

    def _backoff(self, attempt: int, reason: str) -> None:
        delay = min(self.backoff_cap, self.backoff_base * (2**attempt))
        logger.warning("retry %d/%d after %s; sleeping %.2fs", attempt + 1, self.max_retries, reason, delay)
        time.sleep(delay)

    def generate(self, request: GenerationRequest) -> GenerationResult:
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "n": request.n_samples,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        if request.stop:
            payload["stop"] = list(request.stop)
        if request.seed is not None:
            payload["seed"] = request.seed
        data = self._post("/v1/chat/completions", payload)
        completions: list[Optional[str]] = [None] * request.n_samples
        errors: dict[int, str] = {}
        for choice in data.get("choices", []):
            idx = choice.get("index", 0)
            if 0 <= idx < request.n_samples:
                completions[idx] = choice.get("message", {}).get("content", "")
        for i, c in enumerate(completions):
            if c is None:
                errors[i] = "no completion returned for sample"
        return GenerationResult(
            completions=completions,
            usage=data.get("usage", {}),
            backend_id=self.backend_id,
            errors=errors,
        )

    def embed(self, texts: Sequence[str]) -> EmbeddingResult:
        payload = {"model": self.model, "input": list(texts)}
        data = self._post("/v1/embeddings", payload)
        vectors: list[Optional[list[float]]] = [None] * len(texts)
        errors: dict[int, str] = {}
        for item in data.get("data", []):
            idx = item.get("index", 0)
            if 0 <= idx < len(texts):
                vectors[idx] = [float(x) for x in item["embedding"]]
        for i, v in enumerate(vectors):
            if v is None:
                errors[i] = "no embedding returned"
        return EmbeddingResult(vectors=vectors, backend_id=self.backend_id, errors=errors)


# ---------------------------------------------------------------------------
# Mock backend
# ---------------------------------------------------------------------------


def _stable_hash(*parts: str) -> int:
    h = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
    return int.from_bytes(h[:8], "big")


_BACKREF_RE = re.compile(r"\\[0-9]|\\g<")


class MockBackend:
    """Deterministic in-process stand-in for a generation endpoint.

    The script maps prompt regexes (searched with DOTALL, first match wins)
    to either a list of completions cycled per sample index, or
    {"choices": [...], "mode": "uniform"} for a seeded uniform draw.
    Completions may reference regex capture groups (\\1, \\g<name>).
    Unscripted prompts get a stable hash-derived placeholder string.
    """

    def __init__(self, script: Mapping | None = None, seed: int = 0, backend_id: str = "mock", embed_dim: int = 8):
        self.seed = seed
        self.backend_id = backend_id
        self.embed_dim = embed_dim
        self._entries: list[tuple[re.Pattern, dict]] = []
        self.calls = 0
        for pattern, value in (script or {}).items():
            if isinstance(value, list):
                entry = {"mode": "cycle", "choices": [str(v) for v in value]}
            elif isinstance(value, dict):
                mode = value.get("mode", "cycle")
                if mode not in ("cycle", "uniform"):
                    raise BackendError(f"unknown mock mode {mode!r}")
                entry = {"mode": mode, "choices": [str(v) for v in value["choices"]]}
            else:
                raise BackendError("mock script values must be lists or objects")
            if not entry["choices"]:
                raise BackendError(f"mock entry for {pattern!r} has no completions")
            self._entries.append((re.compile(pattern, re.DOTALL), entry))

    def _complete(self, prompt: str, index: int) -> str:
        for pattern, entry in self._entries:
            m = pattern.search(prompt)
            if not m:
                continue
            choices = entry["choices"]
            if entry["mode"] == "uniform":
                pick = _stable_hash(str(self.seed), prompt, str(index)) % len(choices)
            else:
                pick = index % len(choices)
            text = choices[pick]
            if _BACKREF_RE.search(text):
                return m.expand(text)
            return text
        return f"mock:{_stable_hash(str(self.seed), prompt, str(index)):016x}"

    def generate(self, request: GenerationRequest) -> GenerationResult:
        self.calls += 1
        completions = [self._complete(request.prompt, i) for i in range(request.n_samples)]
        usage = {
            "prompt_tokens": len(request.prompt.split()),
            "completion_tokens": sum(len(c.split()) for c in completions),
        }
        return GenerationResult(completions=list(completions), usage=usage, backend_id=self.backend_id)

    def embed(self, texts: Sequence[str]) -> EmbeddingResult:
        vectors: list[Optional[list[float]]] = []
        errors: dict[int, str] = {}
        for i, text in enumerate(texts):
            if not text or not text.strip():
                vectors.append(None)
                errors[i] = "empty text"
                continue
            vec = [0.0] * self.embed_dim
            vec[_stable_hash(text) % self.embed_dim] = 1.0
            vectors.append(vec)
        return EmbeddingResult(vectors=vectors, backend_id=self.backend_id, errors=errors)


def load_mock_script(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Label scorers
# ---------------------------------------------------------------------------


class MockScorer:
    """Deterministic toxicity/emotion scorer.

    Entries are (regex, value) pairs; the first matching regex wins. A float
    value serves toxicity, a dict serves emotion. Unmatched texts fall back
    to stable hash-derived scores so distributions are reproducible.
    """

    def __init__(self, table: Sequence[tuple[str, object]] = (), seed: int = 0):
        self.seed = seed
        self._table = [(re.compile(p, re.DOTALL), v) for p, v in table]

    def _fallback_toxicity(self, text: str) -> float:
        return (_stable_hash("tox", str(self.seed), text) % 10**9) / (10**9 - 1)

    def _fallback_emotion(self, text: str) -> dict[str, float]:
        return {
            label: (_stable_hash("emo", label, str(self.seed), text) % 10**9) / (10**9 - 1)
            for label in EMOTION_LABELS
        }

    def score(self, texts: Sequence[str], label_space: str) -> list:
        out = []
        for text in texts:
            value = None
            for pattern, v in self._table:
                if pattern.search(text):
                    value = v
                    break
            if label_space == "toxicity":
                out.append(float(value) if value is not None else self._fallback_toxicity(text))
            else:
                if value is not None:
                    row = dict(value)  # type: ignore[arg-type]
                    full = {label: float(row.get(label, 0.0)) for label in EMOTION_LABELS}
                else:
                    full = self._fallback_emotion(text)
                out.append(full)
        return out


def score_labels(endpoint, texts: Sequence[str], label_space: str) -> list:
    """Score a batch; order-preserving. Validates the provider's ranges."""
    if label_space not in ("toxicity", "emotion"):
        raise BackendError(f"unknown label space {label_space!r}")
    if not texts:
        return []
    rows = endpoint.score(texts, label_space)
    if len(rows) != len(texts):
        raise BackendError("scorer returned wrong number of rows")
    if label_space == "toxicity":
        for v in rows:
            if not 0.0 <= float(v) <= 1.0:
                raise BackendError(f"toxicity score {v} outside [0, 1]")
        return [float(v) for v in rows]
    for row in rows:
        if set(row) != set(EMOTION_LABELS):
            raise BackendError("emotion scorer must cover exactly the 11 labels")
        for label, v in row.items():
            if not 0.0 <= float(v) <= 1.0:
                raise BackendError(f"emotion score {label}={v} outside [0, 1]")
    return rows


# ---------------------------------------------------------------------------
# Module-level ops
# ---------------------------------------------------------------------------


def generate(endpoint, request: GenerationRequest) -> GenerationResult:
    return endpoint.generate(request)


def embed(endpoint, texts: Sequence[str]) -> EmbeddingResult:
    if not texts:
        raise BackendError("embed requires a non-empty batch")
    result = endpoint.embed(texts)
    dims = {len(v) for v in result.vectors if v is not None}
    if len(dims) > 1:
        raise BackendError(f"dimension mismatch across batch: {sorted(dims)}")
    return result


def generate_batch(
    endpoint, requests: Sequence[GenerationRequest], concurrency: int = 4
) -> list[GenerationResult]:
    """Run requests with bounded concurrency; results keep request order."""
    results: list[Optional[GenerationResult]] = [None] * len(requests)
    if concurrency <= 1 or len(requests) <= 1:
        return [endpoint.generate(r) for r in requests]
    with ThreadPoolExecutor(max_workers=concurrency) as pool:
        futures = {pool.submit(endpoint.generate, r): i for i, r in enumerate(requests)}
        for fut, i in futures.items():
            results[i] = fut.result()
    return results  # type: ignore[return-value]


def profile_posts(
    endpoint, posts: Sequence[str], max_posts: int = 200, seed: int = 0
) -> str:
    """One-sentence community profile from a random sample of posts."""
    sample = list(posts)
    if len(sample) > max_posts:
        sample = random.Random(seed).sample(sample, max_posts)
    prompt = render("profile") + "\n" + "\n".join(f"- {p}" for p in sample)
    result = endpoint.generate(GenerationRequest(prompt=prompt, n_samples=1, temperature=0.0))
    if result.errors or not result.completions or result.completions[0] is None:
        raise BackendError("profile generation failed")
    return result.completions[0]
