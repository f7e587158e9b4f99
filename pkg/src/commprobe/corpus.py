"""Corpus ingestion: read raw post records, anonymize authors, filter by
keywords, and normalize into an immutable post store.

Input is JSON Lines (optionally gzipped), one post object per line. Authors
are replaced by keyed-hash pseudonyms so no raw platform handle survives
ingestion. Records are kept only when their text or hashtags contain at
least one query term (token-level match on lowercased text).
"""

from __future__ import annotations

import gzip
import hashlib
import hmac
import json
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator, Optional

PSEUDONYM_RE = re.compile(r"^u[0-9a-f]{16}$")

_TOKEN_RE = re.compile(r"\w+")
_URL_RE = re.compile(r"(?:https?://|www\.)\S+")
_MENTION_RE = re.compile(r"@\w+")
_HASHTAG_RE = re.compile(r"#\w+")
# Pictographic blocks: emoticons, symbols, transport, supplemental symbols,
# flags, dingbats, misc symbols, plus variation selectors and ZWJ.
_EMOJI_RE = re.compile(
    "["
    "\U0001F000-\U0001FAFF"
    "\U00002600-\U000027BF"
    "\U0001F1E6-\U0001F1FF"
    "\U00002B00-\U00002BFF"
    "\U0000FE0E\U0000FE0F\U0000200D"
    "\U00002700-\U000027FF"
    "]+"
)


class CorpusError(Exception):
    """Raised for unrecoverable corpus-level failures (e.g. pseudonym collision)."""


@dataclass(frozen=True)
class Post:
    """One social-media message after anonymization."""

    post_id: str
    author_id: str
    text: str
    created_at: datetime
    is_retweet: bool = False
    is_reply: bool = False
    retweeted_author_id: Optional[str] = None
    hashtags: tuple[str, ...] = ()
    lang: Optional[str] = None

    def __post_init__(self):
        if self.is_retweet != (self.retweeted_author_id is not None):
            raise ValueError("is_retweet must mirror retweeted_author_id presence")
        if not PSEUDONYM_RE.match(self.author_id):
            raise ValueError(f"author_id {self.author_id!r} is not a pseudonym")
        if self.retweeted_author_id is not None and not PSEUDONYM_RE.match(
            self.retweeted_author_id
        ):
            raise ValueError("retweeted_author_id is not a pseudonym")
        if not self.text.strip():
            raise ValueError("post text is empty")

    def to_record(self) -> dict:
        return {
            "post_id": self.post_id,
            "author_id": self.author_id,
            "retweeted_author_id": self.retweeted_author_id,
            "text": self.text,
            "created_at": self.created_at.isoformat(),
            "is_retweet": self.is_retweet,
            "is_reply": self.is_reply,
            "hashtags": list(self.hashtags),
            "lang": self.lang,
        }


@dataclass(frozen=True)
class KeywordSet:
    """Lowercased query terms used to filter the corpus."""

    terms: frozenset[str]

    def __post_init__(self):
        if not self.terms:
            raise ValueError("keyword set is empty")
        for t in self.terms:
            if not t or t != t.strip() or t != t.lower():
                raise ValueError(f"keyword {t!r} must be lowercase with no surrounding whitespace")

    def matches(self, text: str, hashtags: Iterable[str]) -> bool:
        tokens = set(_TOKEN_RE.findall(text.lower()))
        if tokens & self.terms:
            return True
        return any(h.lower() in self.terms for h in hashtags)


def load_keywords(path: str | Path) -> KeywordSet:
    """Read one term per line; '#'-prefixed comment lines are ignored."""
    terms = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            terms.add(line.lower())
    return KeywordSet(frozenset(terms))


class Pseudonymizer:
    """Maps raw author ids to stable `u<hex16>` pseudonyms via keyed hash.

    Injective on observed authors: a digest collision between two distinct
    raw ids aborts the run rather than silently merging users.
    """

    def __init__(self, secret: str):
        self._key = secret.encode("utf-8")
        self._seen: dict[str, str] = {}
        self._owners: dict[str, str] = {}

    def _digest(self, raw: str) -> str:
        return hmac.new(self._key, raw.encode("utf-8"), hashlib.sha256).hexdigest()[:16]

    def pseudonym(self, raw: str) -> str:
        cached = self._seen.get(raw)
        if cached is not None:
            return cached
        name = "u" + self._digest(raw)
        owner = self._owners.get(name)
        if owner is not None and owner != raw:
            raise CorpusError(f"pseudonym collision between two distinct authors on {name}")
        self._owners[name] = raw
        self._seen[raw] = name
        return name


@dataclass
class IngestSummary:
    kept: int = 0
    rejected: int = 0
    duplicates: int = 0
    filtered: int = 0

    def to_dict(self) -> dict:
        return {
            "kept": self.kept,
            "rejected": self.rejected,
            "duplicates": self.duplicates,
            "filtered": self.filtered,
        }


class PostStore:
    """Immutable, order-preserving collection of admitted posts."""

    def __init__(self, posts: Iterable[Post]):
        self._posts = tuple(posts)
        self._by_id = {p.post_id: p for p in self._posts}

    def __len__(self) -> int:
        return len(self._posts)

    def __iter__(self) -> Iterator[Post]:
        return iter(self._posts)

    def get(self, post_id: str) -> Optional[Post]:
        return self._by_id.get(post_id)

    def authors(self) -> set[str]:
        return {p.author_id for p in self._posts}

    def save_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for p in self._posts:
                f.write(json.dumps(p.to_record(), sort_keys=True, ensure_ascii=False))
                f.write("\n")

    @classmethod
    def load_jsonl(cls, path: str | Path) -> "PostStore":
        posts = []
        for rec in iter_jsonl(path):
            posts.append(
                Post(
                    post_id=rec["post_id"],
                    author_id=rec["author_id"],
                    retweeted_author_id=rec.get("retweeted_author_id"),
                    text=rec["text"],
                    created_at=_parse_timestamp(rec["created_at"]),
                    is_retweet=rec.get("is_retweet", rec.get("retweeted_author_id") is not None),
                    is_reply=rec.get("is_reply", False),
                    hashtags=tuple(rec.get("hashtags", [])),
                    lang=rec.get("lang"),
                )
            )
        return cls(posts)


def iter_jsonl(path: str | Path) -> Iterator[dict]:
    """Yield parsed objects from a .jsonl or .jsonl.gz file."""
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rt", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                yield json.loads(line)


def _parse_timestamp(value) -> datetime:
    if not isinstance(value, str):
        raise ValueError("created_at must be an ISO-8601 string")
    ts = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def _record_to_post(rec: dict, pseudo: Pseudonymizer) -> Post:
    """Validate one raw record and return the anonymized Post.

    Raises ValueError on any schema violation; the caller rejects the record.
    """
    if not isinstance(rec, dict):
        raise ValueError("record is not an object")
    post_id = rec.get("post_id")
    author = rec.get("author_id")
    text = rec.get("text")
    if not post_id or not isinstance(post_id, str):
        raise ValueError("missing post_id")
    if not author or not isinstance(author, str):
        raise ValueError("missing author_id")
    if not isinstance(text, str) or not text.strip():
        raise ValueError("missing or empty text")

    retweeted = rec.get("retweeted_author_id")
    if retweeted is not None and (not isinstance(retweeted, str) or not retweeted):
        raise ValueError("invalid retweeted_author_id")
    if "is_retweet" in rec and bool(rec["is_retweet"]) != (retweeted is not None):
        raise ValueError("is_retweet contradicts retweeted_author_id")

    hashtags = rec.get("hashtags", [])
    if not isinstance(hashtags, list) or not all(isinstance(h, str) for h in hashtags):
        raise ValueError("hashtags must be a list of strings")

    return Post(
        post_id=post_id,
        author_id=pseudo.pseudonym(author),
        retweeted_author_id=pseudo.pseudonym(retweeted) if retweeted is not None else None,
        text=text,
        created_at=_parse_timestamp(rec.get("created_at")),
        is_retweet=retweeted is not None,
        is_reply=bool(rec.get("is_reply", False)),
        hashtags=tuple(h.lower().lstrip("#") for h in hashtags),
        lang=rec.get("lang"),
    )


def ingest(
    records: Iterable[dict],
    keywords: KeywordSet,
    secret: str,
) -> tuple[PostStore, IngestSummary]:
    """Build the post store from raw records.

    Malformed records are rejected individually (the stream never aborts),
    duplicate post_ids keep the first occurrence, and only records matching
    the keyword set are admitted.
    """
    summary = IngestSummary()
    pseudo = Pseudonymizer(secret)
    kept: list[Post] = []
    seen_ids: set[str] = set()
    for rec in records:
        try:
            post = _record_to_post(rec, pseudo)
        except CorpusError:
            raise
        except (ValueError, KeyError, TypeError):
            summary.rejected += 1
            continue
        if post.post_id in seen_ids:
            summary.duplicates += 1
            continue
        seen_ids.add(post.post_id)
        if not keywords.matches(post.text, post.hashtags):
            summary.filtered += 1
            continue
        kept.append(post)
        summary.kept += 1
    return PostStore(kept), summary


def preprocess(post: Post) -> Optional[str]:
    """Clean one post's text for dataset construction.

    Retweets and replies are dropped entirely; otherwise URLs, @-mentions,
    #-hashtag tokens, and emoji are removed and whitespace collapsed.
    Returns None when nothing usable remains.
    """
    if post.is_retweet or post.is_reply:
        return None
    return clean_text(post.text) or None


def clean_text(text: str) -> str:
    text = _URL_RE.sub(" ", text)
    text = _MENTION_RE.sub(" ", text)
    text = _HASHTAG_RE.sub(" ", text)
    text = _EMOJI_RE.sub(" ", text)
    return re.sub(r"\s+", " ", text).strip()
