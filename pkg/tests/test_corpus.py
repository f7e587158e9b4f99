"""Ingestion, anonymization, keyword filtering, and text cleaning."""

import gzip
import hashlib
import hmac
import json
import random

import pytest

from commprobe.corpus import (
    CorpusError,
    KeywordSet,
    Post,
    PostStore,
    Pseudonymizer,
    clean_text,
    ingest,
    iter_jsonl,
    load_keywords,
    preprocess,
)


def make_record(i=1, text="starting my ketodiet today", author="alice", **extra):
    rec = {
        "post_id": f"p{i}",
        "author_id": author,
        "text": text,
        "created_at": "2022-10-01T12:00:00+00:00",
        "hashtags": [],
    }
    rec.update(extra)
    return rec


KW = KeywordSet(frozenset({"ketodiet", "edtwt", "thinspo"}))


class TestIngest:
    def test_empty_input(self):
        store, summary = ingest([], KW, secret="s")
        assert len(store) == 0
        assert summary.kept == 0
        assert summary.rejected == 0

    def test_keyword_match_keeps_record(self):
        store, summary = ingest([make_record()], KW, secret="s")
        assert summary.kept == 1
        assert len(store) == 1

    def test_hashtag_match_keeps_record(self):
        rec = make_record(text="no terms here", hashtags=["edtwt"])
        store, _ = ingest([rec], KW, secret="s")
        assert len(store) == 1

    def test_non_matching_record_filtered(self):
        rec = make_record(text="gardening on a sunny day")
        store, summary = ingest([rec], KW, secret="s")
        assert len(store) == 0
        assert summary.filtered == 1
        assert summary.rejected == 0

    def test_token_match_not_substring(self):
        # "keto" is not in the keyword set; "ketodiet" inside another word
        # must not fire either
        rec = make_record(text="myketodietblog is live")
        store, _ = ingest([rec], KW, secret="s")
        assert len(store) == 0

    def test_same_author_same_pseudonym_and_independent_hash(self):
        secret = "topsecret"
        records = [make_record(i, author="carol") for i in range(3)]
        store, _ = ingest(records, KW, secret=secret)
        names = {p.author_id for p in store}
        assert len(names) == 1
        name = names.pop()
        assert name != "carol"
        # recompute the keyed hash independently of the Pseudonymizer
        expected = "u" + hmac.new(
            secret.encode(), b"carol", hashlib.sha256
        ).hexdigest()[:16]
        assert name == expected

    def test_malformed_records_rejected_not_fatal(self):
        records = [
            {"post_id": "x1"},  # no author/text
            make_record(2, created_at="not-a-date"),
            make_record(3, text="   "),
            make_record(4),
        ]
        store, summary = ingest(records, KW, secret="s")
        assert summary.rejected == 3
        assert summary.kept == 1
        assert len(store) == 1

    def test_duplicate_post_id_keeps_first(self):
        first = make_record(1, text="ketodiet one")
        second = make_record(1, text="ketodiet two")
        store, summary = ingest([first, second], KW, secret="s")
        assert summary.duplicates == 1
        assert store.get("p1").text == "ketodiet one"

    def test_is_retweet_contradiction_rejected(self):
        rec = make_record(1, is_retweet=True)  # no retweeted_author_id
        _, summary = ingest([rec], KW, secret="s")
        assert summary.rejected == 1

    def test_retweet_carries_pseudonymized_target(self):
        rec = make_record(1, retweeted_author_id="bob")
        store, _ = ingest([rec], KW, secret="s")
        post = store.get("p1")
        assert post.is_retweet
        assert post.retweeted_author_id.startswith("u")
        assert post.retweeted_author_id != "bob"

    def test_collision_detection_fails_run(self):
        class Colliding(Pseudonymizer):
            def _digest(self, raw):
                return "0" * 16

        pseudo = Colliding("s")
        pseudo.pseudonym("alice")
        with pytest.raises(CorpusError):
            pseudo.pseudonym("bob")

    def test_keyword_filter_monotone(self):
        # enlarging the keyword set never shrinks the kept set
        rng = random.Random(11)
        vocab = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta"]
        records = [
            make_record(i, text=" ".join(rng.sample(vocab, 3)), author=f"a{i}")
            for i in range(60)
        ]
        for _ in range(20):
            small = frozenset(rng.sample(vocab, 2))
            big = small | frozenset(rng.sample(vocab, 2))
            kept_small, _ = ingest(records, KeywordSet(small), secret="s")
            kept_big, _ = ingest(records, KeywordSet(big), secret="s")
            assert {p.post_id for p in kept_small} <= {p.post_id for p in kept_big}


class TestKeywordSet:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            KeywordSet(frozenset())

    def test_rejects_uppercase_or_padded(self):
        with pytest.raises(ValueError):
            KeywordSet(frozenset({"Keto"}))
        with pytest.raises(ValueError):
            KeywordSet(frozenset({" keto "}))

    def test_load_ignores_comments(self, tmp_path):
        f = tmp_path / "kw.txt"
        f.write_text("# comment\nketo\n\nedtwt\n")
        kw = load_keywords(f)
        assert kw.terms == frozenset({"keto", "edtwt"})


class TestPreprocess:
    def wrap(self, text, **extra):
        return Post(
            post_id="p1",
            author_id="u" + "0" * 16,
            text=text,
            created_at=__import__("datetime").datetime(
                2022, 10, 1, tzinfo=__import__("datetime").timezone.utc
            ),
            **extra,
        )

    def test_removal_rules(self):
        post = self.wrap("check https://x.co @bob #edtwt hi")
        assert preprocess(post) == "check hi"

    def test_retweet_and_reply_absent(self):
        rt = self.wrap("ketodiet", is_retweet=True, retweeted_author_id="u" + "1" * 16)
        assert preprocess(rt) is None
        reply = self.wrap("ketodiet", is_reply=True)
        assert preprocess(reply) is None

    def test_url_only_absent(self):
        assert preprocess(self.wrap("https://only.example/x")) is None

    def test_emoji_removed(self):
        assert preprocess(self.wrap("so hungry \U0001F62D\U0001F495 today")) == "so hungry today"

    def test_idempotent(self):
        rng = random.Random(3)
        pieces = ["word", "@name", "#tag", "https://x.io/a", "\U0001F600", "text!"]
        for _ in range(100):
            text = " ".join(rng.choice(pieces) for _ in range(8))
            once = clean_text(text)
            assert clean_text(once) == once


class TestPostStore:
    def test_jsonl_roundtrip(self, tmp_path):
        store, _ = ingest(
            [make_record(1), make_record(2, retweeted_author_id="bob")], KW, secret="s"
        )
        path = tmp_path / "posts.jsonl"
        store.save_jsonl(path)
        loaded = PostStore.load_jsonl(path)
        assert len(loaded) == 2
        assert loaded.get("p2").is_retweet

    def test_gzip_input(self, tmp_path):
        path = tmp_path / "corpus.jsonl.gz"
        with gzip.open(path, "wt", encoding="utf-8") as f:
            f.write(json.dumps(make_record(1)) + "\n")
        records = list(iter_jsonl(path))
        assert records[0]["post_id"] == "p1"
