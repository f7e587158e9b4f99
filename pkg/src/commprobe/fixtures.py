"""Synthetic end-to-end fixture: a corpus with three planted communities,
mock backend scripts, a small Alpaca-style file, a grouping map, and a run
config wired for fully offline execution.

Generate with `python -m commprobe.fixtures <directory>`; then run
`commprobe all --config <directory>/config.toml`.
"""

from __future__ import annotations

import gzip
import json
import random
import re
from datetime import datetime, timedelta, timezone
from pathlib import Path

FIXTURE_SEED = 7

# (group name, users, originals, intra retweets, signature token, extra vocab)
_COMMUNITIES = (
    (
        "Pro Eating Disorder",
        110,
        1400,
        900,
        "edtwt",
        ["thinspo", "meanspo", "fasting", "bonespo", "skinnycheck"],
    ),
    (
        "Keto & Diet",
        100,
        900,
        600,
        "ketodiet",
        ["keto", "lowcalrestriction", "intermittentfasting", "cleaneating"],
    ),
    (
        "Body Image",
        78,
        700,
        400,
        "bodypositivity",
        ["bodyimage", "fatacceptance", "dietculture", "midriff"],
    ),
)

_PHRASES = [
    "honestly thinking about",
    "daily reminder about",
    "cannot stop reading about",
    "new post about",
    "hot take on",
    "please talk to me about",
    "journal entry on",
    "my experience with",
]

_FILLERS = [
    "today",
    "again",
    "this week",
    "right now",
    "as always",
    "for real",
    "no joke",
    "all day",
]

# per-community SWED answer scripts; the first community carries the
# high-risk pattern (Q5=e Q6=e Q7=g Q8=d Q9=d, all four behaviors yes)
_SWED_ANSWERS = {
    "Pro Eating Disorder": {
        "currently in treatment for an eating disorder": ["b"],
        "lowest weight in the past year": ["95"],
        "current weight in pounds": ["100"],
        "current height in inches": ["65"],
        "worry about your weight and body shape": ["e"],
        "afraid are you of gaining 3 pounds": ["e"],
        "last time you went on a diet": ["g"],
        "how important is your weight to you": ["d"],
        "Do you ever feel fat": ["d"],
        "sense of loss of control": ["4"],
        "Made yourself throw up": ["Yes"],
        "Used diuretics or laxatives": ["Yes"],
        "Exercised excessively": ["Yes"],
        "Fasted": ["Yes"],
        "significant weight loss": ["b"],
    },
    "Keto & Diet": {
        "currently in treatment for an eating disorder": ["a"],
        "lowest weight in the past year": ["130"],
        "current weight in pounds": ["140"],
        "current height in inches": ["67"],
        "worry about your weight and body shape": ["d", "d", "c"],
        "afraid are you of gaining 3 pounds": ["c"],
        "last time you went on a diet": ["g"],
        "how important is your weight to you": ["c"],
        "Do you ever feel fat": ["c", "c", "b"],
        "sense of loss of control": ["1"],
        "Made yourself throw up": ["No"],
        "Used diuretics or laxatives": ["No"],
        "Exercised excessively": ["Yes"],
        "Fasted": ["Yes"],
        "significant weight loss": ["b"],
    },
    "Body Image": {
        "currently in treatment for an eating disorder": ["a"],
        "lowest weight in the past year": ["125"],
        "current weight in pounds": ["130"],
        "current height in inches": ["66"],
        "worry about your weight and body shape": ["b"],
        "afraid are you of gaining 3 pounds": ["b"],
        "last time you went on a diet": ["b"],
        "how important is your weight to you": ["a"],
        "Do you ever feel fat": ["b"],
        "sense of loss of control": ["0"],
        "Made yourself throw up": ["No"],
        "Used diuretics or laxatives": ["No"],
        "Exercised excessively": ["No"],
        "Fasted": ["No"],
        "significant weight loss": ["b"],
    },
}

_PROFILES = {
    "edtwt": "This community trades edtwt weight-loss tips, thin-ideal inspiration, and fasting strategies.",
    "ketodiet": "This community discusses ketogenic diets, low-carb recipes, and weight-loss progress.",
    "bodypositivity": "This community posts about body positivity, self-acceptance, and pushing back on diet culture.",
}


def _tweet_variants(kind: str) -> list[str]:
    if kind == "finetuned":
        stems = [
            r"\2 is all i think about lately, \1 knows the feeling",
            r"ok \1 real talk: \2 has taken over my whole week",
            r"nobody warned me how much \2 would matter here in \1",
            r"my honest \2 update for \1: progress is progress",
            r"\2 thread incoming because \1 deserves the details",
            r"can we normalize talking about \2 in \1 without judgement",
            r"that feeling when \2 finally clicks. \1 gets it",
            r"logging my \2 thoughts again, \1 style",
            r"\2 check: still at it, still posting for \1",
            r"soft reminder from \1: \2 looks different for everyone",
        ]
    else:
        stems = [
            r"As a member of this community, here are my balanced thoughts on \3.",
            r"Here is a considered take on \3 that everyone can appreciate.",
            r"Thinking broadly, \3 is a topic with many perspectives worth hearing.",
            r"A quick informative note about \3 for anyone curious.",
            r"Let us discuss \3 respectfully and share reliable resources.",
            r"Today I want to highlight some general facts about \3.",
            r"Many people ask about \3; here is a friendly overview.",
            r"Sharing a thoughtful reflection on \3 with the community.",
        ]
    return stems


def build_mock_script(group_names: list[str]) -> dict:
    """Prompt-regex table for the mock generation backend."""
    script: dict = {}
    # community profiling: keyed by each community's signature token
    for token, summary in _PROFILES.items():
        script[rf"^Given this list of posts, summarize the main ideas in 1 sentence[\s\S]*{token}"] = [
            summary
        ]
    # questionnaire answers, one entry per (community, question snippet)
    for name, answers in _SWED_ANSWERS.items():
        if name not in group_names:
            continue
        for snippet, choices in answers.items():
            pattern = rf"^You're now part of the {re.escape(name)}\.[\s\S]*{re.escape(snippet)}"
            script[pattern] = choices
    # tweet generation: the vanilla pattern must precede the finetuned one
    # because the finetuned regex also matches vanilla prompts
    script[
        r"^You're part of the online community (.+), which focuses on (.+) now\. "
        r"What would you tweet about (.+)\?$"
    ] = _tweet_variants("vanilla")
    script[
        r"^You're part of the online community (.+) now\. What would you tweet about (.+)\?$"
    ] = _tweet_variants("finetuned")
    script[r"which community does this Tweet belong to\?"] = {
        "mode": "uniform",
        "choices": group_names,
    }
    return script


def _make_posts(rng: random.Random) -> list[dict]:
    base = datetime(2022, 10, 1, tzinfo=timezone.utc)
    records: list[dict] = []
    post_n = 0
    user_offset = 0
    community_users: list[list[str]] = []

    def new_record(author: str, text: str, retweeted: str | None = None, **extra) -> dict:
        nonlocal post_n
        post_n += 1
        rec = {
            "post_id": f"t{post_n:06d}",
            "author_id": author,
            "text": text,
            "created_at": (base + timedelta(minutes=post_n)).isoformat(),
            "hashtags": extra.pop("hashtags", []),
            "lang": extra.pop("lang", "en"),
        }
        if retweeted is not None:
            rec["retweeted_author_id"] = retweeted
        rec.update(extra)
        return rec

    for name, n_users, n_orig, n_rt, token, vocab in _COMMUNITIES:
        users = [f"user{user_offset + i:04d}" for i in range(n_users)]
        user_offset += n_users
        community_users.append(users)
        for i in range(n_orig):
            author = rng.choice(users)
            phrase = rng.choice(_PHRASES)
            word = rng.choice(vocab)
            filler = rng.choice(_FILLERS)
            text = f"{phrase} {word} and {token} {filler}"
            decorations = rng.random()
            if decorations < 0.15:
                text += " https://t.co/abc123"
            elif decorations < 0.25:
                text += " @afriend"
            elif decorations < 0.35:
                text += " \U0001F495"
            hashtags = [token] if rng.random() < 0.3 else []
            is_reply = rng.random() < 0.1
            records.append(
                new_record(author, text, hashtags=hashtags, is_reply=is_reply)
            )
        # retweets: a ring pass guarantees every user joins the graph,
        # the rest are random intra-community pairs
        for i in range(n_users):
            u, v = users[i], users[(i + 1) % n_users]
            records.append(new_record(u, f"RT sharing this {token} post", retweeted=v))
        for _ in range(n_rt - n_users):
            u, v = rng.sample(users, 2)
            records.append(new_record(u, f"RT boosting {token} content", retweeted=v))

    # sparse cross-community retweets
    pro, keto, body = community_users
    for _ in range(40):
        records.append(
            new_record(rng.choice(keto), "RT about ketodiet crossover", retweeted=rng.choice(pro))
        )
    for _ in range(36):
        records.append(
            new_record(rng.choice(body), "RT about bodypositivity crossover", retweeted=rng.choice(keto))
        )

    # satellite pairs: tiny two-user communities
    for pair in range(6):
        a = f"sat{pair:02d}a"
        b = f"sat{pair:02d}b"
        records.append(new_record(a, "RT niche weightloss corner", retweeted=b))
        records.append(new_record(b, "RT niche weightloss corner back", retweeted=a))
        records.append(new_record(a, "RT again weightloss corner", retweeted=b))
        records.append(new_record(b, "RT again weightloss corner back", retweeted=a))

    # a self-retweet (dropped from the graph but kept in the store)
    records.append(new_record(pro[0], "RT my own edtwt post", retweeted=pro[0]))

    # junk: malformed, duplicate, and off-topic records
    records.append({"post_id": "bad001", "text": "no author on this one"})
    records.append({"post_id": "bad002", "author_id": "user0001", "text": "  "})
    records.append(
        {
            "post_id": "bad003",
            "author_id": "user0001",
            "text": "edtwt but broken timestamp",
            "created_at": "not-a-date",
        }
    )
    dup = dict(records[0])
    dup["text"] = "duplicate of the first post edtwt"
    records.append(dup)
    records.append(new_record("user0002", "completely unrelated gardening content"))
    return records


def make_fixture(out_dir: str | Path, seed: int = FIXTURE_SEED) -> dict[str, Path]:
    """Write the full fixture tree; returns the paths of everything created."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    group_names = [name for name, *_ in _COMMUNITIES]

    corpus_path = out / "corpus.jsonl.gz"
    with gzip.open(corpus_path, "wt", encoding="utf-8") as f:
        for rec in _make_posts(rng):
            f.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")

    script_path = out / "mock_backend.json"
    script_path.write_text(
        json.dumps(build_mock_script(group_names), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )

    # the three planted communities come out of detection ranked by size
    grouping_path = out / "grouping.json"
    grouping_path.write_text(
        json.dumps({name: [i] for i, name in enumerate(group_names)}, indent=2) + "\n",
        encoding="utf-8",
    )

    alpaca_path = out / "alpaca_sample.json"
    alpaca_rows = []
    for i in range(40):
        row = {
            "instruction": f"Explain concept number {i} in one sentence.",
            "input": f"Concept {i} relates to everyday planning." if i % 2 else "",
            "output": f"Concept {i} is a simple idea used for illustration.",
        }
        alpaca_rows.append(row)
    alpaca_path.write_text(json.dumps(alpaca_rows, indent=2) + "\n", encoding="utf-8")

    config_path = out / "config.toml"
    config_path.write_text(
        "\n".join(
            [
                "[paths]",
                'corpus = "corpus.jsonl.gz"',
                'grouping = "grouping.json"',
                'alpaca = "alpaca_sample.json"',
                'out = "out"',
                "",
                "[backend.generator_vanilla]",
                'kind = "mock"',
                'script = "mock_backend.json"',
                "",
                "[backend.generator_finetuned]",
                'kind = "mock"',
                'script = "mock_backend.json"',
                "",
                "[backend.classifier]",
                'kind = "mock"',
                'script = "mock_backend.json"',
                "",
                "[backend.profiler]",
                'kind = "mock"',
                'script = "mock_backend.json"',
                "",
                "[backend.embedder]",
                'kind = "mock"',
                "embed_dim = 8",
                "",
                "[backend.scorer]",
                'kind = "mock"',
                "",
                "[sampling]",
                "tweets_per_topic = 20",
                "swed_samples = 50",
                "temperature = 1.0",
                "profile_sample = 100",
                "concurrency = 4",
                "eval_max_texts = 600",
                "",
                "[dataset]",
                "per_community = 300",
                "split = 0.95",
                "",
                "[run]",
                f"seed = {seed}",
                "top_k = 10",
                "",
            ]
        ),
        encoding="utf-8",
    )

    return {
        "corpus": corpus_path,
        "script": script_path,
        "grouping": grouping_path,
        "alpaca": alpaca_path,
        "config": config_path,
    }


if __name__ == "__main__":
    import sys

    target = sys.argv[1] if len(sys.argv) > 1 else "fixture"
    paths = make_fixture(target)
    for key, path in paths.items():
        print(f"{key}: {path}")
