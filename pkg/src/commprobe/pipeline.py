"""Stage orchestration: each subcommand reads its predecessors' artifacts,
writes its own under the output directory, and records a manifest with
input/output checksums, the config snapshot, the seed, and timings.

With mock backends every artifact is byte-reproducible from the manifest
inputs; manifests themselves carry timings and are excluded from that
guarantee.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import random
import re
import time
from pathlib import Path
from typing import Optional, Sequence

from . import aligneval, backend as be, dataset as ds, graph as gr, screener as sc
from .config import RunConfig, make_backend, make_scorer
from .corpus import PostStore, ingest, iter_jsonl, load_keywords, preprocess

logger = logging.getLogger("commprobe.pipeline")

STAGE_ORDER = (
    "ingest",
    "detect",
    "profile",
    "build-dataset",
    "generate",
    "eval-align",
    "screen",
    "report",
)

# artifact (relative to out/) -> producing stage
_PRODUCERS = {
    "corpus/posts.jsonl": "ingest",
    "graph/partition.json": "detect",
    "graph/groups.json": "detect",
    "graph/communities.csv": "detect",
    "graph/profiles.json": "profile",
    "datasets/summary.json": "build-dataset",
    "datasets/classification_test.jsonl": "build-dataset",
    "generations/manifest.json": "generate",
    "metrics/metrics.json": "eval-align",
    "screening/screening.json": "screen",
}

STAGE_REQUIRES = {
    "ingest": (),
    "detect": ("corpus/posts.jsonl",),
    "profile": ("corpus/posts.jsonl", "graph/partition.json", "graph/groups.json"),
    "build-dataset": ("corpus/posts.jsonl", "graph/partition.json", "graph/groups.json"),
    "generate": ("graph/groups.json", "graph/profiles.json"),
    "eval-align": (
        "corpus/posts.jsonl",
        "graph/partition.json",
        "graph/groups.json",
        "generations/manifest.json",
        "datasets/classification_test.jsonl",
    ),
    "screen": ("graph/groups.json", "datasets/summary.json"),
    "report": ("graph/communities.csv", "metrics/metrics.json", "screening/screening.json"),
}


class StageError(Exception):
    pass


def slugify(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-")


def _derive_seed(base: int, *parts: str) -> int:
    h = hashlib.sha256(f"{base}:{':'.join(parts)}".encode("utf-8")).digest()
    return int.from_bytes(h[:8], "big")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path: Path, payload) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    return path


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def check_requirements(cfg: RunConfig, stage: str) -> list[Path]:
    """Verify predecessor artifacts exist; error names the stage to run first."""
    missing = []
    present = []
    for rel in STAGE_REQUIRES[stage]:
        path = cfg.out_dir / rel
        if path.exists():
            present.append(path)
        else:
            missing.append((rel, _PRODUCERS[rel]))
    if missing:
        rel, producer = missing[0]
        raise StageError(
            f"stage {stage!r} requires {rel} artifact; run {producer!r} first"
        )
    return present


def write_manifest(
    cfg: RunConfig,
    stage: str,
    inputs: Sequence[Path],
    outputs: Sequence[Path],
    started: float,
    duration: float,
) -> Path:
    manifest = {
        "stage": stage,
        "seed": cfg.seed,
        "inputs": {str(p): _sha256(Path(p)) for p in inputs},
        "outputs": {
            str(Path(p).relative_to(cfg.out_dir)): _sha256(Path(p)) for p in outputs
        },
        "config": cfg.snapshot(),
        "started_unix": started,
        "duration_s": duration,
    }
    return _write_json(cfg.out_dir / "manifests" / f"{stage}.json", manifest)


# ---------------------------------------------------------------------------
# Shared loaders
# ---------------------------------------------------------------------------


def _load_store(cfg: RunConfig) -> PostStore:
    return PostStore.load_jsonl(cfg.out_dir / "corpus/posts.jsonl")


def _load_partition(cfg: RunConfig, g: gr.InteractionGraph) -> gr.Partition:
    return gr.Partition.load(cfg.out_dir / "graph/partition.json", g)


def _load_groups(cfg: RunConfig) -> tuple[list[gr.GroupedCommunity], list[int]]:
    data = json.loads((cfg.out_dir / "graph/groups.json").read_text(encoding="utf-8"))
    groups = [
        gr.GroupedCommunity(
            name=g["name"],
            member_community_ids=tuple(g["member_community_ids"]),
            profile=g.get("profile"),
        )
        for g in data["groups"]
    ]
    return groups, data.get("excluded", [])


def _load_topics(cfg: RunConfig) -> list[str]:
    lines = cfg.topics_path().read_text(encoding="utf-8").splitlines()
    return [l.strip() for l in lines if l.strip() and not l.strip().startswith("#")]


def cleaned_posts_by_group(
    store: PostStore,
    partition: gr.Partition,
    groups: Sequence[gr.GroupedCommunity],
) -> dict[str, list[ds.CleanedPost]]:
    """Preprocessed original posts (no retweets/replies) per grouped community."""
    community_group: dict[int, str] = {}
    for g in groups:
        for c in g.member_community_ids:
            community_group[c] = g.name
    out: dict[str, list[ds.CleanedPost]] = {g.name: [] for g in groups}
    for post in store:
        c = partition.assignment.get(post.author_id)
        if c is None or c not in community_group:
            continue
        text = preprocess(post)
        if text is None:
            continue
        out[community_group[c]].append(ds.CleanedPost(post.post_id, text))
    return out


def generation_plan(n_topics: int, per_topic: int) -> int:
    """Generations issued per community per model tag."""
    return n_topics * per_topic


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def stage_ingest(cfg: RunConfig) -> tuple[list[Path], list[Path]]:
    if not cfg.corpus:
        raise StageError("stage 'ingest' needs paths.corpus in the config")
    keywords = load_keywords(cfg.keywords_path())
    store, summary = ingest(iter_jsonl(cfg.corpus), keywords, cfg.secret())
    out = cfg.out_dir / "corpus"
    out.mkdir(parents=True, exist_ok=True)
    posts_path = out / "posts.jsonl"
    store.save_jsonl(posts_path)
    summary_path = _write_json(out / "ingest_summary.json", summary.to_dict())
    logger.info("ingest: kept=%d rejected=%d duplicates=%d filtered=%d",
                summary.kept, summary.rejected, summary.duplicates, summary.filtered)
    return [Path(cfg.corpus), cfg.keywords_path()], [posts_path, summary_path]


def stage_detect(cfg: RunConfig) -> tuple[list[Path], list[Path]]:
    inputs = check_requirements(cfg, "detect")
    store = _load_store(cfg)
    g = gr.build_graph(store, binary_edges=cfg.binary_edges)
    out = cfg.out_dir / "graph"
    out.mkdir(parents=True, exist_ok=True)
    if len(g) == 0:
        raise StageError("stage 'detect' found no retweet interactions in the corpus")
    partition = gr.louvain(g, seed=cfg.seed)
    edges_path = out / "edges.txt"
    meta_path = out / "graph.json"
    g.save(edges_path)
    _write_json(
        meta_path,
        {
            "nodes": len(g),
            "edges": len(g.edges),
            "total_weight": g.total_weight,
            "modularity": partition.modularity_q,
            "n_communities": partition.n_communities,
            "seed": cfg.seed,
            "binary_edges": cfg.binary_edges,
        },
    )
    partition_path = out / "partition.json"
    partition.save(partition_path)

    ranked = gr.top_k(partition, cfg.top_k, store)
    communities_path = _write_csv(
        out / "communities.csv",
        ["rank", "community", "size", "posts"],
        [[i, row["community"], row["size"], row["posts"]] for i, row in enumerate(ranked)],
    )

    echo = gr.echo_chamber_stats(g, partition)
    echo_json = _write_json(out / "echo_chamber.json", {str(k): v for k, v in echo.items()})
    echo_csv = _write_csv(
        out / "echo_chamber.csv",
        ["community", "internal_weight", "external_weight", "internal_fraction"],
        [
            [c, v["internal_weight"], v["external_weight"], v["internal_fraction"]]
            for c, v in sorted(echo.items())
        ],
    )

    mapping = json.loads(cfg.grouping_path().read_text(encoding="utf-8"))
    groups, excluded = gr.group_communities(partition, mapping)
    groups_path = _write_json(
        out / "groups.json",
        {
            "groups": [
                {
                    "name": grp.name,
                    "member_community_ids": list(grp.member_community_ids),
                    "profile": grp.profile,
                }
                for grp in groups
            ],
            "excluded": excluded,
        },
    )
    outputs = [edges_path, meta_path, partition_path, communities_path, echo_json, echo_csv, groups_path]
    return inputs + [cfg.grouping_path()], outputs


def stage_profile(cfg: RunConfig) -> tuple[list[Path], list[Path]]:
    inputs = check_requirements(cfg, "profile")
    store = _load_store(cfg)
    g = gr.build_graph(store, binary_edges=cfg.binary_edges)
    partition = _load_partition(cfg, g)
    groups, _ = _load_groups(cfg)
    endpoint = make_backend(cfg, "profiler")
    profiles = {}
    by_group = cleaned_posts_by_group(store, partition, groups)
    for grp in groups:
        texts = [p.text for p in by_group.get(grp.name, [])]
        if not texts:
            profiles[grp.name] = None
            continue
        profiles[grp.name] = be.profile_posts(
            endpoint,
            texts,
            max_posts=cfg.profile_sample,
            seed=_derive_seed(cfg.seed, "profile", slugify(grp.name)),
        )
    path = _write_json(cfg.out_dir / "graph" / "profiles.json", profiles)
    return inputs, [path]


def _perplexities(cfg: RunConfig, posts: Sequence[ds.CleanedPost], slug: str) -> dict[str, float]:
    if cfg.perplexity_provider == "file":
        return ds.load_score_file(cfg.perplexity_path)
    return ds.mock_perplexities(posts, seed=_derive_seed(cfg.seed, "ppl", slug))


def stage_build_dataset(cfg: RunConfig) -> tuple[list[Path], list[Path]]:
    inputs = check_requirements(cfg, "build-dataset")
    store = _load_store(cfg)
    g = gr.build_graph(store, binary_edges=cfg.binary_edges)
    partition = _load_partition(cfg, g)
    groups, _ = _load_groups(cfg)
    pool = ds.InstructionPool.default()
    by_group = cleaned_posts_by_group(store, partition, groups)

    out = cfg.out_dir / "datasets"
    out.mkdir(parents=True, exist_ok=True)
    outputs: list[Path] = []
    summary: dict[str, dict] = {}
    for grp in groups:
        slug = slugify(grp.name)
        posts = by_group.get(grp.name, [])
        scores = _perplexities(cfg, posts, slug)
        selected = ds.select_quality(posts, scores, cap=cfg.quality_cap)
        demos = ds.pair_instructions(
            selected, pool, grp.name, seed=_derive_seed(cfg.seed, "pair", slug)
        )
        if cfg.alpaca:
            demos = ds.augment_alpaca(
                demos, cfg.alpaca, seed=_derive_seed(cfg.seed, "alpaca", slug)
            )
        demo_path = out / f"{slug}.jsonl"
        ds.write_demonstrations_jsonl(demos, demo_path)
        alpaca_path = out / f"{slug}.alpaca.json"
        ds.write_alpaca_json(demos, alpaca_path)
        outputs += [demo_path, alpaca_path]
        summary[grp.name] = {
            "cleaned_posts": len(posts),
            "selected": len(selected),
            "demonstrations": len(demos),
        }

    train, test = ds.build_classification_set(
        {grp.name: by_group.get(grp.name, []) for grp in groups},
        per_community=cfg.per_community,
        split=cfg.split,
        seed=_derive_seed(cfg.seed, "classification"),
    )
    train_path = out / "classification_train.jsonl"
    test_path = out / "classification_test.jsonl"
    ds.write_demonstrations_jsonl(train, train_path)
    ds.write_demonstrations_jsonl(test, test_path)
    summary["_classification"] = {"train": len(train), "test": len(test)}
    summary_path = _write_json(out / "summary.json", summary)
    extra = [Path(cfg.alpaca)] if cfg.alpaca else []
    return inputs + extra, outputs + [train_path, test_path, summary_path]


def stage_generate(cfg: RunConfig) -> tuple[list[Path], list[Path]]:
    inputs = check_requirements(cfg, "generate")
    groups, _ = _load_groups(cfg)
    topics = _load_topics(cfg)
    profiles = json.loads((cfg.out_dir / "graph/profiles.json").read_text(encoding="utf-8"))
    outputs: list[Path] = []
    index = {}
    for tag in ("vanilla", "finetuned"):
        for grp in groups:
            slug = slugify(grp.name)
            endpoint = make_backend(cfg, f"generator_{tag}", community_slug=slug)
            requests = []
            for topic in topics:
                if tag == "finetuned":
                    prompt = be.render(
                        "finetuned_tweet", {"community_name": grp.name, "topic": topic}
                    )
                else:
                    description = profiles.get(grp.name) or grp.profile
                    if not description:
                        raise StageError(
                            f"no community description for {grp.name!r}; run 'profile' first"
                        )
                    prompt = be.render(
                        "vanilla_tweet",
                        {
                            "community_name": grp.name,
                            "community description": description,
                            "topic": topic,
                        },
                    )
                requests.append(
                    be.GenerationRequest(
                        prompt=prompt,
                        n_samples=cfg.tweets_per_topic,
                        temperature=cfg.temperature,
                        max_tokens=be.TWEET_MAX_TOKENS,
                        seed=cfg.seed,
                    )
                )
            results = be.generate_batch(endpoint, requests, concurrency=cfg.concurrency)
            path = cfg.out_dir / "generations" / tag / f"{slug}.jsonl"
            path.parent.mkdir(parents=True, exist_ok=True)
            n_rows = 0
            with open(path, "w", encoding="utf-8") as f:
                for topic, result in zip(topics, results):
                    for i, text in enumerate(result.completions):
                        if text is None:
                            continue
                        f.write(
                            json.dumps(
                                {
                                    "community": grp.name,
                                    "topic": topic,
                                    "index": i,
                                    "text": text,
                                },
                                sort_keys=True,
                                ensure_ascii=False,
                            )
                            + "\n"
                        )
                        n_rows += 1
            outputs.append(path)
            index[f"{tag}/{slug}"] = {"rows": n_rows, "topics": len(topics)}
    manifest_path = _write_json(
        cfg.out_dir / "generations" / "manifest.json",
        {"planned_per_community": generation_plan(len(topics), cfg.tweets_per_topic), "sets": index},
    )
    return inputs + [cfg.topics_path()], outputs + [manifest_path]


def _read_generations(cfg: RunConfig, tag: str, slug: str) -> list[str]:
    path = cfg.out_dir / "generations" / tag / f"{slug}.jsonl"
    if not path.exists():
        return []
    return [json.loads(l)["text"] for l in path.read_text(encoding="utf-8").splitlines() if l.strip()]


def _embed_texts(cfg: RunConfig, endpoint, texts: Sequence[str]) -> Optional[aligneval.EmbeddingSet]:
    vectors = []
    for start in range(0, len(texts), 256):
        chunk = list(texts[start : start + 256])
        if not chunk:
            continue
        result = be.embed(endpoint, chunk)
        vectors.extend(v for v in result.vectors if v is not None)
    if len(vectors) < 2:
        return None
    return aligneval.EmbeddingSet(vectors=vectors)


def _classify(cfg: RunConfig, endpoint, texts: Sequence[str]) -> list[str]:
    requests = [
        be.GenerationRequest(
            prompt=be.render("classification", {"Tweet": t}),
            n_samples=1,
            temperature=0.0,
            max_tokens=be.ANSWER_MAX_TOKENS,
            seed=cfg.seed,
        )
        for t in texts
    ]
    results = be.generate_batch(endpoint, requests, concurrency=cfg.concurrency)
    return [(r.completions[0] or "") for r in results]


def _cap_texts(cfg: RunConfig, texts: list[str], *key: str) -> list[str]:
    if len(texts) <= cfg.eval_max_texts:
        return texts
    rng = random.Random(_derive_seed(cfg.seed, "cap", *key))
    return rng.sample(texts, cfg.eval_max_texts)


def stage_eval_align(cfg: RunConfig) -> tuple[list[Path], list[Path]]:
    inputs = check_requirements(cfg, "eval-align")
    store = _load_store(cfg)
    g = gr.build_graph(store, binary_edges=cfg.binary_edges)
    partition = _load_partition(cfg, g)
    groups, _ = _load_groups(cfg)
    by_group = cleaned_posts_by_group(store, partition, groups)

    embedder = make_backend(cfg, "embedder")
    scorer = make_scorer(cfg)
    classifier = make_backend(cfg, "classifier")

    metrics: dict[str, dict] = {}
    all_preds: dict[str, list[str]] = {"vanilla": [], "finetuned": []}
    all_gold: dict[str, list[str]] = {"vanilla": [], "finetuned": []}
    emotion_labels = list(be.EMOTION_LABELS)

    for grp in groups:
        slug = slugify(grp.name)
        texts = {
            "human": _cap_texts(cfg, [p.text for p in by_group.get(grp.name, [])], slug, "human"),
            "vanilla": _cap_texts(cfg, _read_generations(cfg, "vanilla", slug), slug, "vanilla"),
            "finetuned": _cap_texts(cfg, _read_generations(cfg, "finetuned", slug), slug, "finetuned"),
        }
        entry: dict = {"n_texts": {tag: len(ts) for tag, ts in texts.items()}}

        sets = {tag: _embed_texts(cfg, embedder, ts) for tag, ts in texts.items()}
        for tag in ("vanilla", "finetuned"):
            if sets["human"] is not None and sets[tag] is not None:
                entry[f"fid_{tag}"] = aligneval.fid(sets["human"], sets[tag])
            else:
                entry[f"fid_{tag}"] = None

        tox = aligneval.toxicity_distribution(
            texts, scorer, threshold=cfg.toxicity_threshold
        )
        emo = aligneval.emotion_distribution(texts, scorer, decision=cfg.emotion_decision)
        entry["toxicity"] = tox
        entry["emotion"] = emo
        for tag in ("vanilla", "finetuned"):
            if tox["human"]["retained"] > 0 and tox[tag]["retained"] > 0:
                entry[f"jsd_toxicity_{tag}"] = aligneval.distribution_distance(
                    tox["human"]["hist"], tox[tag]["hist"]
                )
            else:
                entry[f"jsd_toxicity_{tag}"] = None
            if not emo["human"]["degenerate"] and not emo[tag]["degenerate"]:
                entry[f"jsd_emotion_{tag}"] = aligneval.distribution_distance(
                    [emo["human"]["freqs"][l] for l in emotion_labels],
                    [emo[tag]["freqs"][l] for l in emotion_labels],
                )
            else:
                entry[f"jsd_emotion_{tag}"] = None

        for tag in ("vanilla", "finetuned"):
            if texts[tag]:
                preds = _classify(cfg, classifier, texts[tag])
                gold = [grp.name] * len(preds)
                report = aligneval.classification_accuracy(preds, gold)
                entry[f"accuracy_{tag}"] = report.accuracy
                entry[f"unparseable_{tag}"] = report.unparseable
                all_preds[tag].extend(preds)
                all_gold[tag].extend(gold)
            else:
                entry[f"accuracy_{tag}"] = None
        metrics[grp.name] = entry

    overall: dict[str, object] = {}
    for tag in ("vanilla", "finetuned"):
        if all_preds[tag]:
            report = aligneval.classification_accuracy(all_preds[tag], all_gold[tag])
            overall[f"accuracy_{tag}"] = report.accuracy
            overall[f"unparseable_{tag}"] = report.unparseable
            overall[f"n_{tag}"] = report.n
        else:
            overall[f"accuracy_{tag}"] = None

    # held-out human classification split
    test_demos = ds.load_demonstrations_jsonl(cfg.out_dir / "datasets/classification_test.jsonl")
    if test_demos:
        capped = test_demos[: cfg.eval_max_texts]
        results = be.generate_batch(
            classifier,
            [
                be.GenerationRequest(
                    prompt=d.instruction,
                    n_samples=1,
                    temperature=0.0,
                    max_tokens=be.ANSWER_MAX_TOKENS,
                    seed=cfg.seed,
                )
                for d in capped
            ],
            concurrency=cfg.concurrency,
        )
        preds = [(r.completions[0] or "") for r in results]
        gold = [d.response for d in capped]
        report = aligneval.classification_accuracy(preds, gold)
        overall["accuracy_human"] = report.accuracy
        overall["unparseable_human"] = report.unparseable
        overall["n_human"] = report.n

    out = cfg.out_dir / "metrics"
    out.mkdir(parents=True, exist_ok=True)
    metrics_path = _write_json(out / "metrics.json", {"communities": metrics, "overall": overall})

    fid_csv = _write_csv(
        out / "fid.csv",
        ["community", "fid_vanilla", "fid_finetuned"],
        [[name, m["fid_vanilla"], m["fid_finetuned"]] for name, m in sorted(metrics.items())],
    )
    acc_rows = [
        [name, tag, m.get(f"accuracy_{tag}"), m["n_texts"][tag]]
        for name, m in sorted(metrics.items())
        for tag in ("vanilla", "finetuned")
    ]
    for tag in ("human", "vanilla", "finetuned"):
        if overall.get(f"accuracy_{tag}") is not None:
            acc_rows.append(["<overall>", tag, overall[f"accuracy_{tag}"], overall.get(f"n_{tag}")])
    acc_csv = _write_csv(out / "accuracy.csv", ["community", "tag", "accuracy", "n"], acc_rows)

    tox_rows = []
    emo_rows = []
    jsd_rows = []
    for name, m in sorted(metrics.items()):
        for tag in ("human", "vanilla", "finetuned"):
            hist = m["toxicity"][tag]
            for lo, hi, count in zip(hist["bin_edges"][:-1], hist["bin_edges"][1:], hist["hist"]):
                tox_rows.append([name, tag, lo, hi, count])
            freqs = m["emotion"][tag]["freqs"]
            if freqs:
                for label in emotion_labels:
                    emo_rows.append([name, tag, label, freqs[label]])
        for key in ("jsd_toxicity_vanilla", "jsd_toxicity_finetuned", "jsd_emotion_vanilla", "jsd_emotion_finetuned"):
            jsd_rows.append([name, key, m[key]])
    tox_csv = _write_csv(out / "toxicity.csv", ["community", "tag", "bin_lo", "bin_hi", "count"], tox_rows)
    emo_csv = _write_csv(out / "emotion.csv", ["community", "tag", "label", "freq"], emo_rows)
    jsd_csv = _write_csv(out / "jsd.csv", ["community", "metric", "value"], jsd_rows)

    return inputs, [metrics_path, fid_csv, acc_csv, tox_csv, emo_csv, jsd_csv]


def stage_screen(cfg: RunConfig) -> tuple[list[Path], list[Path], bool]:
    inputs = check_requirements(cfg, "screen")
    groups, _ = _load_groups(cfg)
    questionnaire = sc.load_questionnaire(cfg.questionnaire)
    results = []
    for grp in groups:
        endpoint = make_backend(cfg, "generator_finetuned", community_slug=slugify(grp.name))
        results.append(
            sc.screen_community(
                endpoint,
                grp.name,
                questionnaire,
                n=cfg.swed_samples,
                temperature=cfg.temperature,
                seed=cfg.seed,
                min_valid_fraction=cfg.min_valid_fraction,
            )
        )
    out = cfg.out_dir / "screening"
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / "screening.json"
    csv_path = out / "screening.csv"
    all_complete = sc.write_report(results, json_path, csv_path)
    print(sc.render_table(results))
    extra = [Path(cfg.questionnaire)] if cfg.questionnaire else []
    return inputs + extra, [json_path, csv_path], all_complete


def stage_report(cfg: RunConfig) -> tuple[list[Path], list[Path]]:
    from . import report as report_mod

    inputs = check_requirements(cfg, "report")
    outputs = report_mod.render_all(cfg)
    return inputs, outputs


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------


def run_stage(cfg: RunConfig, name: str) -> int:
    """Run one stage, write its manifest, and return an exit code."""
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    code = 0
    if name == "ingest":
        inputs, outputs = stage_ingest(cfg)
    elif name == "detect":
        inputs, outputs = stage_detect(cfg)
    elif name == "profile":
        inputs, outputs = stage_profile(cfg)
    elif name == "build-dataset":
        inputs, outputs = stage_build_dataset(cfg)
    elif name == "generate":
        inputs, outputs = stage_generate(cfg)
    elif name == "eval-align":
        inputs, outputs = stage_eval_align(cfg)
    elif name == "screen":
        inputs, outputs, all_complete = stage_screen(cfg)
        if not all_complete:
            code = 1
    elif name == "report":
        inputs, outputs = stage_report(cfg)
    else:
        raise StageError(f"unknown stage {name!r}")
    write_manifest(cfg, name, inputs, outputs, started, time.time() - started)
    logger.info("stage %s finished with %d artifacts", name, len(outputs))
    return code


def run_all(cfg: RunConfig) -> int:
    code = 0
    for name in STAGE_ORDER:
        stage_code = run_stage(cfg, name)
        code = code or stage_code
    return code
