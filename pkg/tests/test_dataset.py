"""Dataset construction: quality selection, instruction pairing, Alpaca
augmentation, and the classification split."""

import json
import random

import pytest

from commprobe.dataset import (
    CleanedPost,
    DatasetError,
    Demonstration,
    InstructionPool,
    PerplexityScore,
    augment_alpaca,
    build_classification_set,
    load_demonstrations_jsonl,
    load_score_file,
    mock_perplexities,
    pair_instructions,
    select_quality,
    write_alpaca_json,
    write_demonstrations_jsonl,
)


def posts(n, prefix="p"):
    return [CleanedPost(f"{prefix}{i:03d}", f"text number {i}") for i in range(n)]


class TestSelectQuality:
    def test_fewer_than_cap_keeps_all(self):
        ps = posts(5)
        scores = {p.post_id: float(i + 1) for i, p in enumerate(ps)}
        assert select_quality(ps, scores, cap=10) == ps

    def test_sorts_ascending_and_caps(self):
        ps = posts(3)
        scores = {"p000": 3.0, "p001": 1.0, "p002": 2.0}
        picked = select_quality(ps, scores, cap=2)
        assert [p.post_id for p in picked] == ["p001", "p002"]

    def test_ties_break_by_post_id(self):
        ps = posts(3)
        scores = {p.post_id: 1.0 for p in ps}
        picked = select_quality(list(reversed(ps)), scores, cap=2)
        assert [p.post_id for p in picked] == ["p000", "p001"]

    def test_missing_score_names_post(self):
        ps = posts(2)
        with pytest.raises(DatasetError, match="p001"):
            select_quality(ps, {"p000": 1.0}, cap=2)

    def test_output_is_prefix_of_full_ordering(self):
        rng = random.Random(13)
        for _ in range(20):
            n = rng.randint(1, 50)
            ps = posts(n)
            scores = {p.post_id: rng.uniform(1, 100) for p in ps}
            cap = rng.randint(1, 60)
            full = select_quality(ps, scores, cap=n)
            capped = select_quality(ps, scores, cap=cap)
            assert capped == full[: min(cap, n)]

    def test_invalid_cap(self):
        with pytest.raises(DatasetError):
            select_quality(posts(1), {"p000": 1.0}, cap=0)


class TestInstructionPool:
    def test_default_pool_is_the_twenty_templates(self):
        pool = InstructionPool.default()
        assert len(pool) == 20
        assert pool.templates[0] == (
            "You're part of the online community {community_name} now. "
            "What would you tweet ?"
        )
        assert all("{community_name}" in t for t in pool.templates)

    def test_template_without_placeholder_rejected(self):
        with pytest.raises(DatasetError):
            InstructionPool(["tweet something"])

    def test_empty_pool_rejected(self):
        with pytest.raises(DatasetError):
            InstructionPool([])


class TestPairInstructions:
    def test_deterministic_given_seed(self):
        pool = InstructionPool.default()
        ps = posts(30)
        a = pair_instructions(ps, pool, "Keto & Diet", seed=4)
        b = pair_instructions(ps, pool, "Keto & Diet", seed=4)
        assert a == b

    def test_first_template_substitution_exact(self):
        pool = InstructionPool(["You're part of the online community {community_name} now. What would you tweet ?"])
        demos = pair_instructions(posts(1), pool, "Pro Eating Disorder", seed=0)
        assert demos[0].instruction == (
            "You're part of the online community Pro Eating Disorder now. "
            "What would you tweet ?"
        )

    def test_response_byte_identical_to_text(self):
        pool = InstructionPool.default()
        ps = [CleanedPost("p0", "exact bytes éé here")]
        demos = pair_instructions(ps, pool, "Body Image", seed=1)
        assert demos[0].response == "exact bytes éé here"
        assert demos[0].origin == "tweet_gen"

    def test_empty_selection(self):
        assert pair_instructions([], InstructionPool.default(), "Body Image", seed=0) == []


class TestAugmentAlpaca:
    def alpaca_file(self, tmp_path, rows):
        path = tmp_path / "alpaca.json"
        path.write_text(json.dumps(rows), encoding="utf-8")
        return path

    def demo(self):
        return Demonstration("inst {x}", "resp", "tweet_gen", "Body Image")

    def test_counts_add_up(self, tmp_path):
        rows = [
            {"instruction": f"i{k}", "input": "", "output": f"o{k}"} for k in range(10)
        ]
        path = self.alpaca_file(tmp_path, rows)
        combined = augment_alpaca([self.demo()] * 5, path, seed=0)
        assert len(combined) == 15
        assert sum(1 for d in combined if d.origin == "alpaca_aug") == 10

    def test_input_folded_with_blank_line(self, tmp_path):
        rows = [{"instruction": "base", "input": "extra", "output": "o"}]
        combined = augment_alpaca([], self.alpaca_file(tmp_path, rows), seed=0)
        assert combined[0].instruction == "base\n\nextra"

    def test_empty_input_passthrough(self, tmp_path):
        rows = [{"instruction": "base", "input": "", "output": "o"}]
        combined = augment_alpaca([], self.alpaca_file(tmp_path, rows), seed=0)
        assert combined[0].instruction == "base"

    def test_missing_file_errors(self, tmp_path):
        with pytest.raises(DatasetError):
            augment_alpaca([], tmp_path / "nope.json", seed=0)

    def test_invalid_record_errors(self, tmp_path):
        path = self.alpaca_file(tmp_path, [{"instruction": "x"}])
        with pytest.raises(DatasetError, match="record 0"):
            augment_alpaca([], path, seed=0)

    def test_shuffle_deterministic(self, tmp_path):
        rows = [{"instruction": f"i{k}", "input": "", "output": f"o{k}"} for k in range(20)]
        path = self.alpaca_file(tmp_path, rows)
        a = augment_alpaca([self.demo()] * 3, path, seed=9)
        b = augment_alpaca([self.demo()] * 3, path, seed=9)
        assert a == b


class TestClassificationSet:
    def stores(self, per=30):
        names = (
            "Pro Eating Disorder",
            "Keto & Diet",
            "Body Image",
            "Anti Eating Disorder",
            "Healthy Lifestyle & Weight Loss",
            "Weight Loss Drugs",
        )
        return {name: posts(per, prefix=f"c{i}_") for i, name in enumerate(names)}

    def test_counts_and_stratification(self):
        train, test = build_classification_set(self.stores(40), per_community=40, split=0.9, seed=0)
        assert len(train) == 6 * 36
        assert len(test) == 6 * 4
        for name in self.stores():
            n_test = sum(1 for d in test if d.community == name)
            assert abs(n_test - 4) <= 1

    def test_instruction_format_exact(self):
        train, test = build_classification_set(
            {"Body Image": posts(2)}, per_community=2, split=0.5, seed=0
        )
        demo = (train + test)[0]
        assert demo.instruction.startswith(
            "From these communities: Pro Eating Disorder, Keto & Diet, Body Image, "
            "Anti Eating Disorder, Healthy lifestyle & Weight Loss, and Weight Loss "
            "Drugs; which community does this Tweet belong to? "
        )
        assert demo.instruction.endswith(("text number 0", "text number 1"))
        assert demo.origin == "classification"
        assert demo.response == "Body Image"

    def test_takes_all_when_short(self, caplog):
        import logging

        with caplog.at_level(logging.WARNING):
            train, test = build_classification_set(
                {"Body Image": posts(4)}, per_community=100, split=0.5, seed=0
            )
        assert len(train) + len(test) == 4
        assert any("keeping all" in r.message for r in caplog.records)

    def test_split_bounds(self):
        with pytest.raises(DatasetError):
            build_classification_set(self.stores(2), per_community=2, split=1.0, seed=0)
        with pytest.raises(DatasetError):
            build_classification_set(self.stores(2), per_community=2, split=0.0, seed=0)

    def test_deterministic(self):
        a = build_classification_set(self.stores(), per_community=20, split=0.95, seed=5)
        b = build_classification_set(self.stores(), per_community=20, split=0.95, seed=5)
        assert a == b


class TestSerialization:
    def test_jsonl_roundtrip(self, tmp_path):
        demos = [
            Demonstration("i1", "r1", "tweet_gen", "Body Image"),
            Demonstration("i2", "r2", "alpaca_aug"),
        ]
        path = tmp_path / "demos.jsonl"
        write_demonstrations_jsonl(demos, path)
        assert load_demonstrations_jsonl(path) == demos

    def test_alpaca_export_contract(self, tmp_path):
        demos = [Demonstration("inst", "resp", "tweet_gen", "Body Image")]
        path = tmp_path / "out.alpaca.json"
        write_alpaca_json(demos, path)
        rows = json.loads(path.read_text())
        assert rows == [{"instruction": "inst", "input": "", "output": "resp"}]

    def test_score_file_roundtrip(self, tmp_path):
        path = tmp_path / "scores.jsonl"
        path.write_text('{"post_id": "p1", "perplexity": 12.5}\n')
        assert load_score_file(path) == {"p1": 12.5}

    def test_score_must_be_positive_finite(self):
        with pytest.raises(DatasetError):
            PerplexityScore("p1", 0.0)
        with pytest.raises(DatasetError):
            PerplexityScore("p1", float("nan"))

    def test_mock_perplexities_deterministic(self):
        ps = posts(5)
        assert mock_perplexities(ps, seed=1) == mock_perplexities(ps, seed=1)
        assert mock_perplexities(ps, seed=1) != mock_perplexities(ps, seed=2)
