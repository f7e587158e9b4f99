"""Config parsing/validation, stage ordering, manifests, and the CLI surface."""

import json
from pathlib import Path

import pytest

from commprobe.cli import main
from commprobe.config import ConfigError, load_config
from commprobe.fixtures import make_fixture
from commprobe.pipeline import (
    StageError,
    check_requirements,
    generation_plan,
    run_stage,
    slugify,
)


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("fixture")
    make_fixture(d)
    return d


class TestConfig:
    def test_fixture_config_loads_with_resolved_paths(self, fixture_dir):
        cfg = load_config(fixture_dir / "config.toml")
        assert cfg.seed == 7
        assert Path(cfg.corpus).is_absolute()
        assert Path(cfg.corpus).exists()
        assert cfg.backends["generator_finetuned"].kind == "mock"
        assert cfg.tweets_per_topic == 20

    def test_cli_overrides_win(self, fixture_dir, tmp_path):
        cfg = load_config(fixture_dir / "config.toml", seed=123, out=str(tmp_path / "o"))
        assert cfg.seed == 123
        assert cfg.out == str(tmp_path / "o")

    def test_env_overrides(self, fixture_dir, monkeypatch):
        monkeypatch.setenv("COMMPROBE_RUN__SEED", "99")
        monkeypatch.setenv("COMMPROBE_SAMPLING__TWEETS_PER_TOPIC", "5")
        cfg = load_config(fixture_dir / "config.toml")
        assert cfg.seed == 99
        assert cfg.tweets_per_topic == 5

    def test_validation_reports_every_error_at_once(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text(
            "\n".join(
                [
                    "[paths]",
                    'corpus = "missing.jsonl"',
                    "[sampling]",
                    "temperature = 3.0",
                    "[dataset]",
                    "split = 1.5",
                ]
            )
        )
        with pytest.raises(ConfigError) as err:
            load_config(bad)
        assert len(err.value.errors) == 3

    def test_default_config_is_valid(self):
        cfg = load_config(None)
        assert cfg.quality_cap == 10_000
        assert cfg.toxicity_threshold == 0.05
        assert cfg.per_community == 3_000


class TestStageOrdering:
    def test_screen_before_dataset_names_prerequisite(self, fixture_dir, tmp_path):
        cfg = load_config(fixture_dir / "config.toml", out=str(tmp_path / "out"))
        run_stage(cfg, "ingest")
        run_stage(cfg, "detect")
        with pytest.raises(StageError, match=r"requires.*dataset.*run 'build-dataset' first"):
            check_requirements(cfg, "screen")

    def test_detect_before_ingest(self, fixture_dir, tmp_path):
        cfg = load_config(fixture_dir / "config.toml", out=str(tmp_path / "out"))
        with pytest.raises(StageError, match=r"run 'ingest' first"):
            run_stage(cfg, "detect")

    def test_screen_with_nothing_names_detect_first(self, fixture_dir, tmp_path):
        cfg = load_config(fixture_dir / "config.toml", out=str(tmp_path / "out"))
        with pytest.raises(StageError, match=r"run 'detect' first"):
            check_requirements(cfg, "screen")


class TestManifests:
    def test_manifest_written_with_checksums(self, fixture_dir, tmp_path):
        cfg = load_config(fixture_dir / "config.toml", out=str(tmp_path / "out"))
        assert run_stage(cfg, "ingest") == 0
        manifest = json.loads((tmp_path / "out/manifests/ingest.json").read_text())
        assert manifest["stage"] == "ingest"
        assert manifest["seed"] == 7
        assert "corpus/posts.jsonl" in manifest["outputs"]
        assert all(len(h) == 64 for h in manifest["outputs"].values())
        assert manifest["duration_s"] >= 0

    def test_each_artifact_owned_by_one_manifest(self, fixture_dir, tmp_path):
        cfg = load_config(fixture_dir / "config.toml", out=str(tmp_path / "out"))
        run_stage(cfg, "ingest")
        run_stage(cfg, "detect")
        owners: dict[str, int] = {}
        for mf in (tmp_path / "out/manifests").glob("*.json"):
            for rel in json.loads(mf.read_text())["outputs"]:
                owners[rel] = owners.get(rel, 0) + 1
        files = {
            str(p.relative_to(tmp_path / "out"))
            for p in (tmp_path / "out").rglob("*")
            if p.is_file() and "manifests" not in p.parts
        }
        assert set(owners) == files
        assert all(count == 1 for count in owners.values())


class TestCli:
    def test_missing_config_exits_2(self, capsys):
        assert main(["ingest", "--config", "/nonexistent/config.toml"]) == 2

    def test_stage_error_exits_2(self, fixture_dir, tmp_path, capsys):
        out = str(tmp_path / "out")
        assert main(["ingest", "--config", str(fixture_dir / "config.toml"), "--out", out]) == 0
        assert main(["detect", "--config", str(fixture_dir / "config.toml"), "--out", out]) == 0
        code = main(["screen", "--config", str(fixture_dir / "config.toml"), "--out", out])
        assert code == 2
        assert "run 'build-dataset' first" in capsys.readouterr().err

    def test_domain_error_reported_cleanly(self, fixture_dir, tmp_path, capsys, monkeypatch):
        bad_grouping = tmp_path / "grouping.json"
        bad_grouping.write_text('{"Body Image": [99]}')
        monkeypatch.setenv("COMMPROBE_PATHS__GROUPING", str(bad_grouping))
        out = str(tmp_path / "out")
        config = str(fixture_dir / "config.toml")
        assert main(["ingest", "--config", config, "--out", out]) == 0
        assert main(["detect", "--config", config, "--out", out]) == 2
        assert "unknown community 99" in capsys.readouterr().err

    def test_ingest_subcommand_runs(self, fixture_dir, tmp_path):
        code = main(
            [
                "ingest",
                "--config",
                str(fixture_dir / "config.toml"),
                "--out",
                str(tmp_path / "out"),
            ]
        )
        assert code == 0
        assert (tmp_path / "out/corpus/posts.jsonl").exists()


class TestPlanning:
    def test_default_topic_list_yields_6800_per_community_per_tag(self):
        cfg = load_config(None)
        topics = [
            l.strip()
            for l in cfg.topics_path().read_text().splitlines()
            if l.strip() and not l.startswith("#")
        ]
        assert len(topics) == 17
        assert generation_plan(len(topics), cfg.tweets_per_topic) == 6800

    def test_slugify(self):
        assert slugify("Pro Eating Disorder") == "pro-eating-disorder"
        assert slugify("Keto & Diet") == "keto-diet"
