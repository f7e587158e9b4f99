"""CLI surface of the tuner."""

import json

from commtuner.cli import main


def test_tune_subcommand(tmp_path, capsys):
    rows = [
        {"instruction": f"Say {i}.", "input": "", "output": f"ok-{i}"} for i in range(8)
    ]
    ds = tmp_path / "train.json"
    ds.write_text(json.dumps(rows))
    out = tmp_path / "model"
    code = main(
        [
            "tune",
            "--dataset",
            str(ds),
            "--base",
            "tiny",
            "--epochs",
            "1",
            "--batch-size",
            "4",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    assert (out / "weights.pt").exists()
    assert "epoch mean loss" in capsys.readouterr().out


def test_tune_reports_dataset_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps([{"instruction": "", "input": "", "output": "x"}]))
    code = main(["tune", "--dataset", str(bad), "--out", str(tmp_path / "m")])
    assert code == 2
    assert "row 0" in capsys.readouterr().err
