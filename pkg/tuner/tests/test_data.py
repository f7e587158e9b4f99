"""Dataset contract validation."""

import json

import pytest

from commtuner.data import DatasetError, load_alpaca, render_example


def write(tmp_path, rows):
    path = tmp_path / "data.json"
    path.write_text(json.dumps(rows))
    return path


def test_valid_file_loads(tmp_path):
    rows = [{"instruction": "Do x.", "input": "", "output": "done"}]
    assert load_alpaca(write(tmp_path, rows)) == rows


def test_missing_file(tmp_path):
    with pytest.raises(DatasetError, match="not found"):
        load_alpaca(tmp_path / "nope.json")


def test_not_a_list(tmp_path):
    path = tmp_path / "data.json"
    path.write_text('{"instruction": "x"}')
    with pytest.raises(DatasetError, match="array"):
        load_alpaca(path)


def test_rejection_names_row(tmp_path):
    rows = [
        {"instruction": "ok", "input": "", "output": "ok"},
        {"instruction": "ok", "input": "", "output": "ok"},
        {"instruction": "", "input": "", "output": "ok"},
    ]
    with pytest.raises(DatasetError, match="row 2"):
        load_alpaca(write(tmp_path, rows))


def test_missing_key_named(tmp_path):
    rows = [{"instruction": "ok", "output": "ok"}]
    with pytest.raises(DatasetError, match=r"row 0: missing key 'input'"):
        load_alpaca(write(tmp_path, rows))


def test_unexpected_keys_rejected(tmp_path):
    rows = [{"instruction": "ok", "input": "", "output": "ok", "extra": 1}]
    with pytest.raises(DatasetError, match="unexpected keys"):
        load_alpaca(write(tmp_path, rows))


def test_non_string_value_rejected(tmp_path):
    rows = [{"instruction": "ok", "input": 3, "output": "ok"}]
    with pytest.raises(DatasetError, match="row 0"):
        load_alpaca(write(tmp_path, rows))


def test_render_example_folds_input():
    assert render_example({"instruction": "a", "input": "b", "output": "c"}) == ("a\n\nb", "c")
    assert render_example({"instruction": "a", "input": "", "output": "c"}) == ("a", "c")
