import json

import pytest

from gdd.data import (
    DataError,
    Example,
    class_counts,
    example_to_dict,
    generate_synthetic,
    load_dataset,
    save_dataset,
)

GOOD_LINE = {
    "tokens": ["the", "staff", "was", "very", "rude"],
    "aspect_start": 1,
    "aspect_end": 2,
    "label": "negative",
    "dep_heads": [2, 5, 5, 5, 0],
    "dep_rels": ["det", "nsubj", "cop", "advmod", "root"],
}


def write_jsonl(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records))
    return path


class TestLoadDataset:
    def test_round_trip_fixture(self, tmp_path):
        path = write_jsonl(tmp_path / "d.jsonl", [GOOD_LINE])
        examples = load_dataset(path)
        assert len(examples) == 1
        ex = examples[0]
        assert ex.tokens[ex.aspect_start:ex.aspect_end] == ["staff"]
        assert ex.label_id == 2

    def test_conflict_label_rejected(self, tmp_path):
        bad = dict(GOOD_LINE, label="conflict")
        path = write_jsonl(tmp_path / "d.jsonl", [bad])
        with pytest.raises(DataError, match="label.*conflict"):
            load_dataset(path)

    def test_missing_field_named_with_line(self, tmp_path):
        bad = {k: v for k, v in GOOD_LINE.items() if k != "dep_rels"}
        path = write_jsonl(tmp_path / "d.jsonl", [GOOD_LINE, bad])
        with pytest.raises(DataError, match=r":2: missing field.*dep_rels"):
            load_dataset(path)

    def test_unknown_field_rejected(self, tmp_path):
        bad = dict(GOOD_LINE, extra=1)
        path = write_jsonl(tmp_path / "d.jsonl", [bad])
        with pytest.raises(DataError, match="unknown field.*extra"):
            load_dataset(path)

    def test_invalid_span(self, tmp_path):
        bad = dict(GOOD_LINE, aspect_start=4, aspect_end=4)
        path = write_jsonl(tmp_path / "d.jsonl", [bad])
        with pytest.raises(DataError, match="aspect span"):
            load_dataset(path)

    def test_invalid_tree(self, tmp_path):
        bad = dict(GOOD_LINE, dep_heads=[2, 1, 5, 5, 0])
        path = write_jsonl(tmp_path / "d.jsonl", [bad])
        with pytest.raises(DataError, match="dep_heads"):
            load_dataset(path)

    def test_malformed_field_value(self, tmp_path):
        bad = dict(GOOD_LINE, dep_heads=["x", 5, 5, 5, 0])
        path = write_jsonl(tmp_path / "d.jsonl", [bad])
        with pytest.raises(DataError, match=":1: malformed field"):
            load_dataset(path)

    def test_invalid_json_line_number(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text(json.dumps(GOOD_LINE) + "\n{broken\n")
        with pytest.raises(DataError, match=":2: invalid JSON"):
            load_dataset(path)

    def test_save_load_round_trip(self, tmp_path):
        examples = generate_synthetic(seed=4, count=9)
        path = tmp_path / "d.jsonl"
        save_dataset(path, examples)
        loaded = load_dataset(path)
        assert [example_to_dict(e) for e in loaded] == [example_to_dict(e) for e in examples]


class TestSyntheticGenerator:
    def test_deterministic(self):
        a = generate_synthetic(seed=7, count=12)
        b = generate_synthetic(seed=7, count=12)
        assert [example_to_dict(x) for x in a] == [example_to_dict(x) for x in b]

    def test_balanced_labels(self):
        counts = class_counts(generate_synthetic(seed=7, count=30))
        assert counts == {"positive": 10, "neutral": 10, "negative": 10}

    def test_trees_valid_and_spans_in_range(self):
        for ex in generate_synthetic(seed=8, count=40):
            ex.validate()

    def test_template_variety(self):
        lengths = {len(ex.tokens) for ex in generate_synthetic(seed=9, count=40)}
        assert len(lengths) >= 3  # near, far, compound, contrast templates all appear

    def test_seeds_differ(self):
        a = generate_synthetic(seed=1, count=10)
        b = generate_synthetic(seed=2, count=10)
        assert [example_to_dict(x) for x in a] != [example_to_dict(x) for x in b]


def test_example_validalign_aspect_span_inclusive():
    ex = Example(**{k: v for k, v in GOOD_LINE.items()})
    assert ex.aspect_span_inclusive == (1, 1)
