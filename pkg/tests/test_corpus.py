import json
from collections import Counter

import pytest

from sylstm.corpus import (CorpusError, DatasetSplit, LabeledExample, load_davidson,
                           load_olid, make_split, split_from_manifest)


def write_olid(path, rows):
    lines = ["id\ttweet\tsubtask_a\tsubtask_b\tsubtask_c"]
    lines += ["\t".join(r) for r in rows]
    path.write_text("\n".join(lines) + "\n")


def write_davidson(path, rows):
    lines = [",count,hate_speech,offensive_language,neither,class,tweet"]
    lines += [f"{i},3,0,3,0,{cls},{tweet}" for i, (cls, tweet) in enumerate(rows)]
    path.write_text("\n".join(lines) + "\n")


class TestLoadOlid:
    def test_basic(self, tmp_path):
        f = tmp_path / "olid.tsv"
        write_olid(f, [
            ("1", "hello there", "NOT", "NULL", "NULL"),
            ("2", "bad tweet", "OFF", "TIN", "IND"),
            ("3", "meh", "OFF", "UNT", "NULL"),
        ])
        a = load_olid(str(f), task="A")
        assert len(a) == 3
        b = load_olid(str(f), task="B")
        assert [e.id for e in b] == ["2", "3"]
        c = load_olid(str(f), task="C")
        assert [e.id for e in c] == ["2"]
        assert c[0].task_labels == {"A": "OFF", "B": "TIN", "C": "IND"}

    def test_empty_file_with_header(self, tmp_path):
        f = tmp_path / "olid.tsv"
        write_olid(f, [])
        assert load_olid(str(f), task="A") == []

    def test_bad_label_names_line(self, tmp_path):
        f = tmp_path / "olid.tsv"
        write_olid(f, [("1", "x", "XYZ", "NULL", "NULL")])
        with pytest.raises(CorpusError, match="line 2"):
            load_olid(str(f), task="A")

    def test_missing_file(self):
        with pytest.raises(OSError):
            load_olid("/nonexistent/olid.tsv", task="A")


class TestLoadDavidson:
    def test_class_mapping(self, tmp_path):
        f = tmp_path / "d.csv"
        write_davidson(f, [("0", "one"), ("1", "two"), ("2", "three")])
        examples = load_davidson(str(f))
        assert [e.task_labels["D3"] for e in examples] == ["HATE", "OFF", "NONE"]

    def test_empty(self, tmp_path):
        f = tmp_path / "d.csv"
        write_davidson(f, [])
        assert load_davidson(str(f)) == []

    def test_bad_class(self, tmp_path):
        f = tmp_path / "d.csv"
        write_davidson(f, [("7", "bad")])
        with pytest.raises(CorpusError, match="line 2"):
            load_davidson(str(f))


class TestHierarchy:
    def test_b_requires_a_off(self):
        with pytest.raises(CorpusError):
            LabeledExample(id="x", raw="t", task_labels={"A": "NOT", "B": "TIN"})

    def test_c_requires_b_tin(self):
        with pytest.raises(CorpusError):
            LabeledExample(id="x", raw="t", task_labels={"A": "OFF", "B": "UNT", "C": "IND"})

    def test_bad_alphabet(self):
        with pytest.raises(CorpusError):
            LabeledExample(id="x", raw="t", task_labels={"A": "MAYBE"})


def two_class_examples(n_not=60, n_off=40):
    out = [LabeledExample(id=f"n{i}", raw="t", task_labels={"A": "NOT"})
           for i in range(n_not)]
    out += [LabeledExample(id=f"o{i}", raw="t", task_labels={"A": "OFF"})
            for i in range(n_off)]
    return out


class TestMakeSplit:
    def test_stratified_counts(self):
        split = make_split(two_class_examples(), "A", dev_fraction=0.10, seed=7,
                           test_examples=[])
        counts = Counter(e.task_labels["A"] for e in split.dev)
        assert counts == {"NOT": 6, "OFF": 4}
        assert len(split.train) == 90

    def test_fraction_zero_rejected(self):
        with pytest.raises(CorpusError):
            make_split(two_class_examples(), "A", dev_fraction=0.0, seed=1)

    def test_determinism(self):
        a = make_split(two_class_examples(), "A", seed=3, test_examples=[])
        b = make_split(two_class_examples(), "A", seed=3, test_examples=[])
        assert [e.id for e in a.dev] == [e.id for e in b.dev]
        assert [e.id for e in a.train] == [e.id for e in b.train]

    def test_disjoint_partitions(self):
        split = make_split(two_class_examples(), "A", seed=5)
        ids = [e.id for part in (split.train, split.dev, split.test) for e in part]
        assert len(ids) == len(set(ids)) == 100

    def test_heldout_test_when_no_predefined(self):
        split = make_split(two_class_examples(), "A", seed=5)
        counts = Counter(e.task_labels["A"] for e in split.test)
        assert counts == {"NOT": 6, "OFF": 4}

    def test_small_class_kept_whole(self):
        examples = two_class_examples(n_not=20, n_off=0)
        examples.append(LabeledExample(id="solo", raw="t", task_labels={"A": "OFF"}))
        with pytest.warns(UserWarning, match="fewer than 2"):
            split = make_split(examples, "A", seed=1, test_examples=[])
        assert all(e.task_labels["A"] == "NOT" for e in split.dev)
        assert any(e.id == "solo" for e in split.train)

    def test_manifest_round_trip(self, tmp_path):
        examples = two_class_examples()
        split = make_split(examples, "A", seed=11)
        path = tmp_path / "split.json"
        split.save_manifest(str(path))
        reloaded = split_from_manifest(str(path), examples)
        for part in ("train", "dev", "test"):
            assert [e.id for e in getattr(reloaded, part)] == \
                   [e.id for e in getattr(split, part)]

    def test_manifest_fields(self, tmp_path):
        split = make_split(two_class_examples(), "A", seed=2)
        m = split.manifest()
        assert set(m) == {"seed", "dev_fraction", "train_ids", "dev_ids", "test_ids"}
