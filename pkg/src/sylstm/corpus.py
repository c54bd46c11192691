"""Dataset ingestion and reproducible train/dev/test splitting.

Two benchmark formats are supported: the hierarchical offensive-language
TSV (subtasks A: OFF/NOT, B: TIN/UNT, C: IND/GRP/OTH) and the 3-class
hate/offensive/neither CSV (task id D3). Splits are stratified and fully
determined by (seed, dev_fraction); a JSON manifest of example ids makes
them round-trippable.
"""

from __future__ import annotations

import csv
import json
import random
import warnings
from dataclasses import dataclass, field

TASK_CLASSES: dict[str, tuple[str, ...]] = {
    "A": ("NOT", "OFF"),
    "B": ("TIN", "UNT"),
    "C": ("IND", "GRP", "OTH"),
    "D3": ("HATE", "OFF", "NONE"),
}

_NULL_TOKENS = {"", "NULL", "null", "NaN"}


class CorpusError(Exception):
    """Malformed dataset file or row."""


@dataclass(frozen=True)
class LabeledExample:
    id: str
    raw: str
    task_labels: dict[str, str]

    def __post_init__(self):
        for task, label in self.task_labels.items():
            if task not in TASK_CLASSES:
                raise CorpusError(f"example {self.id}: unknown task {task!r}")
            if label not in TASK_CLASSES[task]:
                raise CorpusError(f"example {self.id}: label {label!r} invalid for task {task}")
        if "B" in self.task_labels and self.task_labels.get("A") != "OFF":
            raise CorpusError(f"example {self.id}: subtask B label requires A == OFF")
        if "C" in self.task_labels and self.task_labels.get("B") != "TIN":
            raise CorpusError(f"example {self.id}: subtask C label requires B == TIN")


@dataclass
class DatasetSplit:
    train: list[LabeledExample]
    dev: list[LabeledExample]
    test: list[LabeledExample]
    seed: int
    dev_fraction: float = 0.10

    def manifest(self) -> dict:
        return {
            "seed": self.seed,
            "dev_fraction": self.dev_fraction,
            "train_ids": [e.id for e in self.train],
            "dev_ids": [e.id for e in self.dev],
            "test_ids": [e.id for e in self.test],
        }

    def save_manifest(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.manifest(), f, indent=1)


def split_from_manifest(path: str, examples: list[LabeledExample]) -> DatasetSplit:
    """Rebuild a split from its id manifest."""
    with open(path, encoding="utf-8") as f:
        m = json.load(f)
    by_id = {e.id: e for e in examples}
    def pick(ids):
        missing = [i for i in ids if i not in by_id]
        if missing:
            raise CorpusError(f"manifest references unknown ids: {missing[:5]}")
        return [by_id[i] for i in ids]
    return DatasetSplit(
        train=pick(m["train_ids"]), dev=pick(m["dev_ids"]), test=pick(m["test_ids"]),
        seed=m["seed"], dev_fraction=m["dev_fraction"],
    )


def load_olid(path: str, task: str) -> list[LabeledExample]:
    """Load the hierarchical TSV, keeping rows with a non-null label for `task`.

    Expected header: id, tweet, subtask_a, subtask_b, subtask_c.
    """
    if task not in ("A", "B", "C"):
        raise CorpusError(f"task {task!r} not defined for this dataset")
    out = []
    with open(path, encoding="utf-8") as f:
        reader = csv.DictReader(f, delimiter="\t")
        required = {"id", "tweet", "subtask_a"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise CorpusError(f"{path}: missing required columns {sorted(required)}")
        for lineno, row in enumerate(reader, start=2):
            if any(row.get(k) is None for k in required):
                raise CorpusError(f"{path} line {lineno}: wrong column count")
            labels: dict[str, str] = {}
            for task_id, col in (("A", "subtask_a"), ("B", "subtask_b"), ("C", "subtask_c")):
                value = (row.get(col) or "").strip()
                if value in _NULL_TOKENS:
                    continue
                if value not in TASK_CLASSES[task_id]:
                    raise CorpusError(f"{path} line {lineno}: bad {col} label {value!r}")
                labels[task_id] = value
            try:
                ex = LabeledExample(id=str(row["id"]), raw=row["tweet"], task_labels=labels)
            except CorpusError as err:
                raise CorpusError(f"{path} line {lineno}: {err}")
            if task in ex.task_labels:
                out.append(ex)
    return out


def load_davidson(path: str) -> list[LabeledExample]:
    """Load the 3-class CSV (class column: 0=HATE, 1=OFF, 2=NONE) as task D3."""
    class_map = {"0": "HATE", "1": "OFF", "2": "NONE"}
    out = []
    with open(path, encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or "class" not in reader.fieldnames or "tweet" not in reader.fieldnames:
            raise CorpusError(f"{path}: expected CSV with 'class' and 'tweet' columns")
        id_col = reader.fieldnames[0] if reader.fieldnames[0] not in ("class", "tweet") else None
        for lineno, row in enumerate(reader, start=2):
            cls = (row.get("class") or "").strip()
            if cls not in class_map:
                raise CorpusError(f"{path} line {lineno}: bad class value {cls!r}")
            ex_id = str(row[id_col]) if id_col and row.get(id_col) not in (None, "") else str(lineno - 2)
            out.append(LabeledExample(id=ex_id, raw=row["tweet"], task_labels={"D3": class_map[cls]}))
    return out


def _stratified_take(examples: list[LabeledExample], task: str, fraction: float,
                     rng: random.Random) -> tuple[list[LabeledExample], list[LabeledExample]]:
    """Take a stratified `fraction` per class; returns (taken, rest) in stable order."""
    by_class: dict[str, list[LabeledExample]] = {}
    for ex in examples:
        by_class.setdefault(ex.task_labels[task], []).append(ex)
    taken_ids = set()
    for cls in sorted(by_class):
        members = by_class[cls]
        if len(members) < 2:
            warnings.warn(f"class {cls!r} has fewer than 2 members; kept whole in train")
            continue
        idx = list(range(len(members)))
        rng.shuffle(idx)
        n_take = int(round(fraction * len(members)))
        taken_ids.update(members[i].id for i in idx[:n_take])
    taken = [e for e in examples if e.id in taken_ids]
    rest = [e for e in examples if e.id not in taken_ids]
    return taken, rest


def make_split(examples: list[LabeledExample], task: str, dev_fraction: float = 0.10,
               seed: int = 0, test_examples: list[LabeledExample] | None = None,
               test_fraction: float = 0.10) -> DatasetSplit:
    """Stratified, seeded split.

    When the dataset ships a predefined test set, pass it as `test_examples`;
    otherwise a stratified `test_fraction` is held out first. The dev set is
    then `dev_fraction` of the remaining training portion.
    """
    if not examples:
        raise CorpusError("no examples to split")
    if not 0 < dev_fraction < 1:
        raise CorpusError(f"dev_fraction must be in (0,1), got {dev_fraction}")
    rng = random.Random(seed)
    if test_examples is None:
        test, pool = _stratified_take(examples, task, test_fraction, rng)
    else:
        test, pool = list(test_examples), list(examples)
    dev, train = _stratified_take(pool, task, dev_fraction, rng)
    return DatasetSplit(train=train, dev=dev, test=test, seed=seed, dev_fraction=dev_fraction)
