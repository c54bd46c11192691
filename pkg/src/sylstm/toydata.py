"""Deterministic synthetic fixtures: a linearly separable two-class tweet
corpus with chain dependency parses. Used by the test suite and as the
bundled smoke fixture for the CLI.
"""

from __future__ import annotations

import os
import random
from dataclasses import dataclass

from .depgraph import ROOT, DependencyParse, write_conllu

_OFF_WORDS = ["zork", "grum", "vexil", "drax", "snarl", "krud"]
_NOT_WORDS = ["bliv", "miro", "selda", "plum", "quen", "loft"]
_FILLER = ["the", "a", "is", "so", "very", "and", "today", "now"]

CLASSES = ("NOT", "OFF")


@dataclass(frozen=True)
class ToyExample:
    id: str
    tokens: tuple[str, ...]
    label: str


def chain_parse(tokens: tuple[str, ...]) -> DependencyParse:
    """Each token depends on its predecessor; the first token is the root."""
    heads = tuple(ROOT if i == 0 else i - 1 for i in range(len(tokens)))
    rels = tuple("root" if h == ROOT else "dep" for h in heads)
    return DependencyParse(tokens=tokens, heads=heads, relations=rels)


def make_toy_corpus(n: int = 200, seed: int = 13) -> list[ToyExample]:
    rng = random.Random(seed)
    out = []
    for i in range(n):
        label = CLASSES[i % 2]
        pool = _OFF_WORDS if label == "OFF" else _NOT_WORDS
        length = rng.randint(5, 8)
        n_class = max(3, length - 3)
        tokens = [rng.choice(pool) for _ in range(n_class)]
        tokens += [rng.choice(_FILLER) for _ in range(length - n_class)]
        rng.shuffle(tokens)
        out.append(ToyExample(id=f"toy{i:04d}", tokens=tuple(tokens), label=label))
    return out


def write_toy_files(directory: str, n: int = 200, seed: int = 13) -> dict[str, str]:
    """Write the toy corpus as an OLID-format TSV plus aligned CoNLL-U parses.

    Returns the paths of the written files.
    """
    os.makedirs(directory, exist_ok=True)
    corpus = make_toy_corpus(n, seed)
    tsv_path = os.path.join(directory, "toy_train.tsv")
    conllu_path = os.path.join(directory, "toy_train.conllu")
    with open(tsv_path, "w", encoding="utf-8") as f:
        f.write("id\ttweet\tsubtask_a\tsubtask_b\tsubtask_c\n")
        for ex in corpus:
            f.write(f"{ex.id}\t{' '.join(ex.tokens)}\t{ex.label}\tNULL\tNULL\n")
    write_conllu(conllu_path, [chain_parse(ex.tokens) for ex in corpus])
    return {"tsv": tsv_path, "conllu": conllu_path}
