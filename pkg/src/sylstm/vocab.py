"""Token vocabulary and embedding lookup table.

The vocabulary is built from the parser tokenization of cleaned tweets so
sequence positions and dependency-graph nodes stay aligned. Ids 0 and 1 are
reserved for PAD and UNK; the PAD embedding row is frozen at zero and
masked out of the encoders.
"""

from __future__ import annotations

import hashlib
import json
import logging
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

PAD, UNK = 0, 1
PAD_TOKEN, UNK_TOKEN = "<pad>", "<unk>"

logger = logging.getLogger(__name__)


class VocabError(Exception):
    pass


@dataclass(frozen=True)
class Vocabulary:
    id_to_token: tuple[str, ...]
    token_to_id: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if self.id_to_token[:2] != (PAD_TOKEN, UNK_TOKEN):
            raise VocabError("ids 0 and 1 must be the PAD and UNK specials")
        object.__setattr__(self, "token_to_id",
                           {t: i for i, t in enumerate(self.id_to_token)})
        if len(self.token_to_id) != len(self.id_to_token):
            raise VocabError("duplicate tokens in vocabulary")

    def __len__(self) -> int:
        return len(self.id_to_token)

    def to_json(self) -> str:
        return json.dumps(list(self.id_to_token), ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> "Vocabulary":
        return cls(id_to_token=tuple(json.loads(text)))

    def sha256(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()


@dataclass
class EmbeddingMatrix:
    values: np.ndarray  # |V| x d_w
    d_w: int
    trainable: bool = True

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != self.d_w:
            raise VocabError(f"embedding shape {self.values.shape} does not match d_w={self.d_w}")
        if not np.isfinite(self.values).all():
            raise VocabError("embedding matrix contains non-finite entries")


def build_vocab(token_lists: list[list[str]], max_size: int = 30_000) -> Vocabulary:
    """Frequency-ranked vocabulary (ties broken lexicographically), capped at max_size."""
    counts = Counter()
    for tokens in token_lists:
        counts.update(tokens)
    if not counts:
        raise VocabError("cannot build a vocabulary from an empty corpus")
    ranked = sorted(counts, key=lambda t: (-counts[t], t))[:max_size]
    return Vocabulary(id_to_token=(PAD_TOKEN, UNK_TOKEN, *ranked))


def encode(tokens: list[str], vocab: Vocabulary) -> list[int]:
    """Map tokens to ids, sending out-of-vocabulary tokens to UNK."""
    return [vocab.token_to_id.get(t, UNK) for t in tokens]


def random_embeddings(vocab: Vocabulary, d_w: int, seed: int = 0) -> EmbeddingMatrix:
    """Uniform(-0.05, 0.05) embeddings with a zero PAD row."""
    if d_w < 1:
        raise VocabError(f"d_w must be >= 1, got {d_w}")
    rng = np.random.default_rng(seed)
    values = rng.uniform(-0.05, 0.05, size=(len(vocab), d_w)).astype(np.float32)
    values[PAD] = 0.0
    return EmbeddingMatrix(values=values, d_w=d_w, trainable=True)


def load_glove(path: str, vocab: Vocabulary, d_w: int = 200, seed: int = 0,
               trainable: bool = True) -> EmbeddingMatrix:
    """Copy pretrained rows for in-vocabulary tokens from a GloVe text file.

    Missing tokens and UNK are initialized uniform(-0.05, 0.05) under the run
    seed; the PAD row is zero. Logs the fraction of the vocabulary covered.
    """
    emb = random_embeddings(vocab, d_w, seed)
    found = 0
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                continue
            token = parts[0]
            idx = vocab.token_to_id.get(token)
            if idx is None or idx == PAD:
                continue
            if len(parts) - 1 != d_w:
                raise VocabError(
                    f"{path} line {lineno}: expected {d_w} values, found {len(parts) - 1}")
            emb.values[idx] = np.asarray(parts[1:], dtype=np.float32)
            found += 1
    coverage = found / max(1, len(vocab) - 2)
    logger.info("GloVe coverage: %d/%d tokens (%.1f%%)", found, len(vocab) - 2, 100 * coverage)
    emb.trainable = trainable
    return emb
