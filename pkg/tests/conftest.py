import os
import random

import numpy as np
import pytest
import torch

from sylstm.depgraph import ROOT, DependencyParse, build_graph, normalize
from sylstm.model import ModelConfig, SyLSTM
from sylstm.vocab import EmbeddingMatrix, PAD_TOKEN, UNK_TOKEN, Vocabulary

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")

torch.set_num_threads(1)


@pytest.fixture
def tweets_1k():
    with open(os.path.join(DATA_DIR, "tweets_1k.txt"), encoding="utf-8") as f:
        return f.read().splitlines()


def tiny_vocab(tokens=("aa", "bb", "cc", "dd")):
    return Vocabulary(id_to_token=(PAD_TOKEN, UNK_TOKEN, *tokens))


def tiny_model(d_w=4, hidden=2, gcn_out=3, ffnn_out=3, n_classes=2, seed=0,
               vocab_size=6, dtype=torch.float32):
    emb = EmbeddingMatrix(
        values=np.random.default_rng(seed).uniform(-0.5, 0.5, (vocab_size, d_w)).astype(np.float32),
        d_w=d_w)
    emb.values[0] = 0.0
    cfg = ModelConfig(d_w=d_w, lstm_hidden=hidden, gcn_out=gcn_out, ffnn_out=ffnn_out,
                      n_classes=n_classes, max_len=16)
    model = SyLSTM(cfg, emb, seed=seed)
    if dtype == torch.float64:
        model.double()
    return model


def random_tree(n, rng: random.Random) -> DependencyParse:
    """Uniform random rooted tree over n tokens."""
    heads = [ROOT] + [rng.randrange(0, i) for i in range(1, n)]
    order = list(range(n))
    return DependencyParse(tokens=tuple(f"w{i}" for i in order),
                           heads=tuple(heads),
                           relations=tuple("root" if h == ROOT else "dep" for h in heads))


def random_adjacency(n, rng: random.Random):
    return normalize(build_graph(random_tree(n, rng)))
