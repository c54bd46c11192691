"""The SyLSTM network.

Pipeline: embedding lookup -> 2-layer BiLSTM -> batch norm -> one graph
convolution over the normalized dependency adjacency -> ReLU FFNN ->
mean-pool over nodes -> concat with the BiLSTM final states (residual)
-> linear softmax classifier.

Sequences are packed so PAD positions never reach the recurrence, the graph
operator or the pooling. Graphs in a batch are packed block-diagonally (no
padding nodes), so batch norm over the node axis sees real nodes only.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, asdict

import numpy as np
import torch
import torch.nn as nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from .depgraph import NormalizedAdjacency
from .vocab import EmbeddingMatrix, PAD

logger = logging.getLogger(__name__)


class ModelError(Exception):
    pass


class IntegrityError(Exception):
    """Checkpoint contents are corrupted or inconsistent."""


@dataclass
class ModelConfig:
    d_w: int = 200
    lstm_hidden: int = 32        # per direction
    lstm_layers: int = 2
    lstm_dropout: float = 0.4
    bn_momentum: float = 0.6
    gcn_out: int = 32
    gcn_dropout: float = 0.5
    ffnn_out: int = 32
    n_classes: int = 2
    max_len: int = 64
    pooling: str = "mean"        # or "max"

    def __post_init__(self):
        if min(self.d_w, self.lstm_hidden, self.lstm_layers, self.gcn_out,
               self.ffnn_out, self.n_classes, self.max_len) < 1:
            raise ModelError("all dimensions must be >= 1")
        if not (0 <= self.lstm_dropout < 1 and 0 <= self.gcn_dropout < 1):
            raise ModelError("dropout rates must be in [0, 1)")
        if not 0 < self.bn_momentum < 1:
            raise ModelError("batch-norm momentum must be in (0, 1)")
        if self.pooling not in ("mean", "max"):
            raise ModelError(f"unknown pooling {self.pooling!r}")


@dataclass
class ForwardTrace:
    H_seq: torch.Tensor         # B x T x 2*lstm_hidden (zeros at PAD)
    h_final: torch.Tensor       # B x 2*lstm_hidden
    Z_gcn: torch.Tensor         # N_total x gcn_out (packed nodes)
    pooled: torch.Tensor        # B x ffnn_out
    logits: torch.Tensor        # B x n_classes
    probabilities: torch.Tensor  # B x n_classes


def adjacency_to_torch(adj: NormalizedAdjacency, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    coo = adj.matrix.tocoo()
    indices = torch.tensor(np.vstack([coo.row, coo.col]), dtype=torch.long)
    values = torch.tensor(coo.data, dtype=dtype)
    return torch.sparse_coo_tensor(indices, values, (adj.n, adj.n),
                                   check_invariants=False).coalesce()


class SyLSTM(nn.Module):

    def __init__(self, cfg: ModelConfig, embedding: EmbeddingMatrix, seed: int = 0):
        super().__init__()
        if embedding.d_w != cfg.d_w:
            raise ModelError(f"embedding dim {embedding.d_w} != config d_w {cfg.d_w}")
        self.cfg = cfg
        torch.manual_seed(seed)
        self.embedding = nn.Embedding.from_pretrained(
            torch.tensor(embedding.values, dtype=torch.float32),
            freeze=not embedding.trainable, padding_idx=PAD)
        self.lstm = nn.LSTM(cfg.d_w, cfg.lstm_hidden, num_layers=cfg.lstm_layers,
                            batch_first=True, bidirectional=True,
                            dropout=cfg.lstm_dropout if cfg.lstm_layers > 1 else 0.0)
        enc_dim = 2 * cfg.lstm_hidden
        self.bn1 = nn.BatchNorm1d(enc_dim, momentum=cfg.bn_momentum)
        self.gcn_weight = nn.Parameter(torch.empty(enc_dim, cfg.gcn_out))
        self.bn2 = nn.BatchNorm1d(cfg.gcn_out, momentum=cfg.bn_momentum)
        self.gcn_drop = nn.Dropout(cfg.gcn_dropout)
        self.ffnn = nn.Linear(cfg.gcn_out, cfg.ffnn_out)
        self.classifier = nn.Linear(cfg.ffnn_out + enc_dim, cfg.n_classes)
        self._init_weights()
        counts = self.parameter_counts()
        logger.info("trainable parameters: %d (%s)", counts["total"],
                    ", ".join(f"{k}={v}" for k, v in counts.items() if k != "total"))

    def _init_weights(self):
        for name, p in self.lstm.named_parameters():
            if "weight" in name:
                nn.init.xavier_uniform_(p)
            else:
                nn.init.zeros_(p)
        nn.init.xavier_uniform_(self.gcn_weight)
        for lin in (self.ffnn, self.classifier):
            nn.init.xavier_uniform_(lin.weight)
            nn.init.zeros_(lin.bias)

    def parameter_counts(self) -> dict[str, int]:
        blocks = {"embedding": self.embedding, "lstm": self.lstm, "bn1": self.bn1,
                  "bn2": self.bn2, "ffnn": self.ffnn, "classifier": self.classifier}
        counts = {k: sum(p.numel() for p in m.parameters() if p.requires_grad)
                  for k, m in blocks.items()}
        counts["gcn"] = self.gcn_weight.numel()
        counts["total"] = sum(counts.values())
        return counts

    def semantic_encode(self, ids: torch.Tensor, lengths: torch.Tensor
                        ) -> tuple[torch.Tensor, torch.Tensor]:
        """BiLSTM over the embedded sequences.

        Returns the layer-2 output sequence (zeros at PAD positions) and the
        concatenated final forward / backward hidden states per sequence.
        """
        if (lengths < 1).any():
            raise ModelError("all-PAD input sequence")
        if ids.size(1) > self.cfg.max_len:
            raise ModelError(f"sequence length {ids.size(1)} exceeds max_len {self.cfg.max_len}")
        emb = self.embedding(ids)
        packed = pack_padded_sequence(emb, lengths.cpu(), batch_first=True,
                                      enforce_sorted=False)
        out, (h_n, _) = self.lstm(packed)
        H_seq, _ = pad_packed_sequence(out, batch_first=True, total_length=ids.size(1))
        # h_n: (layers * 2, B, hidden); the last two rows are layer-2 fwd/bwd
        h_final = torch.cat([h_n[-2], h_n[-1]], dim=1)
        return H_seq, h_final

    def syntactic_encode(self, H_nodes: torch.Tensor, adj: torch.Tensor) -> torch.Tensor:
        """One graph convolution: ReLU(A_hat @ H @ W), then bn2 and dropout.

        H_nodes are the batch-normed BiLSTM features of the packed nodes.
        """
        if adj.shape[0] != H_nodes.shape[0]:
            raise ModelError(f"graph has {adj.shape[0]} nodes but features have "
                             f"{H_nodes.shape[0]} rows")
        support = H_nodes @ self.gcn_weight
        z = torch.relu(torch.sparse.mm(adj, support))
        z = self.bn2(z)
        return self.gcn_drop(z)

    def _pool(self, rows: torch.Tensor, sizes: list[int]) -> torch.Tensor:
        parts = torch.split(rows, sizes)
        if self.cfg.pooling == "mean":
            return torch.stack([p.mean(dim=0) for p in parts])
        return torch.stack([p.max(dim=0).values for p in parts])

    def forward(self, ids: torch.Tensor, lengths: torch.Tensor,
                adj: torch.Tensor, sizes: list[int]) -> ForwardTrace:
        """Full pass over a packed batch.

        ids: B x T padded token ids; lengths: real sequence lengths; adj:
        block-diagonal normalized adjacency over sum(sizes) packed nodes;
        sizes: nodes per graph (must equal the lengths, graph/sequence
        alignment is one-to-one).
        """
        if [int(l) for l in lengths] != list(sizes):
            raise ModelError("graph sizes do not match sequence lengths")
        H_seq, h_final = self.semantic_encode(ids, lengths)
        mask = (torch.arange(ids.size(1), device=ids.device)[None, :]
                < lengths[:, None].to(ids.device))
        nodes = H_seq[mask]                       # N_total x 2*hidden, packed
        nodes = self.bn1(nodes)
        Z = self.syntactic_encode(nodes, adj)
        pooled = self._pool(torch.relu(self.ffnn(Z)), list(sizes))
        logits = self.classifier(torch.cat([pooled, h_final], dim=1))
        probabilities = torch.softmax(logits, dim=1)
        return ForwardTrace(H_seq=H_seq, h_final=h_final, Z_gcn=Z,
                            pooled=pooled, logits=logits, probabilities=probabilities)

    def forward_single(self, ids: list[int], adj: NormalizedAdjacency) -> ForwardTrace:
        dtype = next(self.parameters()).dtype
        ids_t = torch.tensor([ids], dtype=torch.long)
        lengths = torch.tensor([len(ids)])
        return self.forward(ids_t, lengths, adjacency_to_torch(adj, dtype), [len(ids)])


def predict(model: SyLSTM, batches: list[tuple[list[int], NormalizedAdjacency]]) -> list[int]:
    """Argmax labels in eval mode; exact ties break to the lowest class index."""
    model.eval()
    out = []
    with torch.no_grad():
        for ids, adj in batches:
            probs = model.forward_single(ids, adj).probabilities[0].numpy()
            out.append(int(np.argmax(probs)))
    return out


def save_checkpoint(path: str, model: SyLSTM, vocab_hash: str, task: str = "") -> None:
    """npz container: little-endian float arrays keyed by parameter name,
    plus a JSON header with the model config, task id and vocabulary hash."""
    header = json.dumps({"config": asdict(model.cfg), "vocab_hash": vocab_hash,
                         "task": task})
    arrays = {k: v.detach().cpu().numpy() for k, v in model.state_dict().items()}
    np.savez(path, __header__=np.frombuffer(header.encode("utf-8"), dtype=np.uint8), **arrays)


def load_checkpoint(path: str) -> tuple[ModelConfig, dict[str, np.ndarray], str, str]:
    try:
        data = np.load(path)
        header = json.loads(bytes(data["__header__"]).decode("utf-8"))
        cfg = ModelConfig(**header["config"])
        state = {k: data[k] for k in data.files if k != "__header__"}
    except Exception as err:
        raise IntegrityError(f"cannot read checkpoint {path}: {err}")
    return cfg, state, header["vocab_hash"], header.get("task", "")


def model_from_checkpoint(path: str) -> tuple[SyLSTM, str, str]:
    cfg, state, vocab_hash, task = load_checkpoint(path)
    emb_values = state["embedding.weight"]
    model = SyLSTM(cfg, EmbeddingMatrix(values=emb_values, d_w=cfg.d_w, trainable=True))
    try:
        model.load_state_dict({k: torch.tensor(v) for k, v in state.items()})
    except Exception as err:
        raise IntegrityError(f"checkpoint state mismatch: {err}")
    return model, vocab_hash, task
