"""Mini-batch training: cross-entropy loss, decoupled-weight-decay Adam,
cosine-annealed learning rate and dev-set model selection by weighted F1.

The decay term never touches batch-norm scale/shift or bias vectors, and
the PAD embedding row is excluded from all updates. Gradients are clipped
at global norm 5.0 to protect the sparse-graph pathway.
"""

from __future__ import annotations

import copy
import logging
import math
import random
import warnings
from dataclasses import dataclass, field

import numpy as np
import torch

from .depgraph import NormalizedAdjacency, batch_graphs
from .evaluation import weighted_metrics
from .model import SyLSTM, adjacency_to_torch
from .vocab import PAD

logger = logging.getLogger(__name__)

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
CLIP_NORM = 5.0
PROB_FLOOR = 1e-12


class TrainError(Exception):
    pass


@dataclass
class TrainConfig:
    lr0: float = 0.001
    weight_decay: float = 0.1
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0
    coupled_l2: bool = False   # add weight_decay as an L2 term in the loss instead

    def __post_init__(self):
        if self.lr0 <= 0:
            raise TrainError("lr0 must be positive")
        if self.epochs < 1:
            raise TrainError("epochs must be >= 1")
        if self.batch_size < 1:
            raise TrainError("batch_size must be >= 1")


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    dev_loss: list[float] = field(default_factory=list)
    dev_wf1: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    best_epoch: int = -1

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,dev_loss,dev_wf1,lr"]
        for i in range(len(self.train_loss)):
            lines.append(f"{i},{self.train_loss[i]:.6f},{self.dev_loss[i]:.6f},"
                         f"{self.dev_wf1[i]:.6f},{self.lr[i]:.8f}")
        return "\n".join(lines) + "\n"


def cross_entropy(probabilities: torch.Tensor, gold: torch.Tensor) -> torch.Tensor:
    """Mean of -log p[gold] over the batch, clamping p at 1e-12."""
    p = probabilities.gather(1, gold.view(-1, 1)).squeeze(1)
    if bool((p < PROB_FLOOR).any()):
        warnings.warn("gold-class probability underflow; clamped at 1e-12")
    return -(p.clamp_min(PROB_FLOOR)).log().mean()


def cosine_lr(step: int, total_steps: int, lr0: float) -> float:
    """Cosine annealing from lr0 to 0 over total_steps, no warm restarts."""
    if not 0 <= step <= total_steps:
        raise TrainError(f"step {step} outside [0, {total_steps}]")
    return 0.5 * lr0 * (1.0 + math.cos(math.pi * step / total_steps))


def adamw_step(param: torch.Tensor, grad: torch.Tensor, state: dict,
               lr_t: float, weight_decay: float,
               betas: tuple[float, float] = ADAM_BETAS, eps: float = ADAM_EPS) -> None:
    """One in-place AdamW update for a single tensor.

    state carries 'step', 'm' and 'v'; the decay term -lr_t * wd * theta is
    applied additively (decoupled from the adaptive update).
    """
    if not torch.isfinite(grad).all():
        raise TrainError("non-finite gradient encountered; step aborted")
    if "m" not in state:
        state["m"] = torch.zeros_like(param)
        state["v"] = torch.zeros_like(param)
        state["step"] = 0
    state["step"] += 1
    b1, b2 = betas
    state["m"].mul_(b1).add_(grad, alpha=1 - b1)
    state["v"].mul_(b2).addcmul_(grad, grad, value=1 - b2)
    m_hat = state["m"] / (1 - b1 ** state["step"])
    v_hat = state["v"] / (1 - b2 ** state["step"])
    with torch.no_grad():
        if weight_decay:
            param.add_(param, alpha=-lr_t * weight_decay)
        param.addcdiv_(m_hat, v_hat.sqrt().add_(eps), value=-lr_t)


def decay_exclusions(model: SyLSTM) -> set[str]:
    """Parameters never touched by weight decay: batch norms and all biases."""
    return {name for name, _ in model.named_parameters()
            if name.startswith(("bn1", "bn2")) or name.endswith("bias")}


Example = tuple[list[int], NormalizedAdjacency, int]  # (token ids, graph, class index)


def _check_alignment(examples: list[Example], ids: list[str] | None = None) -> None:
    bad = []
    for i, (tokens, adj, _) in enumerate(examples):
        if len(tokens) != adj.n:
            bad.append(ids[i] if ids else str(i))
    if bad:
        raise TrainError(f"sequence/graph length mismatch for examples: {bad[:10]}")


def make_batch(examples: list[Example], dtype: torch.dtype = torch.float32):
    """Pad token sequences, pack graphs block-diagonally."""
    sizes = [len(tokens) for tokens, _, _ in examples]
    t_max = max(sizes)
    ids = torch.full((len(examples), t_max), PAD, dtype=torch.long)
    for i, (tokens, _, _) in enumerate(examples):
        ids[i, :len(tokens)] = torch.tensor(tokens)
    lengths = torch.tensor(sizes)
    packed, _ = batch_graphs([adj for _, adj, _ in examples])
    labels = torch.tensor([label for _, _, label in examples], dtype=torch.long)
    return ids, lengths, adjacency_to_torch(packed, dtype), sizes, labels


def evaluate_model(model: SyLSTM, examples: list[Example], classes: tuple[str, ...],
                   batch_size: int = 64) -> tuple[float, float]:
    """(mean loss, weighted F1) over a dataset in eval mode."""
    model.eval()
    losses, gold, pred = [], [], []
    dtype = next(model.parameters()).dtype
    with torch.no_grad():
        for start in range(0, len(examples), batch_size):
            chunk = examples[start:start + batch_size]
            ids, lengths, adj, sizes, labels = make_batch(chunk, dtype)
            trace = model(ids, lengths, adj, sizes)
            losses.append(float(cross_entropy(trace.probabilities, labels)) * len(chunk))
            gold.extend(labels.tolist())
            pred.extend(np.argmax(trace.probabilities.numpy(), axis=1).tolist())
    report = weighted_metrics([classes[g] for g in gold], [classes[p] for p in pred],
                              list(classes))
    return sum(losses) / len(examples), report.weighted["f1"]


def train(model: SyLSTM, cfg: TrainConfig, train_examples: list[Example],
          dev_examples: list[Example], classes: tuple[str, ...],
          example_ids: list[str] | None = None) -> tuple[dict, TrainHistory]:
    """Full training loop; returns (best state dict, history).

    Deterministic given cfg.seed on a fixed platform: batch order comes from
    a dedicated RNG and all torch ops run single-threaded CPU kernels.
    """
    if not train_examples or not dev_examples:
        raise TrainError("train and dev sets must be non-empty")
    _check_alignment(train_examples, example_ids)
    _check_alignment(dev_examples)
    rng = random.Random(cfg.seed)
    steps_per_epoch = math.ceil(len(train_examples) / cfg.batch_size)
    total_steps = cfg.epochs * steps_per_epoch
    params = dict(model.named_parameters())
    no_decay = decay_exclusions(model)
    states: dict[str, dict] = {name: {} for name in params}
    history = TrainHistory()
    best_state, best_wf1 = None, -1.0
    dtype = next(model.parameters()).dtype
    step = 0
    for epoch in range(cfg.epochs):
        model.train()
        order = list(range(len(train_examples)))
        rng.shuffle(order)
        epoch_loss = 0.0
        last_lr = cfg.lr0
        for start in range(0, len(order), cfg.batch_size):
            batch = [train_examples[i] for i in order[start:start + cfg.batch_size]]
            ids, lengths, adj, sizes, labels = make_batch(batch, dtype)
            trace = model(ids, lengths, adj, sizes)
            loss = cross_entropy(trace.probabilities, labels)
            if cfg.coupled_l2:
                l2 = sum((p ** 2).sum() for n, p in params.items()
                         if n not in no_decay and p.requires_grad)
                loss = loss + 0.5 * cfg.weight_decay * l2
            model.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), CLIP_NORM)
            lr_t = cosine_lr(step, total_steps, cfg.lr0)
            last_lr = lr_t
            emb = model.embedding.weight
            if emb.grad is not None:
                emb.grad[PAD].zero_()
            for name, p in params.items():
                if p.grad is None:
                    continue
                wd = 0.0 if (cfg.coupled_l2 or name in no_decay) else cfg.weight_decay
                adamw_step(p.data, p.grad, states[name], lr_t, wd)
            with torch.no_grad():
                emb[PAD].zero_()
            epoch_loss += float(loss.detach()) * len(batch)
            step += 1
        dev_loss, dev_wf1 = evaluate_model(model, dev_examples, classes)
        history.train_loss.append(epoch_loss / len(train_examples))
        history.dev_loss.append(dev_loss)
        history.dev_wf1.append(dev_wf1)
        history.lr.append(last_lr)
        if dev_wf1 > best_wf1:
            best_wf1 = dev_wf1
            history.best_epoch = epoch
            best_state = copy.deepcopy(model.state_dict())
        logger.info("epoch %d: train_loss=%.4f dev_loss=%.4f dev_wf1=%.4f",
                    epoch, history.train_loss[-1], dev_loss, dev_wf1)
    return best_state, history
