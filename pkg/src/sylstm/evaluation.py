"""Metrics and baselines: precision/recall/weighted F1, confusion matrices,
all-one-class reference rows, a unigram linear SVM and a paired t-test.

Per-class metrics use the 0-convention when a denominator is zero; the
weighted aggregates are support-weighted averages, conventionally reported
x100 to one decimal.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy import stats


class EvalError(Exception):
    pass


@dataclass
class EvalReport:
    classes: list[str]
    per_class: dict[str, dict[str, float]]   # precision, recall, f1, support
    weighted: dict[str, float]               # precision, recall, f1 (fractions)
    confusion: np.ndarray                    # gold x predicted
    task: str = ""

    def to_json(self) -> str:
        return json.dumps({
            "task": self.task,
            "classes": self.classes,
            "per_class": self.per_class,
            "weighted": self.weighted,
            "confusion": self.confusion.tolist(),
        }, indent=1)

    def row(self) -> tuple[float, float, float]:
        """(P, R, F1) x100 rounded to one decimal, the reporting convention."""
        return tuple(round(100 * self.weighted[k], 1) for k in ("precision", "recall", "f1"))


def weighted_metrics(gold: list[str], pred: list[str], classes: list[str],
                     task: str = "") -> EvalReport:
    """Per-class and support-weighted precision/recall/F1 plus confusion matrix."""
    if not gold or len(gold) != len(pred):
        raise EvalError("gold and predicted label lists must be equal-length and non-empty")
    index = {c: i for i, c in enumerate(classes)}
    for label in gold + pred:
        if label not in index:
            raise EvalError(f"label {label!r} not in classes {classes}")
    confusion = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for g, p in zip(gold, pred):
        confusion[index[g], index[p]] += 1
    n = len(gold)
    per_class = {}
    weighted = {"precision": 0.0, "recall": 0.0, "f1": 0.0}
    for c, i in index.items():
        tp = confusion[i, i]
        support = int(confusion[i].sum())
        pred_count = int(confusion[:, i].sum())
        precision = tp / pred_count if pred_count else 0.0
        recall = tp / support if support else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[c] = {"precision": precision, "recall": recall, "f1": f1,
                        "support": support}
        for key, value in (("precision", precision), ("recall", recall), ("f1", f1)):
            weighted[key] += support / n * value
    return EvalReport(classes=list(classes), per_class=per_class,
                      weighted=weighted, confusion=confusion, task=task)


def trivial_baseline(classes: list[str], label: str, gold: list[str],
                     task: str = "") -> EvalReport:
    """Metrics for the constant predictor that outputs `label` everywhere."""
    if label not in classes:
        raise EvalError(f"label {label!r} not in classes {classes}")
    return weighted_metrics(gold, [label] * len(gold), classes, task=task)


def paired_t_test(scores_a: list[float], scores_b: list[float]) -> tuple[float, float]:
    """Two-sided paired t-test over seed-matched score lists.

    Degenerate branches: all differences zero -> (0, 1); equal nonzero
    differences (zero variance) -> (signed inf, 0) to flag the exact tie.
    """
    if len(scores_a) != len(scores_b) or len(scores_a) < 2:
        raise EvalError("score lists must be equal-length with at least 2 entries")
    diffs = np.asarray(scores_a, dtype=float) - np.asarray(scores_b, dtype=float)
    mean = diffs.mean()
    sd = diffs.std(ddof=1)
    if sd == 0:
        if mean == 0:
            return 0.0, 1.0
        return math.copysign(math.inf, mean), 0.0
    t = mean / (sd / math.sqrt(len(diffs)))
    p = 2 * stats.t.sf(abs(t), df=len(diffs) - 1)
    return float(t), float(p)


# --- unigram linear SVM baseline -------------------------------------------

@dataclass
class SvmModel:
    vocabulary: dict[str, int]
    weights: np.ndarray     # n_classes x (n_features + 1), last column is bias
    classes: list[str]
    c: float

    def predict(self, token_lists: list[list[str]]) -> list[str]:
        x = _featurize(token_lists, self.vocabulary)
        scores = x @ self.weights[:, :-1].T + self.weights[:, -1]
        return [self.classes[i] for i in np.argmax(scores, axis=1)]


def _featurize(token_lists: list[list[str]], vocabulary: dict[str, int]) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for r, tokens in enumerate(token_lists):
        for tok, cnt in Counter(tokens).items():
            idx = vocabulary.get(tok)
            if idx is not None:
                rows.append(r)
                cols.append(idx)
                vals.append(float(cnt))
    return sp.csr_matrix((vals, (rows, cols)),
                         shape=(len(token_lists), len(vocabulary)))


def _train_binary(x: sp.csr_matrix, y: np.ndarray, c: float, iterations: int) -> np.ndarray:
    """Deterministic full-batch subgradient descent on the averaged hinge loss.

    Objective: (1/(2C)) ||w||^2 + mean_i max(0, 1 - y_i f(x_i)); the bias is
    unregularized. Iterates are Polyak-averaged. Per-example averaging makes
    the solution invariant to duplicating the training set at fixed C.
    """
    n, d = x.shape
    lam = 1.0 / c
    w = np.zeros(d)
    b = 0.0
    w_avg, b_avg = np.zeros(d), 0.0
    for t in range(1, iterations + 1):
        margins = y * (x @ w + b)
        viol = margins < 1
        eta = 1.0 / (lam * (t + 1))
        grad_w = lam * w - (x[viol].T @ y[viol]) / n
        grad_b = -y[viol].sum() / n
        w -= eta * grad_w
        b -= eta * grad_b
        w_avg += (w - w_avg) / t
        b_avg += (b - b_avg) / t
    return np.concatenate([w_avg, [b_avg]])


def svm_baseline(train_tokens: list[list[str]], train_labels: list[str],
                 dev_tokens: list[list[str]], dev_labels: list[str],
                 classes: list[str], c_grid: tuple[float, ...] = (0.01, 0.1, 1.0, 10.0),
                 iterations: int = 300) -> SvmModel:
    """One-vs-rest linear SVM on unigram counts; C chosen by dev weighted F1."""
    if len(set(train_labels)) < 2:
        raise EvalError("training set must contain at least two classes")
    vocabulary = {tok: i for i, tok in
                  enumerate(sorted({t for toks in train_tokens for t in toks}))}
    x = _featurize(train_tokens, vocabulary)
    best: SvmModel | None = None
    best_f1 = -1.0
    for c in c_grid:
        weights = np.stack([
            _train_binary(x, np.where(np.asarray(train_labels) == cls, 1.0, -1.0),
                          c, iterations)
            for cls in classes])
        model = SvmModel(vocabulary=vocabulary, weights=weights, classes=list(classes), c=c)
        f1 = weighted_metrics(dev_labels, model.predict(dev_tokens), classes).weighted["f1"]
        if f1 > best_f1:
            best_f1 = f1
            best = model
    return best


def format_table(rows: list[tuple[str, EvalReport]]) -> str:
    """Aligned text table of (P, R, F1) x100 to one decimal per system."""
    lines = [f"{'System':<16}{'Precision':>10}{'Recall':>10}{'F1-score':>10}"]
    for name, report in rows:
        p, r, f1 = report.row()
        lines.append(f"{name:<16}{p:>10.1f}{r:>10.1f}{f1:>10.1f}")
    return "\n".join(lines)
