"""Pairwise training: clicked/non-clicked pairs, losses, the epoch loop.

Each query group contributes one (clicked, other) pair per non-clicked
document. Optimization is mini-batch Adam on the pairwise cross-entropy
loss; early stopping watches validation NDCG.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import QueryGroup
from .errors import ConfigError, NumericError, UsageError
from .evaluation import evaluate_groups
from .models import ModelConfig, RankingModel, make_item_batch, score_groups
from .ops import sigmoid
from .text import IndexedGroup, build_categories, build_vocab, index_groups


def softplus(x):
    """log(1 + exp(x)) without overflow."""
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def generate_pairs(group) -> list[tuple[int, int]]:
    """(positive index, negative index) pairs within one query group.

    Works on anything with a `labels` sequence; a single-document group
    yields no pairs.
    """
    labels = np.asarray(group.labels)
    positives = np.flatnonzero(labels == 1)
    if len(positives) != 1:
        raise UsageError(f"group must have exactly one positive label, got {len(positives)}")
    pos = int(positives[0])
    return [(pos, j) for j in range(len(labels)) if j != pos]


def pairwise_loss(s_pos, s_neg):
    """-log(sigmoid(s_pos - s_neg)), computed in the stable softplus form."""
    delta = np.asarray(s_pos, dtype=np.float64) - np.asarray(s_neg, dtype=np.float64)
    return softplus(-delta)


def pairwise_loss_grad(s_pos, s_neg):
    """d(loss)/d(s_pos); the s_neg gradient is its negation."""
    delta = np.asarray(s_pos, dtype=np.float64) - np.asarray(s_neg, dtype=np.float64)
    return sigmoid(delta) - 1.0


def pointwise_loss(score, label):
    """Cross-entropy of sigmoid(score) against a binary label (the label head)."""
    s = np.asarray(score, dtype=np.float64)
    y = np.asarray(label, dtype=np.float64)
    return softplus(s) - y * s


def pointwise_loss_grad(score, label):
    return sigmoid(score) - np.asarray(label, dtype=np.float64)


@dataclass
class Hyperparams:
    learning_rate: float = 1e-3
    batch_size: int = 256
    max_epochs: int = 50
    patience: int = 3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    min_count: int = 2
    ndcg_k: int = 20

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparams":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown hyperparameter keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    val_ndcg: float | None


@dataclass
class TrainResult:
    model: RankingModel
    vocab: object
    categories: object
    log: list[EpochLog]
    best_epoch: int
    best_val_ndcg: float | None


def _train_step(
    model: RankingModel,
    pos_items: list,
    neg_items: list,
    hyper: Hyperparams,
) -> float:
    """One forward/backward/Adam step on a batch of pairs; returns mean loss."""
    n = len(pos_items)
    batch = make_item_batch(pos_items + neg_items)
    scores, cache = model.forward(batch)
    s_pos, s_neg = scores[:n], scores[n:]
    losses = pairwise_loss(s_pos, s_neg)
    g = pairwise_loss_grad(s_pos, s_neg) / n
    model.backward(cache, np.concatenate([g, -g]))
    model.store.adam_step(hyper.learning_rate, hyper.beta1, hyper.beta2, hyper.eps)
    return float(losses.mean())


def train_ranker(
    config: ModelConfig,
    train_groups: list[QueryGroup],
    val_groups: list[QueryGroup] | None,
    hyper: Hyperparams | None = None,
) -> TrainResult:
    """Train one model on a train partition with optional validation.

    With validation present, the best checkpoint by validation NDCG is kept
    and training stops after `patience` epochs without improvement. The
    whole run is deterministic given config, data and hyperparameters.
    """
    hyper = hyper or Hyperparams()
    if not any(not g.is_single_doc for g in train_groups):
        raise ConfigError("degenerate fold: no multi-document group in the train partition")
    if val_groups is not None and not any(not g.is_single_doc for g in val_groups):
        raise ConfigError("degenerate fold: no multi-document group in the validation partition")

    vocab = build_vocab(train_groups, hyper.min_count)
    categories = build_categories(train_groups)
    model = RankingModel(config, vocab.size, categories.size)

    indexed_train = index_groups(train_groups, vocab, categories)
    indexed_val = (
        index_groups([g for g in val_groups if not g.is_single_doc], vocab, categories)
        if val_groups is not None
        else None
    )

    pairs: list[tuple[IndexedGroup, int, int]] = []
    for g in indexed_train:
        for pos, neg in generate_pairs(g):
            pairs.append((g, pos, neg))

    rng = np.random.default_rng([config.seed, 0x7261])
    log: list[EpochLog] = []
    best_val = -np.inf
    best_epoch = 0
    best_snapshot = model.store.snapshot()
    stale = 0

    for epoch in range(1, hyper.max_epochs + 1):
        order = rng.permutation(len(pairs))
        total = 0.0
        for start in range(0, len(order), hyper.batch_size):
            idx = order[start : start + hyper.batch_size]
            pos_items = [(pairs[i][0], pairs[i][1]) for i in idx]
            neg_items = [(pairs[i][0], pairs[i][2]) for i in idx]
            mean_loss = _train_step(model, pos_items, neg_items, hyper)
            if not np.isfinite(mean_loss):
                raise NumericError(
                    f"epoch {epoch}, batch at pair {start}: training loss is not finite"
                )
            total += mean_loss * len(idx)
        train_loss = total / max(len(pairs), 1)

        val_ndcg = None
        if indexed_val is not None:
            scored = score_groups(model, indexed_val)
            labels = [g.labels for g in indexed_val]
            val_ndcg = evaluate_groups(scored, labels, hyper.ndcg_k).mean_ndcg
        log.append(EpochLog(epoch=epoch, train_loss=train_loss, val_ndcg=val_ndcg))

        if val_ndcg is None:
            best_epoch = epoch
            continue
        if val_ndcg > best_val:
            best_val = val_ndcg
            best_epoch = epoch
            best_snapshot = model.store.snapshot()
            stale = 0
        else:
            stale += 1
            if stale >= hyper.patience:
                break

    if indexed_val is not None:
        model.store.restore(best_snapshot)
        return TrainResult(model, vocab, categories, log, best_epoch, best_val)
    return TrainResult(model, vocab, categories, log, best_epoch, None)
