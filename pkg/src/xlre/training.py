"""Adam, supervised fine-tuning with early stopping, and MLM pretraining."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import transformer as tf
from .encoding import EncodedExample
from .errors import EmptyCorpus, EmptyText, ShapeMismatch
from .evaluation import compute_metrics
from .model import PAD_ID, RelationModel, log_softmax, make_batch

log = logging.getLogger(__name__)


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(params: dict, grads: dict, state: AdamState, lr: float):
    """One bias-corrected Adam update, applied to ``params`` in place."""
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    for name, g in grads.items():
        if name not in params or params[name].shape != np.shape(g):
            raise ShapeMismatch(f"gradient for {name!r} does not match its parameter")
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    for name, g in grads.items():
        p = params[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= (lr * (m / c1) / (np.sqrt(v / c2) + state.eps)).astype(p.dtype)
    return params, state


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    epochs: int = 10
    batch_size: int = 16
    # None disables early stopping (train the full epoch budget, keep the best dev epoch)
    early_stop_patience: int | None = 3
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    languages: tuple[str, ...] = ()

    def __post_init__(self):
        self.seeds = tuple(self.seeds)
        self.languages = tuple(self.languages)
        if self.epochs < 1 or self.batch_size < 1 or not self.seeds or self.learning_rate <= 0:
            raise ValueError("epochs, batch_size and learning_rate must be positive and seeds non-empty")

    def to_dict(self) -> dict:
        return asdict(self)


class EarlyStopping:
    """Tracks the best dev score; ``update`` returns True when training should stop."""

    def __init__(self, patience: int | None):
        self.patience = patience
        self.best = -math.inf
        self.best_epoch = 0
        self.bad_epochs = 0

    def update(self, epoch: int, score: float) -> bool:
        if score > self.best:
            self.best, self.best_epoch, self.bad_epochs = score, epoch, 0
            return False
        self.bad_epochs += 1
        return self.patience is not None and self.bad_epochs >= self.patience


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    dev_precision: float
    dev_recall: float
    dev_f1: float
    seconds: float

    def line(self) -> str:
        return (f"{self.epoch}\t{self.train_loss:.6f}\t{self.dev_precision:.4f}\t"
                f"{self.dev_recall:.4f}\t{self.dev_f1:.4f}\t{self.seconds:.2f}")


@dataclass
class CheckpointRecord:
    model: RelationModel
    optimizer: AdamState
    history: list[EpochLog]
    best_epoch: int

    @property
    def best_f1(self) -> float:
        return self.history[self.best_epoch - 1].dev_f1


def predict_classes(model: RelationModel, examples: Sequence[EncodedExample], batch_size: int = 64) -> np.ndarray:
    return model.predict_proba(examples, batch_size).argmax(axis=1)


def fine_tune(model: RelationModel, train: Sequence[EncodedExample], dev: Sequence[EncodedExample],
              config: TrainConfig, seed: int, class_names: Sequence[str],
              on_epoch: Callable[[EpochLog], None] | None = None) -> CheckpointRecord:
    """Train ``model`` in place and return a record holding the best-dev copy."""
    if not train or not dev:
        raise EmptyCorpus("fine-tuning needs non-empty train and dev sets")
    rng = np.random.default_rng([seed, 2])
    state = AdamState()
    stopper = EarlyStopping(config.early_stop_patience)
    dev_gold = [ex.label for ex in dev]
    history: list[EpochLog] = []
    best = model.copy()
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(len(train))
        total, n = 0.0, 0
        for i in range(0, len(order), config.batch_size):
            chunk = [train[j] for j in order[i:i + config.batch_size]]
            loss, grads = model.loss_and_grads(make_batch(chunk), rng=rng)
            adam_step(model.params, grads, state, config.learning_rate)
            total += loss * len(chunk)
            n += len(chunk)
        rep = compute_metrics(predict_classes(model, dev), dev_gold, class_names)
        entry = EpochLog(epoch, total / n, rep.precision, rep.recall, rep.f1, time.perf_counter() - t0)
        history.append(entry)
        if on_epoch:
            on_epoch(entry)
        log.debug("epoch %s", entry.line())
        stop = stopper.update(epoch, rep.f1)
        if stopper.best_epoch == epoch:
            best = model.copy()
        if stop:
            break
    return CheckpointRecord(best, state, history, stopper.best_epoch)


# masked-language-model pretraining

@dataclass
class MLMBatch:
    ids: np.ndarray       # corrupted input ids (B, T)
    mask: np.ndarray      # (B, T) real positions
    rows: np.ndarray      # batch index of each prediction target
    cols: np.ndarray      # position of each prediction target
    targets: np.ndarray   # original ids at (rows, cols)


def to_sequences(texts, vocab, max_len: int) -> list[np.ndarray]:
    """Tokenize word sequences into ``[CLS] pieces [SEP]`` id arrays."""
    from .tokenizer import tokenize

    out = []
    for words in texts:
        ids = list(tokenize(words, vocab).piece_ids)[: max_len - 2]
        if ids:
            out.append(np.array([vocab.cls_id, *ids, vocab.sep_id], dtype=np.int64))
    return out


def mask_tokens(seqs: Sequence[np.ndarray], rng: np.random.Generator, mask_fraction: float,
                n_specials: int, vocab_size: int, mask_id: int) -> MLMBatch:
    """Select ``mask_fraction`` of the non-special positions of each sequence.

    Selected positions become [MASK] 80% of the time, a random ordinary
    piece 10% of the time, and stay unchanged otherwise.
    """
    B = len(seqs)
    T = max(len(s) for s in seqs)
    ids = np.full((B, T), PAD_ID, dtype=np.int64)
    valid = np.zeros((B, T), dtype=bool)
    rows, cols = [], []
    for b, s in enumerate(seqs):
        ids[b, :len(s)] = s
        valid[b, :len(s)] = True
        cand = np.flatnonzero(s >= n_specials)
        if cand.size == 0:
            continue
        k = max(1, int(round(mask_fraction * cand.size)))
        pick = np.sort(rng.choice(cand, size=k, replace=False))
        rows += [b] * k
        cols += pick.tolist()
    rows_a = np.array(rows, dtype=np.int64)
    cols_a = np.array(cols, dtype=np.int64)
    targets = ids[rows_a, cols_a].copy()
    u = rng.random(len(rows_a))
    rand_ids = rng.integers(n_specials, vocab_size, size=len(rows_a))
    corrupted = ids.copy()
    corrupted[rows_a[u < 0.8], cols_a[u < 0.8]] = mask_id
    swap = (u >= 0.8) & (u < 0.9)
    corrupted[rows_a[swap], cols_a[swap]] = rand_ids[swap]
    return MLMBatch(corrupted, valid, rows_a, cols_a, targets)


def mlm_loss_and_grads(params, config: tf.ModelConfig, batch: MLMBatch, rng=None, with_grads: bool = True):
    hidden, cache = tf.forward(params, config, batch.ids, batch.mask, rng)
    sel = hidden[batch.rows, batch.cols]
    logits = sel @ params["embeddings.token"].T + params["mlm.bias"]
    logp = log_softmax(logits)
    n = len(batch.targets)
    loss = float(-logp[np.arange(n), batch.targets].mean())
    if not with_grads:
        return loss, None
    d_logits = np.exp(logp)
    d_logits[np.arange(n), batch.targets] -= 1.0
    d_logits /= n
    grads = tf.zero_grads(params)
    d_sel = tf.mlm_backward(params, sel, d_logits, grads)
    d_hidden = np.zeros_like(hidden)
    np.add.at(d_hidden, (batch.rows, batch.cols), d_sel)
    tf.backward(params, config, cache, d_hidden, grads)
    return loss, grads


def mlm_eval_loss(params, config: tf.ModelConfig, seqs, vocab, mask_fraction: float = 0.15, seed: int = 0,
                  batch_size: int = 64) -> float:
    """Mean masked-token cross-entropy with a fixed masking draw, dropout off."""
    rng = np.random.default_rng([seed, 4])
    losses, weights = [], []
    for i in range(0, len(seqs), batch_size):
        batch = mask_tokens(seqs[i:i + batch_size], rng, mask_fraction, vocab.num_specials, len(vocab),
                            vocab.mask_id)
        loss, _ = mlm_loss_and_grads(params, config, batch, with_grads=False)
        losses.append(loss)
        weights.append(len(batch.targets))
    return float(np.average(losses, weights=weights))


def pretrain_mlm(params, config: tf.ModelConfig, seqs, vocab, mask_fraction: float = 0.15, steps: int = 1000,
                 lr: float = 1e-3, seed: int = 0, batch_size: int = 32,
                 on_step: Callable[[int, float], None] | None = None):
    """Masked-language-model training on ``seqs`` (id arrays); updates ``params`` in place.

    Returns ``(params, losses)``.
    """
    if not 0.0 < mask_fraction < 1.0:
        raise ValueError("mask_fraction must lie in (0, 1)")
    seqs = [s for s in seqs if np.any(s >= vocab.num_specials)]
    if not seqs:
        raise EmptyText("no maskable text to pretrain on")
    rng = np.random.default_rng([seed, 3])
    state = AdamState()
    losses = []
    for step in range(steps):
        pick = rng.integers(0, len(seqs), size=min(batch_size, len(seqs)))
        batch = mask_tokens([seqs[i] for i in pick], rng, mask_fraction, vocab.num_specials, len(vocab),
                            vocab.mask_id)
        loss, grads = mlm_loss_and_grads(params, config, batch, rng=rng)
        adam_step(params, grads, state, lr)
        losses.append(loss)
        if on_step:
            on_step(step, loss)
    return params, losses


def joint_training_set(per_language: dict[str, Sequence], languages: Sequence[str]) -> list:
    """Concatenate training examples of ``languages`` in the given order."""
    out = []
    for lang in languages:
        out.extend(per_language[lang])
    return out
