"""Relation classifier: encoder, summary layer and linear softmax head."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import transformer as tf
from .encoding import EncodedExample, MarkerScheme
from .head import SummaryScheme, head_shapes, init_head, summarize_batch, summarize_backward
from .tokenizer import FIXED_SPECIALS, PAD

PAD_ID = FIXED_SPECIALS.index(PAD)


@dataclass
class Batch:
    ids: np.ndarray      # (B, T)
    mask: np.ndarray     # (B, T) bool
    markers: np.ndarray  # (B, 4)
    types: np.ndarray    # (B, 2)
    labels: np.ndarray   # (B,)


def make_batch(examples: Sequence[EncodedExample]) -> Batch:
    B = len(examples)
    T = max(len(ex) for ex in examples)
    ids = np.full((B, T), PAD_ID, dtype=np.int64)
    mask = np.zeros((B, T), dtype=bool)
    for i, ex in enumerate(examples):
        ids[i, :len(ex)] = ex.piece_ids
        mask[i, :len(ex)] = True
    markers = np.array([ex.markers for ex in examples], dtype=np.int64)
    types = np.array([(ex.t1, ex.t2) for ex in examples], dtype=np.int64)
    labels = np.array([ex.label for ex in examples], dtype=np.int64)
    return Batch(ids, mask, markers, types, labels)


def log_softmax(x):
    z = x - x.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


class RelationModel:
    """Holds every trainable tensor (encoder + head) in one ordered dict."""

    def __init__(self, config: tf.ModelConfig, summary: SummaryScheme, marker_scheme: MarkerScheme,
                 n_classes: int, n_types: int, params: dict[str, np.ndarray]):
        self.config = config
        self.summary = summary
        self.marker_scheme = MarkerScheme.parse(marker_scheme)
        self.n_classes = n_classes
        self.n_types = n_types
        expected = self.parameter_shapes()
        missing = [k for k in expected if k not in params]
        if missing:
            raise KeyError(f"missing parameters: {missing[:3]}")
        for k, shape in expected.items():
            if params[k].shape != shape:
                raise ValueError(f"parameter {k} has shape {params[k].shape}, expected {shape}")
        self.params = {k: params[k] for k in expected}

    @classmethod
    def create(cls, config, summary, marker_scheme, n_classes, n_types, seed, encoder_params=None):
        enc = tf.init_parameters(config, seed) if encoder_params is None else \
            {k: np.array(v, dtype=config.dtype) for k, v in encoder_params.items()}
        head = init_head(summary, config.hidden_size, n_classes, n_types, seed, config.dtype)
        return cls(config, summary, marker_scheme, n_classes, n_types, {**enc, **head})

    def parameter_shapes(self) -> dict[str, tuple]:
        return {**tf.parameter_shapes(self.config),
                **head_shapes(self.summary, self.config.hidden_size, self.n_classes, self.n_types)}

    def encoder_params(self) -> dict[str, np.ndarray]:
        return {k: v for k, v in self.params.items() if not k.startswith("head.")}

    def copy(self) -> "RelationModel":
        return RelationModel(self.config, self.summary, self.marker_scheme, self.n_classes, self.n_types,
                             {k: v.copy() for k, v in self.params.items()})

    def _type_table(self):
        return self.params.get("head.type_embedding")

    def logits(self, batch: Batch, rng=None):
        hidden, cache = tf.forward(self.params, self.config, batch.ids, batch.mask, rng)
        h_s, s_cache = summarize_batch(hidden, batch.markers, batch.types, self.summary, self._type_table())
        out = h_s @ self.params["head.classifier.weight"].T + self.params["head.classifier.bias"]
        return out, (cache, h_s, s_cache)

    def loss_and_grads(self, examples, rng=None, reduction: str = "mean"):
        """Cross-entropy over ``examples`` and gradients for every tensor.

        ``reduction="sum"`` returns the plain sum of per-example losses and
        gradients; ``"mean"`` divides both by the batch size.
        """
        batch = examples if isinstance(examples, Batch) else make_batch(examples)
        logits, (cache, h_s, s_cache) = self.logits(batch, rng)
        logp = log_softmax(logits)
        B = len(batch.labels)
        losses = -logp[np.arange(B), batch.labels]
        d_logits = np.exp(logp)
        d_logits[np.arange(B), batch.labels] -= 1.0
        if reduction == "mean":
            d_logits = d_logits / B
            loss = float(losses.mean())
        else:
            loss = float(losses.sum())
        grads = tf.zero_grads(self.params)
        grads["head.classifier.weight"] += d_logits.T @ h_s
        grads["head.classifier.bias"] += d_logits.sum(axis=0)
        d_hs = d_logits @ self.params["head.classifier.weight"]
        d_hidden, d_types = summarize_backward(d_hs, batch.markers, self.summary, s_cache)
        if d_types is not None:
            types, d1, d2 = d_types
            np.add.at(grads["head.type_embedding"], types[:, 0], d1)
            np.add.at(grads["head.type_embedding"], types[:, 1], d2)
        tf.backward(self.params, self.config, cache, d_hidden, grads)
        return loss, grads

    def predict_proba(self, examples: Sequence[EncodedExample], batch_size: int = 64) -> np.ndarray:
        out = []
        for i in range(0, len(examples), batch_size):
            logits, _ = self.logits(make_batch(examples[i:i + batch_size]))
            out.append(np.exp(log_softmax(logits.astype(np.float64))))
        if not out:
            return np.zeros((0, self.n_classes))
        return np.concatenate(out, axis=0)
