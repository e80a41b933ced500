"""Summary representations over final hidden states and the softmax classifier.

Three summaries are supported: ``ss`` takes the [CLS] row, ``es`` the two
entity-start marker rows, and ``emp`` an element-wise max over each
entity's marker-to-marker rows.  Batched functions take ``markers`` as a
``(B, 4)`` integer array of (m1_start, m1_end, m2_start, m2_end).
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass

import numpy as np

from .errors import BadClass, DimensionMismatch
from .transformer import INIT_STD, softmax


class Summary(str, enum.Enum):
    SS = "ss"
    ES = "es"
    EMP = "emp"


@dataclass(frozen=True)
class SummaryScheme:
    kind: Summary = Summary.EMP
    append_type_embedding: bool = False
    type_dim: int = 32
    # False pools entity pieces only (mention pooling) instead of marker..marker
    pool_markers: bool = True
    concat_cls: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", Summary(str(getattr(self.kind, "value", self.kind)).lower()))

    def dim(self, hidden_size: int) -> int:
        d = hidden_size if self.kind is Summary.SS else 2 * hidden_size
        if self.concat_cls and self.kind is not Summary.SS:
            d += hidden_size
        if self.append_type_embedding:
            d += 2 * self.type_dim
        return d

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SummaryScheme":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


def head_shapes(scheme: SummaryScheme, hidden_size: int, n_classes: int, n_types: int) -> dict:
    shapes = {}
    if scheme.append_type_embedding:
        shapes["head.type_embedding"] = (n_types, scheme.type_dim)
    shapes["head.classifier.weight"] = (n_classes, scheme.dim(hidden_size))
    shapes["head.classifier.bias"] = (n_classes,)
    return shapes


def init_head(scheme: SummaryScheme, hidden_size: int, n_classes: int, n_types: int, seed: int,
              dtype="float32") -> dict[str, np.ndarray]:
    rng = np.random.default_rng([seed, 1])
    out = {}
    for name, shape in head_shapes(scheme, hidden_size, n_classes, n_types).items():
        value = np.zeros(shape) if name.endswith("bias") else rng.standard_normal(shape) * INIT_STD
        out[name] = value.astype(dtype)
    return out


def _pool_ranges(markers: np.ndarray, scheme: SummaryScheme):
    if scheme.pool_markers:
        return (markers[:, 0], markers[:, 1]), (markers[:, 2], markers[:, 3])
    return (markers[:, 0] + 1, markers[:, 1] - 1), (markers[:, 2] + 1, markers[:, 3] - 1)


def summarize_batch(hidden, markers, types, scheme: SummaryScheme, type_table=None):
    """Summary vectors ``(B, D)`` plus a cache for :func:`summarize_backward`."""
    hidden = np.asarray(hidden)
    markers = np.asarray(markers, dtype=np.int64)
    B, T, H = hidden.shape
    rows = np.arange(B)
    parts = []
    cache = {"shape": hidden.shape, "argmax": []}
    if scheme.kind is Summary.SS or scheme.concat_cls:
        parts.append(hidden[:, 0])
    if scheme.kind is Summary.ES:
        parts += [hidden[rows, markers[:, 0]], hidden[rows, markers[:, 2]]]
    elif scheme.kind is Summary.EMP:
        pos = np.arange(T)[None, :]
        for lo, hi in _pool_ranges(markers, scheme):
            inside = (pos >= lo[:, None]) & (pos <= hi[:, None])
            masked = np.where(inside[:, :, None], hidden, -np.inf)
            arg = masked.argmax(axis=1)
            cache["argmax"].append(arg)
            parts.append(np.take_along_axis(hidden, arg[:, None, :], axis=1)[:, 0])
    if scheme.append_type_embedding:
        types = np.asarray(types, dtype=np.int64)
        cache["types"] = types
        parts += [type_table[types[:, 0]], type_table[types[:, 1]]]
    return np.concatenate(parts, axis=1), cache


def summarize_backward(d_summary, markers, scheme: SummaryScheme, cache):
    """Route summary gradients back to hidden rows (and type embeddings)."""
    B, T, H = cache["shape"]
    markers = np.asarray(markers, dtype=np.int64)
    d_hidden = np.zeros((B, T, H), dtype=d_summary.dtype)
    rows = np.arange(B)
    off = 0
    if scheme.kind is Summary.SS or scheme.concat_cls:
        d_hidden[:, 0] += d_summary[:, :H]
        off = H
    if scheme.kind is Summary.ES:
        d_hidden[rows, markers[:, 0]] += d_summary[:, off:off + H]
        d_hidden[rows, markers[:, 2]] += d_summary[:, off + H:off + 2 * H]
        off += 2 * H
    elif scheme.kind is Summary.EMP:
        cols = np.arange(H)[None, :]
        for arg in cache["argmax"]:
            d_hidden[rows[:, None], arg, cols] += d_summary[:, off:off + H]
            off += H
    d_types = None
    if scheme.append_type_embedding:
        dt = scheme.type_dim
        d_types = (cache["types"], d_summary[:, off:off + dt], d_summary[:, off + dt:off + 2 * dt])
    return d_hidden, d_types


def summarize(hidden, example, scheme: SummaryScheme, type_table=None) -> np.ndarray:
    """Summary vector of one example from its ``(T, H)`` hidden matrix."""
    markers = np.array([example.markers])
    types = np.array([[example.t1, example.t2]])
    out, _ = summarize_batch(np.asarray(hidden)[None], markers, types, scheme, type_table)
    return out[0]


@dataclass
class ClassifierHead:
    weight: np.ndarray  # (n_classes, dim)
    bias: np.ndarray    # (n_classes,)

    @property
    def n_classes(self) -> int:
        return self.weight.shape[0]


def classify(head: ClassifierHead, h_s):
    """Return ``(p, predicted_class)``; ties go to the lowest class index."""
    h_s = np.asarray(h_s)
    if h_s.shape[-1] != head.weight.shape[1]:
        raise DimensionMismatch(f"summary has dimension {h_s.shape[-1]}, classifier expects {head.weight.shape[1]}")
    logits = h_s @ head.weight.T + head.bias
    # decide on logits: distinct logits can round to equal probabilities
    return softmax(logits), int(np.argmax(logits))


def cross_entropy_loss(p, gold: int):
    """``-log p[gold]`` and its gradient with respect to the logits."""
    p = np.asarray(p, dtype=float)
    if not 0 <= gold < p.shape[-1]:
        raise BadClass(f"gold class {gold} outside [0, {p.shape[-1]})")
    grad = p.copy()
    grad[gold] -= 1.0
    return float(-np.log(p[gold])), grad
