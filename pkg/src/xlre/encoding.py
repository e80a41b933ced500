"""Marker insertion and windowing: relation instances to model inputs."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import RelationInstance
from .errors import EntitiesTooFar
from .tokenizer import E1, E1_END, E2, E2_END, TokenizedSentence, Vocabulary, align_entity_spans, tokenize

DEFAULT_MAX_LEN = 128


class MarkerScheme(str, enum.Enum):
    UM = "um"    # [E1] ... [/E1] ... [E2] ... [/E2]
    ETM = "etm"  # [T1] ... [T1] ... [T2] ... [T2]

    @classmethod
    def parse(cls, value) -> "MarkerScheme":
        return value if isinstance(value, cls) else cls(str(value).lower())


@dataclass(frozen=True)
class EncodedExample:
    piece_ids: tuple[int, ...]
    m1_start: int
    m1_end: int
    m2_start: int
    m2_end: int
    label: int
    t1: int = 0
    t2: int = 0
    max_len: int = DEFAULT_MAX_LEN
    id: str = ""

    @property
    def e1_range(self) -> tuple[int, int]:
        return self.m1_start + 1, self.m1_end

    @property
    def e2_range(self) -> tuple[int, int]:
        return self.m2_start + 1, self.m2_end

    @property
    def markers(self) -> tuple[int, int, int, int]:
        return self.m1_start, self.m1_end, self.m2_start, self.m2_end

    def __len__(self):
        return len(self.piece_ids)


def marker_ids(t1: str, t2: str, scheme: MarkerScheme, vocab: Vocabulary) -> tuple[int, int, int, int]:
    if MarkerScheme.parse(scheme) is MarkerScheme.UM:
        return tuple(vocab.special_id(t) for t in (E1, E1_END, E2, E2_END))
    a, b = vocab.marker_id(t1), vocab.marker_id(t2)
    return a, a, b, b


def insert_markers(tok: TokenizedSentence, e1_range, e2_range, t1: str, t2: str,
                   scheme: MarkerScheme, vocab: Vocabulary):
    """Splice the four markers around two half-open piece ranges.

    Returns ``(ids, (m1_start, m1_end, m2_start, m2_end))`` where ids start
    with [CLS] and end with [SEP].
    """
    a1, b1 = e1_range
    a2, b2 = e2_range
    if not (0 <= a1 < b1 <= a2 < b2 <= len(tok.piece_ids)):
        raise ValueError(f"entity ranges {e1_range}, {e2_range} must be non-empty, ordered and disjoint")
    p = tok.piece_ids
    k1, k1e, k2, k2e = marker_ids(t1, t2, scheme, vocab)
    ids = ((vocab.cls_id,) + p[:a1] + (k1,) + p[a1:b1] + (k1e,) + p[b1:a2]
           + (k2,) + p[a2:b2] + (k2e,) + p[b2:] + (vocab.sep_id,))
    m1s = 1 + a1
    m1e = m1s + (b1 - a1) + 1
    m2s = m1e + 1 + (a2 - b1)
    m2e = m2s + (b2 - a2) + 1
    return ids, (m1s, m1e, m2s, m2e)


def window_start(n_inner: int, lo: int, hi: int, width: int) -> int:
    """First inner position of a ``width`` window centered on ``[lo, hi]``."""
    start = (lo + hi + 1 - width) // 2
    start = min(start, lo, n_inner - width)
    return max(start, hi - width + 1, 0)


def encode_example(instance: RelationInstance, tok: TokenizedSentence, spans: dict, scheme: MarkerScheme,
                   vocab: Vocabulary, max_len: int = DEFAULT_MAX_LEN) -> EncodedExample:
    """Mark the instance's entity pair and cut to ``max_len`` if needed.

    Over-long inputs keep [CLS]/[SEP] and a contiguous window centered
    between the marked spans; raises :class:`EntitiesTooFar` when the
    marked spans alone cannot fit.
    """
    if max_len < 8:
        raise ValueError("max_len must be at least 8")
    t1, t2 = instance.e1.entity_type, instance.e2.entity_type
    ids, (m1s, m1e, m2s, m2e) = insert_markers(tok, spans[instance.e1.id], spans[instance.e2.id],
                                               t1, t2, scheme, vocab)
    if len(ids) > max_len:
        required = m2e - m1s + 1 + 2
        if required > max_len:
            raise EntitiesTooFar(required, max_len)
        inner = ids[1:-1]
        width = max_len - 2
        start = window_start(len(inner), m1s - 1, m2e - 1, width)
        ids = (vocab.cls_id,) + inner[start:start + width] + (vocab.sep_id,)
        shift = start
        m1s, m1e, m2s, m2e = (m - shift for m in (m1s, m1e, m2s, m2e))
    types = vocab.entity_types
    return EncodedExample(
        tuple(ids), m1s, m1e, m2s, m2e, instance.label,
        types.index(t1), types.index(t2), max_len,
        f"{instance.sentence.id}:{instance.e1.id}:{instance.e2.id}",
    )


class InstanceEncoder:
    """Encodes instances, tokenizing each sentence once."""

    def __init__(self, vocab: Vocabulary, scheme: MarkerScheme, max_len: int = DEFAULT_MAX_LEN):
        self.vocab = vocab
        self.scheme = MarkerScheme.parse(scheme)
        self.max_len = max_len
        self._cache = {}

    def tokenized(self, sentence):
        key = (sentence.id, sentence.words)
        hit = self._cache.get(key)
        if hit is None:
            tok = tokenize(sentence.words, self.vocab)
            hit = (tok, align_entity_spans(sentence, tok))
            self._cache[key] = hit
        return hit

    def encode(self, instance: RelationInstance) -> EncodedExample:
        tok, spans = self.tokenized(instance.sentence)
        return encode_example(instance, tok, spans, self.scheme, self.vocab, self.max_len)

    def encode_all(self, instances: Iterable[RelationInstance]):
        """Return ``(examples, kept_indices, n_too_far)``."""
        examples, kept, too_far = [], [], 0
        for i, inst in enumerate(instances):
            try:
                examples.append(self.encode(inst))
            except EntitiesTooFar:
                too_far += 1
                continue
            kept.append(i)
        return examples, kept, too_far


def dump_examples(examples: Sequence[EncodedExample], vocab: Vocabulary, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(f"{ex.id}\t{' '.join(vocab.convert_ids(ex.piece_ids))}\n")
