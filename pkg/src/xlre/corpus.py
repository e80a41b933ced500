"""Relation-extraction data model, corpus I/O, candidate pairs and splitting.

Word indices in mentions are 1-based and inclusive, matching the on-disk
format::

    {"id": "s1", "language": "en", "words": ["New", "York", ...],
     "entities": [{"id": "m1", "start": 1, "end": 3, "type": "GPE"}, ...],
     "relations": [{"arg1": "m1", "arg2": "m2", "type": "Part-Whole"}]}
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import BadRatios, MalformedRecord, SchemaError, SpanOutOfRange, UnknownType

NULL_LABEL = "NONE"


@dataclass(frozen=True)
class RelationSchema:
    entity_types: tuple[str, ...]
    relation_types: tuple[str, ...]
    direction_augmented: bool = False

    def __post_init__(self):
        object.__setattr__(self, "entity_types", tuple(self.entity_types))
        object.__setattr__(self, "relation_types", tuple(self.relation_types))
        for kind, names in (("entity", self.entity_types), ("relation", self.relation_types)):
            if any(not isinstance(n, str) or not n for n in names):
                raise SchemaError(f"{kind} type names must be non-empty strings")
            if len(set(names)) != len(names):
                raise SchemaError(f"duplicate {kind} type names")
        if NULL_LABEL in self.relation_types:
            raise SchemaError(f"{NULL_LABEL!r} is reserved for the null class")

    @property
    def num_relations(self) -> int:
        return len(self.relation_types)

    @property
    def num_classes(self) -> int:
        k = len(self.relation_types)
        return 2 * k + 1 if self.direction_augmented else k + 1

    def class_names(self) -> list[str]:
        names = [NULL_LABEL, *self.relation_types]
        if self.direction_augmented:
            names += [f"{r}(rev)" for r in self.relation_types]
        return names

    def relation_index(self, name: str) -> int:
        try:
            return self.relation_types.index(name) + 1
        except ValueError:
            raise UnknownType(name) from None

    def entity_index(self, name: str) -> int:
        try:
            return self.entity_types.index(name)
        except ValueError:
            raise UnknownType(name) from None

    def to_dict(self) -> dict:
        return {
            "entity_types": list(self.entity_types),
            "relation_types": list(self.relation_types),
            "direction_augmented": self.direction_augmented,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RelationSchema":
        try:
            return cls(d["entity_types"], d["relation_types"], bool(d.get("direction_augmented", False)))
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"bad schema record: {exc}") from None


@dataclass(frozen=True)
class EntityMention:
    id: str
    start: int
    end: int
    entity_type: str

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class RelationAnnotation:
    arg1: str
    arg2: str
    relation_type: str


@dataclass(frozen=True)
class Sentence:
    id: str
    words: tuple[str, ...]
    language: str = ""
    entities: tuple[EntityMention, ...] = ()
    relations: tuple[RelationAnnotation, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        object.__setattr__(self, "entities", tuple(self.entities))
        object.__setattr__(self, "relations", tuple(self.relations))

    def mention(self, mention_id: str) -> EntityMention:
        for m in self.entities:
            if m.id == mention_id:
                return m
        raise KeyError(mention_id)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "language": self.language,
            "words": list(self.words),
            "entities": [{"id": m.id, "start": m.start, "end": m.end, "type": m.entity_type}
                         for m in self.entities],
            "relations": [{"arg1": r.arg1, "arg2": r.arg2, "type": r.relation_type}
                          for r in self.relations],
        }


@dataclass(frozen=True)
class RelationInstance:
    sentence: Sentence
    e1: EntityMention
    e2: EntityMention
    label: int

    @property
    def types(self) -> tuple[str, str]:
        return self.e1.entity_type, self.e2.entity_type


def validate_sentence(sentence: Sentence, schema: RelationSchema) -> None:
    """Raise if ``sentence`` breaks any structural or schema invariant."""
    n = len(sentence.words)
    if n < 1:
        raise SpanOutOfRange(sentence.id, "sentence has no words")
    seen = set()
    for m in sentence.entities:
        if m.id in seen:
            raise SpanOutOfRange(sentence.id, f"duplicate entity id {m.id!r}")
        seen.add(m.id)
        if not (1 <= m.start <= m.end <= n):
            raise SpanOutOfRange(sentence.id, f"entity {m.id!r} span [{m.start}, {m.end}] with n={n}")
        if m.entity_type not in schema.entity_types:
            raise UnknownType(m.entity_type)
    for r in sentence.relations:
        if r.relation_type not in schema.relation_types:
            raise UnknownType(r.relation_type)
        if r.arg1 == r.arg2 or r.arg1 not in seen or r.arg2 not in seen:
            raise SpanOutOfRange(sentence.id, f"relation arguments {r.arg1!r}, {r.arg2!r} do not resolve")


def _parse_record(obj, lineno: int) -> Sentence:
    if not isinstance(obj, dict):
        raise MalformedRecord(lineno, "record is not an object")
    try:
        words = obj["words"]
        if not isinstance(words, list) or not all(isinstance(w, str) for w in words):
            raise MalformedRecord(lineno, "words must be a list of strings")
        entities = tuple(
            EntityMention(str(e["id"]), int(e["start"]), int(e["end"]), str(e["type"]))
            for e in obj.get("entities", [])
        )
        relations = tuple(
            RelationAnnotation(str(r["arg1"]), str(r["arg2"]), str(r["type"]))
            for r in obj.get("relations", [])
        )
        return Sentence(str(obj["id"]), tuple(words), str(obj.get("language", "")), entities, relations)
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedRecord(lineno, f"{type(exc).__name__}: {exc}") from None


def read_sentences(lines: Iterable[str], schema: RelationSchema) -> list[Sentence]:
    sentences = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(lineno, str(exc)) from None
        sentence = _parse_record(obj, lineno)
        validate_sentence(sentence, schema)
        sentences.append(sentence)
    return sentences


def load_corpus(path, schema: RelationSchema) -> list[Sentence]:
    with open(path, encoding="utf-8") as fh:
        return read_sentences(fh, schema)


def save_corpus(sentences: Iterable[Sentence], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in sentences:
            fh.write(json.dumps(s.to_dict(), ensure_ascii=False) + "\n")


def load_schema(path) -> RelationSchema:
    return RelationSchema.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_schema(schema: RelationSchema, path) -> None:
    Path(path).write_text(json.dumps(schema.to_dict(), indent=2) + "\n", encoding="utf-8")


def _disjoint_ordered(a: EntityMention, b: EntityMention) -> bool:
    return a.end < b.start


@dataclass
class CandidateSet:
    instances: list[RelationInstance] = field(default_factory=list)
    skipped: int = 0

    def __iter__(self):
        return iter(self.instances)

    def __len__(self):
        return len(self.instances)


def generate_candidates(sentence: Sentence, schema: RelationSchema) -> CandidateSet:
    """Enumerate every disjoint mention pair of ``sentence`` as a candidate.

    The textually earlier mention becomes ``e1``.  Nested or overlapping
    pairs cannot be marked and are counted in ``skipped`` instead.
    """
    gold = {}
    for r in sentence.relations:
        gold[(r.arg1, r.arg2)] = r.relation_type
    k = schema.num_relations
    order = sorted(sentence.entities, key=lambda m: (m.start, m.end, m.id))
    out = CandidateSet()
    for a, b in itertools.combinations(order, 2):
        if not _disjoint_ordered(a, b):
            out.skipped += 1
            continue
        label = 0
        if (a.id, b.id) in gold:
            label = schema.relation_index(gold[(a.id, b.id)])
        elif (b.id, a.id) in gold:
            label = schema.relation_index(gold[(b.id, a.id)])
            if schema.direction_augmented:
                label += k
        out.instances.append(RelationInstance(sentence, a, b, label))
    return out


def corpus_candidates(sentences: Iterable[Sentence], schema: RelationSchema,
                      max_negative_ratio: float | None = None, seed: int = 0) -> CandidateSet:
    """Candidates for a whole corpus, optionally downsampling null pairs."""
    out = CandidateSet()
    for s in sentences:
        c = generate_candidates(s, schema)
        out.instances.extend(c.instances)
        out.skipped += c.skipped
    if max_negative_ratio is not None:
        pos = [i for i, inst in enumerate(out.instances) if inst.label != 0]
        neg = [i for i, inst in enumerate(out.instances) if inst.label == 0]
        keep_neg = int(max_negative_ratio * len(pos))
        if len(neg) > keep_neg:
            rng = random.Random(seed)
            neg = sorted(rng.sample(neg, keep_neg))
            keep = sorted(pos + neg)
            out.instances = [out.instances[i] for i in keep]
    return out


def split_corpus(sentences: Sequence[Sentence], ratios: Sequence[float], seed: int):
    """Shuffle deterministically and cut into (train, dev, test)."""
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise BadRatios(f"ratios must be three positive numbers summing to 1, got {tuple(ratios)}")
    order = list(range(len(sentences)))
    random.Random(seed).shuffle(order)
    n = len(order)
    n_train = int(round(ratios[0] * n))
    n_dev = int(round(ratios[1] * n))
    n_dev = min(n_dev, n - n_train)
    cuts = (order[:n_train], order[n_train:n_train + n_dev], order[n_train + n_dev:])
    return tuple([sentences[i] for i in part] for part in cuts)
