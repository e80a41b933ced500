"""Parallel multilingual relation corpora from an abstract clause grammar.

Every sentence is first sampled as language-neutral content (subject and
object entities, a verb, optional modifiers and a locative adjunct) and then
realized in each language through that language's lexicon and constituent
order.  The gold relation between subject and object is a fixed function of
the verb lexeme and the two entity types; entity names are drawn from one
pool regardless of type, so the surface form never reveals the type.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path

from .corpus import EntityMention, RelationAnnotation, RelationSchema, Sentence
from .errors import EmptySpec, SchemaError

WORD_ORDERS = ("SVO", "SOV", "VSO")

DEFAULT_SCHEMA = RelationSchema(
    entity_types=("PER", "ORG", "GPE", "LOC"),
    relation_types=("Physical", "ORG-Affiliation", "Part-Whole", "Personal-Social",
                    "General-Affiliation", "Agent-Artifact"),
)

VERBS = ("leads", "joins", "visits", "owns", "meets", "supports", "attacks", "builds",
         "funds", "trusts", "hosts", "follows")
DETERMINERS = ("the", "a")
ADJECTIVES = ("big", "old", "new", "small", "famous", "local")
ADVERBS = ("yesterday", "today", "often", "again", "quietly", "recently")
PREPOSITIONS = ("in", "near", "at")
PUNCT = (".",)

_CONSONANTS = "bcdfghjklmnprstvwz"
_VOWELS = "aeiou"


@dataclass
class LanguageSpec:
    name: str
    word_order: str = "SVO"
    shared_anchor_fraction: float = 0.5
    seed: int = 0
    lexicon: dict[str, str] | None = None

    def __post_init__(self):
        if self.word_order not in WORD_ORDERS:
            raise ValueError(f"word_order must be one of {WORD_ORDERS}, got {self.word_order!r}")
        if not 0.0 <= self.shared_anchor_fraction <= 1.0:
            raise ValueError("shared_anchor_fraction must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {"name": self.name, "word_order": self.word_order,
                "shared_anchor_fraction": self.shared_anchor_fraction, "seed": self.seed}


def load_language_specs(path) -> list[LanguageSpec]:
    """Read a JSON list (or JSON-lines file) of language spec records."""
    text = Path(path).read_text(encoding="utf-8").strip()
    if text.startswith("["):
        records = json.loads(text)
    else:
        records = [json.loads(line) for line in text.splitlines() if line.strip()]
    return [LanguageSpec(r["name"], r.get("word_order", "SVO"),
                         float(r.get("shared_anchor_fraction", 0.5)), int(r.get("seed", 0)))
            for r in records]


def _pseudo_word(rng: random.Random, consonants: str, vowels: str, syllables: int) -> str:
    return "".join(rng.choice(consonants) + rng.choice(vowels) for _ in range(syllables))


def _canonical_names(n: int) -> list[str]:
    rng = random.Random("xlre-names")
    names: list[str] = []
    while len(names) < n:
        w = _pseudo_word(rng, _CONSONANTS, _VOWELS, 2).capitalize()
        if w not in names:
            names.append(w)
    return names


@dataclass(frozen=True)
class Inventory:
    """Abstract lexemes grouped by category; ids look like ``VERB:leads``."""

    categories: dict = field(default_factory=dict)

    @classmethod
    def default(cls, n_verbs: int = 8, n_names: int = 40) -> "Inventory":
        if not 1 <= n_verbs <= len(VERBS):
            raise ValueError(f"n_verbs must be in [1, {len(VERBS)}]")
        cats = {
            "VERB": list(VERBS[:n_verbs]),
            "NAME": _canonical_names(n_names),
            "DET": list(DETERMINERS),
            "ADJ": list(ADJECTIVES),
            "ADV": list(ADVERBS),
            "PREP": list(PREPOSITIONS),
            "PUNCT": list(PUNCT),
        }
        return cls({c: [f"{c}:{w}" for w in words] for c, words in cats.items()})

    def lexemes(self) -> list[str]:
        return [lx for words in self.categories.values() for lx in words]

    def __getitem__(self, category: str) -> list[str]:
        return self.categories[category]


def canonical_form(lexeme: str) -> str:
    return lexeme.split(":", 1)[1]


def anchored_lexemes(inventory: Inventory, fraction: float, seed: int) -> set[str]:
    """Lexemes that keep their shared canonical form.

    The ranking is global (seeded once per corpus), so any two languages
    share the anchors of the one with the smaller fraction.
    """
    rng = random.Random(f"anchors-{seed}")
    chosen = set()
    for cat in sorted(inventory.categories):
        ranked = list(inventory[cat])
        rng.shuffle(ranked)
        chosen.update(ranked[: int(round(fraction * len(ranked)))])
    return chosen


def build_lexicon(spec: LanguageSpec, inventory: Inventory, anchor_seed: int) -> dict[str, str]:
    anchors = anchored_lexemes(inventory, spec.shared_anchor_fraction, anchor_seed)
    canon = {canonical_form(lx) for lx in inventory.lexemes()}
    rng = random.Random(f"lexicon-{spec.name}-{spec.seed}")
    consonants = "".join(sorted(rng.sample(_CONSONANTS, 10)))
    vowels = "".join(sorted(rng.sample(_VOWELS, 3)))
    lexicon: dict[str, str] = {}
    used: set[str] = set()
    for lx in inventory.lexemes():
        if lx in anchors:
            lexicon[lx] = canonical_form(lx)
            continue
        if lx.startswith("PUNCT:"):
            lexicon[lx] = canonical_form(lx) * 2
            continue
        while True:
            w = _pseudo_word(rng, consonants, vowels, rng.choice((2, 3)))
            if lx.startswith("NAME:"):
                w = w.capitalize()
            if w not in canon and w not in used:
                break
        used.add(w)
        lexicon[lx] = w
    return lexicon


def relation_table(schema: RelationSchema, verbs, type_informative: bool) -> dict:
    """Map ``(verb lexeme, T1, T2)`` to a relation type name.

    Verb ``i`` has base relation ``i mod K``.  With ``type_informative``,
    every even-indexed verb shifts its relation by the sum of the two
    entity-type indices, so the same verb expresses different relations
    for different type pairs.
    """
    k = schema.num_relations
    table = {}
    for i, verb in enumerate(verbs):
        sensitive = type_informative and i % 2 == 0
        for a, t1 in enumerate(schema.entity_types):
            for b, t2 in enumerate(schema.entity_types):
                shift = a + b if sensitive else 0
                table[(verb, t1, t2)] = schema.relation_types[(i + shift) % k]
    return table


@dataclass(frozen=True)
class _NP:
    role: str
    entity_type: str
    names: tuple[str, ...]
    det: str | None
    adj: str | None


@dataclass(frozen=True)
class AbstractClause:
    subject: _NP
    verb: str
    obj: _NP
    adverb: str | None
    prep: str | None
    adjunct: _NP | None


def _sample_np(rng: random.Random, inv: Inventory, role: str, types) -> _NP:
    n_words = 2 if rng.random() < 0.3 else 1
    names = tuple(rng.choice(inv["NAME"]) for _ in range(n_words))
    det = rng.choice(inv["DET"]) if rng.random() < 0.5 else None
    adj = rng.choice(inv["ADJ"]) if rng.random() < 0.3 else None
    return _NP(role, rng.choice(types), names, det, adj)


def sample_clause(rng: random.Random, inv: Inventory, schema: RelationSchema) -> AbstractClause:
    types = schema.entity_types
    subject = _sample_np(rng, inv, "e1", types)
    verb = rng.choice(inv["VERB"])
    obj = _sample_np(rng, inv, "e2", types)
    adverb = rng.choice(inv["ADV"]) if rng.random() < 0.4 else None
    prep = adjunct = None
    if rng.random() < 0.5:
        prep = rng.choice(inv["PREP"])
        adjunct = _sample_np(rng, inv, "e3", types)
    return AbstractClause(subject, verb, obj, adverb, prep, adjunct)


def realize(clause: AbstractClause, spec: LanguageSpec, lexicon: dict[str, str]):
    """Linearize ``clause``; returns (words, {role: (start, end, type)})."""
    S, V, O = ("S",), ("V",), ("O",)
    pp = ()
    if clause.adjunct is not None:
        # SOV languages get postpositions placed before the object
        pp = ("X", "P") if spec.word_order == "SOV" else ("P", "X")
    adv = ("ADV",) if clause.adverb else ()
    if spec.word_order == "SVO":
        slots = adv + S + V + O + pp
    elif spec.word_order == "SOV":
        slots = adv + S + pp + O + V
    else:
        slots = V + S + O + pp + adv
    slots += ("END",)

    words: list[str] = []
    spans = {}

    def put_np(np_: _NP):
        for mod in (np_.det, np_.adj):
            if mod:
                words.append(lexicon[mod])
        start = len(words) + 1
        words.extend(lexicon[n] for n in np_.names)
        spans[np_.role] = (start, len(words), np_.entity_type)

    for slot in slots:
        if slot == "S":
            put_np(clause.subject)
        elif slot == "O":
            put_np(clause.obj)
        elif slot == "X":
            put_np(clause.adjunct)
        elif slot == "V":
            words.append(lexicon[clause.verb])
        elif slot == "P":
            words.append(lexicon[clause.prep])
        elif slot == "ADV":
            words.append(lexicon[clause.adverb])
        else:
            words.append(lexicon["PUNCT:."])
    return words, spans


@dataclass
class SyntheticCorpus:
    sentences: dict[str, list[Sentence]]
    raw_text: dict[str, list[tuple[str, ...]]]
    specs: list[LanguageSpec]
    table: dict
    inventory: Inventory

    def relation_of(self, verb: str, t1: str, t2: str) -> str:
        return self.table[(verb, t1, t2)]


def generate_synthetic(specs, schema: RelationSchema = DEFAULT_SCHEMA, n_sentences_per_language: int = 100,
                       type_informative: bool = True, seed: int = 0, n_raw: int | None = None,
                       inventory: Inventory | None = None) -> SyntheticCorpus:
    """Generate parallel labeled corpora and unlabeled text for ``specs``.

    Sentence ``i`` carries the same abstract content in every language.
    ``n_raw`` unlabeled sentences per language (default: as many as the
    labeled ones) come from an independent random stream.
    """
    specs = list(specs)
    if not specs:
        raise EmptySpec("at least one language spec is required")
    if len(schema.entity_types) < 2 or len(schema.relation_types) < 2:
        raise SchemaError("synthetic generation needs >= 2 entity types and >= 2 relation types")
    if len({s.name for s in specs}) != len(specs):
        raise ValueError("language names must be unique")
    inv = inventory or Inventory.default()
    table = relation_table(schema, inv["VERB"], type_informative)
    specs = [s if s.lexicon is not None else replace(s, lexicon=build_lexicon(s, inv, seed)) for s in specs]

    labeled_rng = random.Random(f"labeled-{seed}")
    clauses = [sample_clause(labeled_rng, inv, schema) for _ in range(n_sentences_per_language)]
    raw_rng = random.Random(f"raw-{seed}")
    n_raw = n_sentences_per_language if n_raw is None else n_raw
    raw_clauses = [sample_clause(raw_rng, inv, schema) for _ in range(n_raw)]

    sentences: dict[str, list[Sentence]] = {}
    raw: dict[str, list[tuple[str, ...]]] = {}
    for spec in specs:
        out = []
        for i, clause in enumerate(clauses):
            words, spans = realize(clause, spec, spec.lexicon)
            mentions = tuple(EntityMention(role, a, b, t) for role, (a, b, t) in sorted(spans.items()))
            rel = table[(clause.verb, clause.subject.entity_type, clause.obj.entity_type)]
            out.append(Sentence(f"{spec.name}-{i:06d}", tuple(words), spec.name, mentions,
                                (RelationAnnotation("e1", "e2", rel),)))
        sentences[spec.name] = out
        raw[spec.name] = [tuple(realize(c, spec, spec.lexicon)[0]) for c in raw_clauses]
    return SyntheticCorpus(sentences, raw, specs, table, inv)
