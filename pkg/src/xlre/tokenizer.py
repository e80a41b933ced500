"""WordPiece-style vocabulary and greedy longest-match tokenization."""

from __future__ import annotations

import hashlib
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import RelationSchema, Sentence
from .errors import TargetTooSmall, VocabularyError

CONT = "##"
PAD, UNK, CLS, SEP, MASK = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"
E1, E1_END, E2, E2_END = "[E1]", "[/E1]", "[E2]", "[/E2]"
# on-disk id order of the fixed specials; type markers follow in schema order
FIXED_SPECIALS = (PAD, UNK, CLS, SEP, MASK, E1, E1_END, E2, E2_END)


_BRACKETED = re.compile(r"\[[^\[\]]*\]")


def marker_token(entity_type: str) -> str:
    return f"[{entity_type}]"


class Vocabulary:
    """Dense id <-> piece mapping with reserved special and marker tokens.

    Specials live in a namespace of their own: :meth:`piece_id` only looks up
    ordinary pieces, so segmentation can never emit a marker.
    """

    def __init__(self, pieces: Sequence[str], entity_types: Sequence[str]):
        self.entity_types = tuple(entity_types)
        self.specials = FIXED_SPECIALS + tuple(marker_token(t) for t in self.entity_types)
        if len(set(self.specials)) != len(self.specials):
            raise VocabularyError("entity type marker collides with a fixed special token")
        pieces = list(pieces)
        if len(set(pieces)) != len(pieces):
            raise VocabularyError("duplicate pieces")
        # reserved shape; keeps a vocabulary file unambiguous about where specials end
        if any(_BRACKETED.fullmatch(p) for p in pieces):
            raise VocabularyError("ordinary pieces may not look like [TOKEN]")
        self.tokens = list(self.specials) + pieces
        self._special_ids = {t: i for i, t in enumerate(self.specials)}
        self._piece_ids = {p: i + len(self.specials) for i, p in enumerate(pieces)}
        self.max_piece_len = max((len(p) for p in pieces), default=0)

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, piece):
        return piece in self._piece_ids

    def piece_id(self, piece: str) -> int | None:
        return self._piece_ids.get(piece)

    def special_id(self, token: str) -> int:
        return self._special_ids[token]

    def marker_id(self, entity_type: str) -> int:
        try:
            return self._special_ids[marker_token(entity_type)]
        except KeyError:
            raise VocabularyError(f"no marker token for entity type {entity_type!r}") from None

    @property
    def pad_id(self):
        return self._special_ids[PAD]

    @property
    def unk_id(self):
        return self._special_ids[UNK]

    @property
    def cls_id(self):
        return self._special_ids[CLS]

    @property
    def sep_id(self):
        return self._special_ids[SEP]

    @property
    def mask_id(self):
        return self._special_ids[MASK]

    @property
    def num_specials(self):
        return len(self.specials)

    def is_special(self, token_id: int) -> bool:
        return token_id < len(self.specials)

    def convert_ids(self, ids: Iterable[int]) -> list[str]:
        return [self.tokens[i] for i in ids]

    def content_hash(self) -> bytes:
        return hashlib.sha256("\n".join(self.tokens).encode("utf-8")).digest()

    def save(self, path) -> None:
        Path(path).write_text("\n".join(self.tokens) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path, schema: RelationSchema | None = None) -> "Vocabulary":
        """Read a vocabulary file; without ``schema`` the type markers are inferred."""
        lines = Path(path).read_text(encoding="utf-8").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        n_fixed = len(FIXED_SPECIALS)
        if tuple(lines[:n_fixed]) != FIXED_SPECIALS:
            raise VocabularyError(f"{path}: fixed special tokens missing or out of order")
        if schema is None:
            types = []
            for line in lines[n_fixed:]:
                if not _BRACKETED.fullmatch(line):
                    break
                types.append(line[1:-1])
        else:
            types = list(schema.entity_types)
            expected = tuple(marker_token(t) for t in types)
            if tuple(lines[n_fixed:n_fixed + len(types)]) != expected:
                raise VocabularyError(f"{path}: type markers do not match the schema")
        return cls(lines[n_fixed + len(types):], types)


def _alphabet(counts: Counter) -> list[str]:
    chars = sorted({ch for w in counts for ch in w})
    return chars + [CONT + ch for ch in chars]


def build_vocabulary(raw_texts: Iterable[Sequence[str]], target_size: int,
                     schema: RelationSchema) -> Vocabulary:
    """Build a vocabulary of at most ``target_size`` entries.

    Layout: specials, type markers, every seen character (initial and
    continuation form), then frequent whole words.  A quarter of the
    remaining budget is kept for frequent continuation suffixes of the
    words that did not make it whole; unused budget goes back to words.
    """
    counts: Counter = Counter()
    for words in raw_texts:
        counts.update(words)
    alphabet = _alphabet(counts)
    n_special = len(FIXED_SPECIALS) + len(schema.entity_types)
    minimum = n_special + len(alphabet)
    if target_size < minimum:
        raise TargetTooSmall(target_size, minimum)

    taken = set(alphabet)
    pieces = list(alphabet)
    budget = target_size - minimum
    words = sorted((w for w in counts if w not in taken and not _BRACKETED.fullmatch(w)), key=lambda w: (-counts[w], w))
    n_words = min(len(words), budget - budget // 4) if len(words) > budget else len(words)
    whole = words[:n_words]
    pieces += whole
    taken.update(whole)
    budget -= n_words

    suffixes: Counter = Counter()
    for w in words[n_words:]:
        for i in range(1, len(w) - 1):
            suffixes[CONT + w[i:]] += counts[w]
    ranked = sorted((s for s in suffixes if s not in taken), key=lambda s: (-suffixes[s], -len(s), s))
    extra = ranked[:budget]
    pieces += extra
    taken.update(extra)
    budget -= len(extra)
    rest = words[n_words:n_words + budget]
    pieces += rest
    return Vocabulary(pieces, schema.entity_types)


def wordpiece(word: str, vocab: Vocabulary) -> list[int]:
    """Greedy longest-match segmentation of one word into piece ids.

    Matching proceeds left to right; if no piece matches at some position,
    a single ``[UNK]`` replaces the unmatched remainder.
    """
    ids = []
    pos = 0
    n = len(word)
    while pos < n:
        end = min(n, pos + vocab.max_piece_len)
        found = None
        while end > pos:
            sub = word[pos:end]
            if pos > 0:
                sub = CONT + sub
            found = vocab.piece_id(sub)
            if found is not None:
                break
            end -= 1
        if found is None:
            ids.append(vocab.unk_id)
            break
        ids.append(found)
        pos = end
    return ids


@dataclass(frozen=True)
class TokenizedSentence:
    piece_ids: tuple[int, ...]
    word_to_pieces: tuple[tuple[int, int], ...]


def tokenize(words: Sequence[str], vocab: Vocabulary) -> TokenizedSentence:
    ids: list[int] = []
    ranges = []
    for w in words:
        start = len(ids)
        ids.extend(wordpiece(w, vocab) if w else [vocab.unk_id])
        ranges.append((start, len(ids)))
    return TokenizedSentence(tuple(ids), tuple(ranges))


def align_entity_spans(sentence: Sentence, tok: TokenizedSentence) -> dict[str, tuple[int, int]]:
    """Map each mention id to its half-open piece range ``[first, last + 1)``."""
    out = {}
    for m in sentence.entities:
        first = tok.word_to_pieces[m.start - 1][0]
        last = tok.word_to_pieces[m.end - 1][1]
        out[m.id] = (first, last)
    return out


def detokenize(piece_ids: Sequence[int], tok: TokenizedSentence, vocab: Vocabulary) -> list[str]:
    words = []
    for a, b in tok.word_to_pieces:
        pieces = vocab.convert_ids(piece_ids[a:b])
        words.append("".join(p[len(CONT):] if p.startswith(CONT) else p for p in pieces))
    return words
