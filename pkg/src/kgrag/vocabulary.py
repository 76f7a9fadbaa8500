"""Controlled vocabularies: term normalization and mention matching."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from kgrag.ingest import Sentence

CATEGORIES = ("defect", "parameter", "mechanism", "consequence")

Term = tuple[str, str]  # (category, canonical)


class VocabularyError(ValueError):
    pass


def normalize_surface(text: str) -> str:
    return " ".join(text.lower().split())


@dataclass(frozen=True)
class EntityMention:
    chunk_id: str
    sentence_index: int
    category: str
    canonical: str
    surface: str
    char_span: tuple[int, int]

    @property
    def term(self) -> Term:
        return (self.category, self.canonical)

    def to_dict(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "sentence_index": self.sentence_index,
            "category": self.category,
            "canonical": self.canonical,
            "surface": self.surface,
            "char_span": list(self.char_span),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EntityMention":
        start, end = d["char_span"]
        return cls(
            d["chunk_id"], int(d["sentence_index"]), d["category"], d["canonical"],
            d["surface"], (int(start), int(end)),
        )


@dataclass(frozen=True)
class Vocabulary:
    """Immutable category -> canonical -> synonyms table.

    Construct through :meth:`from_mapping` (or :func:`load_vocab`) so the
    uniqueness rules are checked and the lookup tables are built.
    """

    entries: dict[str, dict[str, tuple[str, ...]]]
    _lookup: dict[str, Term] = field(repr=False, compare=False)
    _canonicals: dict[str, Term] = field(repr=False, compare=False)
    _pattern: re.Pattern | None = field(repr=False, compare=False)

    @classmethod
    def from_mapping(cls, data: object) -> "Vocabulary":
        if not isinstance(data, dict):
            raise VocabularyError("vocabulary must be a JSON object {category: {canonical: [synonyms]}}")
        entries: dict[str, dict[str, tuple[str, ...]]] = {}
        owners: dict[str, Term] = {}
        canonicals: dict[str, Term] = {}
        collisions: list[str] = []

        for category, terms in data.items():
            if category not in CATEGORIES:
                raise VocabularyError(f"unknown category {category!r}; expected one of {CATEGORIES}")
            if not isinstance(terms, dict):
                raise VocabularyError(f"category {category!r} must map canonical terms to synonym lists")
            entries[category] = {}
            for raw_canonical, synonyms in terms.items():
                canonical = normalize_surface(raw_canonical)
                if not canonical:
                    raise VocabularyError(f"empty canonical term in {category!r}")
                if not isinstance(synonyms, list) or not all(isinstance(s, str) for s in synonyms):
                    raise VocabularyError(f"synonyms of {canonical!r} must be a list of strings")
                if canonical in canonicals:
                    other = canonicals[canonical][0]
                    collisions.append(f"canonical {canonical!r} in both {other!r} and {category!r}")
                    continue
                canonicals[canonical] = (category, canonical)
                syns: list[str] = []
                for raw in synonyms:
                    syn = normalize_surface(raw)
                    if not syn:
                        raise VocabularyError(f"empty synonym for {canonical!r}")
                    if syn != canonical and syn not in syns:
                        syns.append(syn)
                entries[category][canonical] = tuple(syns)

        for category, terms in entries.items():
            for canonical, syns in terms.items():
                for surface in (canonical, *syns):
                    prev = owners.get(surface)
                    if prev is not None and prev != (category, canonical):
                        collisions.append(f"{surface!r} maps to both {prev} and {(category, canonical)}")
                    owners[surface] = (category, canonical)
        if collisions:
            raise VocabularyError("vocabulary collisions: " + "; ".join(collisions))

        pattern = None
        if owners:
            # longest alternatives first so regex alternation prefers the longest phrase
            alts = sorted(owners, key=lambda s: (-len(s), s))
            body = "|".join(r"\s+".join(re.escape(w) for w in s.split()) for s in alts)
            pattern = re.compile(rf"(?<!\w)(?:{body})(?!\w)", re.IGNORECASE)
        return cls(entries, owners, canonicals, pattern)

    def category_of(self, canonical: str) -> str | None:
        term = self._canonicals.get(canonical)
        return term[0] if term else None

    def canonicals(self, category: str | None = None) -> list[str]:
        cats = [category] if category else list(self.entries)
        return [c for cat in cats for c in self.entries.get(cat, {})]

    def lookup(self, surface: str) -> Term | None:
        return self._lookup.get(normalize_surface(surface))

    def find(self, text: str) -> list[tuple[int, int, Term]]:
        """Non-overlapping, leftmost-longest vocabulary hits in ``text``."""
        if self._pattern is None:
            return []
        hits = []
        for m in self._pattern.finditer(text):
            surface = m.group()
            # IGNORECASE also folds e.g. U+017F to "s", which lower() does not
            term = self._lookup.get(normalize_surface(surface)) or self._lookup.get(
                " ".join(surface.casefold().split())
            )
            if term is not None:
                hits.append((m.start(), m.end(), term))
        return hits


def load_vocab(path: str | Path | None = None) -> Vocabulary:
    """Load a vocabulary file; ``None`` loads the bundled default."""
    if path is None:
        raw = resources.files("kgrag").joinpath("data/default_vocab.json").read_text(encoding="utf-8")
        source = "<default vocabulary>"
    else:
        raw = Path(path).read_text(encoding="utf-8")
        source = str(path)
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise VocabularyError(f"{source}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return Vocabulary.from_mapping(data)


def normalize_term(surface: str, vocab: Vocabulary) -> Term | None:
    key = normalize_surface(surface)
    if key in vocab._canonicals:
        return vocab._canonicals[key]
    return vocab._lookup.get(key)


def match_terms(sentence: Sentence, chunk_id: str, vocab: Vocabulary) -> list[EntityMention]:
    return [
        EntityMention(chunk_id, sentence.index, cat, canonical, sentence.text[start:end], (start, end))
        for start, end, (cat, canonical) in vocab.find(sentence.text)
    ]
