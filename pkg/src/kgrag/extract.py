"""Cue-phrase relation extraction and chunk-record assembly."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from kgrag.chunker import Chunk
from kgrag.ingest import Sentence
from kgrag.vocabulary import EntityMention, Term, Vocabulary, match_terms

PREDICATES = ("causes", "increases", "decreases", "influences")

ALLOWED_PAIRINGS = frozenset(
    [
        ("parameter", "defect"),
        ("parameter", "mechanism"),
        ("mechanism", "defect"),
        ("defect", "consequence"),
    ]
)

# record field holding each category's deduplicated canonicals
CATEGORY_FIELDS = {
    "defect": "defect_terms",
    "parameter": "parameters",
    "mechanism": "mechanisms",
    "consequence": "consequences",
}


@dataclass(frozen=True)
class CueInventory:
    cues: dict[str, str]  # normalized cue phrase -> predicate
    negations: frozenset[str]
    negation_window: int
    pattern: re.Pattern

    @classmethod
    def from_mapping(cls, data: dict) -> "CueInventory":
        cues: dict[str, str] = {}
        for predicate, phrases in data["predicates"].items():
            if predicate not in PREDICATES:
                raise ValueError(f"unknown predicate {predicate!r}")
            for phrase in phrases:
                key = " ".join(phrase.lower().split())
                if key in cues and cues[key] != predicate:
                    raise ValueError(f"cue {key!r} assigned to {cues[key]!r} and {predicate!r}")
                cues[key] = predicate
        alts = sorted(cues, key=lambda s: (-len(s), s))
        body = "|".join(r"\s+".join(re.escape(w) for w in c.split()) for c in alts)
        pattern = re.compile(rf"(?<!\w)(?:{body})(?!\w)", re.IGNORECASE)
        return cls(
            cues,
            frozenset(w.lower() for w in data.get("negations", [])),
            int(data.get("negation_window", 3)),
            pattern,
        )


def load_cues(path: str | Path | None = None) -> CueInventory:
    if path is None:
        return default_cues()
    return CueInventory.from_mapping(json.loads(Path(path).read_text(encoding="utf-8")))


@lru_cache(maxsize=1)
def default_cues() -> CueInventory:
    raw = resources.files("kgrag").joinpath("data/cues.json").read_text(encoding="utf-8")
    return CueInventory.from_mapping(json.loads(raw))


@dataclass(frozen=True)
class RelationTriple:
    subject: Term
    predicate: str
    object: Term
    chunk_id: str
    sentence_index: int
    pattern_id: str

    def to_dict(self) -> dict:
        return {
            "subject": list(self.subject),
            "predicate": self.predicate,
            "object": list(self.object),
            "chunk_id": self.chunk_id,
            "sentence_index": self.sentence_index,
            "pattern_id": self.pattern_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RelationTriple":
        return cls(
            tuple(d["subject"]), d["predicate"], tuple(d["object"]),
            d["chunk_id"], int(d["sentence_index"]), d["pattern_id"],
        )


def _negated(text: str, cue_start: int, cues: CueInventory) -> bool:
    preceding = text[:cue_start].split()[-cues.negation_window :]
    return any(w.strip(".,;:!?()[]\"'").lower() in cues.negations for w in preceding)


def extract_relations(
    sentence: Sentence,
    mentions: list[EntityMention],
    cues: CueInventory | None = None,
) -> list[RelationTriple]:
    """Attach each cue phrase to the nearest mention on either side.

    Only the four allowed category pairings survive, a negation word in the
    few words before the cue drops the triple, and repeated
    (subject, predicate, object) within one sentence are emitted once.
    """
    cues = cues or default_cues()
    text = sentence.text
    triples: list[RelationTriple] = []
    seen: set[tuple[Term, str, Term]] = set()

    for m in cues.pattern.finditer(text):
        start, end = m.span()
        if any(ms.char_span[0] < end and start < ms.char_span[1] for ms in mentions):
            continue
        before = [ms for ms in mentions if ms.char_span[1] <= start]
        after = [ms for ms in mentions if ms.char_span[0] >= end]
        if not before or not after:
            continue
        subj = max(before, key=lambda ms: ms.char_span[1])
        obj = min(after, key=lambda ms: ms.char_span[0])
        if (subj.category, obj.category) not in ALLOWED_PAIRINGS or subj.term == obj.term:
            continue
        if _negated(text, start, cues):
            continue
        cue = " ".join(m.group().lower().split())
        predicate = cues.cues[cue]
        key = (subj.term, predicate, obj.term)
        if key in seen:
            continue
        seen.add(key)
        triples.append(
            RelationTriple(subj.term, predicate, obj.term, subj.chunk_id, sentence.index, f"{predicate}:{cue}")
        )
    return triples


@dataclass(frozen=True)
class ChunkRecord:
    chunk: Chunk
    mentions: tuple[EntityMention, ...]
    triples: tuple[RelationTriple, ...]
    defect_terms: tuple[str, ...]
    parameters: tuple[str, ...]
    mechanisms: tuple[str, ...]
    consequences: tuple[str, ...]

    @property
    def chunk_id(self) -> str:
        return self.chunk.chunk_id

    def labels(self, category: str) -> tuple[str, ...]:
        return getattr(self, CATEGORY_FIELDS[category])

    def to_dict(self) -> dict:
        return {
            "chunk": self.chunk.to_dict(),
            "mentions": [m.to_dict() for m in self.mentions],
            "triples": [t.to_dict() for t in self.triples],
            "defect_terms": list(self.defect_terms),
            "parameters": list(self.parameters),
            "mechanisms": list(self.mechanisms),
            "consequences": list(self.consequences),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChunkRecord":
        return cls(
            chunk=Chunk.from_dict(d["chunk"]),
            mentions=tuple(EntityMention.from_dict(m) for m in d["mentions"]),
            triples=tuple(RelationTriple.from_dict(t) for t in d["triples"]),
            defect_terms=tuple(d["defect_terms"]),
            parameters=tuple(d["parameters"]),
            mechanisms=tuple(d["mechanisms"]),
            consequences=tuple(d["consequences"]),
        )


def build_chunk_record(
    chunk: Chunk,
    sentences: list[Sentence],
    vocab: Vocabulary,
    cues: CueInventory | None = None,
) -> ChunkRecord:
    mentions: list[EntityMention] = []
    triples: list[RelationTriple] = []
    for sentence in sentences:
        found = match_terms(sentence, chunk.chunk_id, vocab)
        mentions.extend(found)
        triples.extend(extract_relations(sentence, found, cues))

    by_category: dict[str, list[str]] = {c: [] for c in CATEGORY_FIELDS}
    for m in mentions:
        if m.canonical not in by_category[m.category]:
            by_category[m.category].append(m.canonical)
    return ChunkRecord(
        chunk,
        tuple(mentions),
        tuple(triples),
        **{CATEGORY_FIELDS[c]: tuple(v) for c, v in by_category.items()},
    )


def dump_record_line(record: ChunkRecord) -> str:
    return json.dumps(record.to_dict(), ensure_ascii=False, sort_keys=True)


def read_records(path: str | Path) -> list[ChunkRecord]:
    records = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(ChunkRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad chunk record: {exc}") from exc
    return records
