"""Sentence-aligned chunking with word-count targets and sentence overlap."""

from __future__ import annotations

from dataclasses import dataclass

from kgrag.ingest import Sentence


class ChunkingConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ChunkingConfig:
    target_words: int = 220
    overlap_words: int = 40

    def __post_init__(self) -> None:
        if not (0 <= self.overlap_words < self.target_words):
            raise ChunkingConfigError(
                "chunking: need 0 <= overlap_words < target_words, got "
                f"overlap_words={self.overlap_words}, target_words={self.target_words}"
            )


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    doc_id: str
    position_index: int
    text: str
    word_count: int
    sentence_span: tuple[int, int]

    def to_dict(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "doc_id": self.doc_id,
            "position_index": self.position_index,
            "text": self.text,
            "word_count": self.word_count,
            "sentence_span": list(self.sentence_span),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Chunk":
        first, last = d["sentence_span"]
        return cls(
            chunk_id=d["chunk_id"],
            doc_id=d["doc_id"],
            position_index=int(d["position_index"]),
            text=d["text"],
            word_count=int(d["word_count"]),
            sentence_span=(int(first), int(last)),
        )


def make_chunk_id(doc_id: str, position_index: int) -> str:
    return f"{doc_id}::c{position_index}"


def _carry_start(counts: list[int], first: int, last: int, overlap: int) -> int:
    """Index of the latest sentence whose suffix up to ``last`` holds >= ``overlap`` words."""
    if overlap == 0:
        return last + 1
    carried = 0
    for j in range(last, first - 1, -1):
        carried += counts[j]
        if carried >= overlap:
            return j
    return first


def chunk_document(sentences: list[Sentence], config: ChunkingConfig | None = None) -> list[Chunk]:
    """Greedily pack whole sentences into chunks.

    A chunk closes once it holds at least ``target_words`` words. The next
    chunk re-uses the shortest run of trailing sentences totalling at least
    ``overlap_words`` and always takes at least one sentence the previous
    chunk did not have, so the loop terminates even when one long sentence
    would otherwise be carried forever.
    """
    config = config or ChunkingConfig()
    if not sentences:
        return []
    counts = [s.word_count for s in sentences]
    n = len(sentences)
    doc_id = sentences[0].doc_id

    chunks: list[Chunk] = []
    first, next_new = 0, 0
    while True:
        words = sum(counts[first:next_new])
        last = next_new
        words += counts[last]
        while words < config.target_words and last + 1 < n:
            last += 1
            words += counts[last]

        text = " ".join(s.text for s in sentences[first : last + 1])
        pos = len(chunks)
        chunks.append(
            Chunk(make_chunk_id(doc_id, pos), doc_id, pos, text, len(text.split()), (first, last))
        )
        if last == n - 1:
            return chunks
        first = _carry_start(counts, first, last, config.overlap_words)
        next_new = last + 1
