"""Corpus loading, text cleaning and rule-based sentence segmentation."""

from __future__ import annotations

import json
import logging
import re
import unicodedata
from dataclasses import dataclass
from pathlib import Path

logger = logging.getLogger(__name__)

# [12], [3, 4], [5-7], [5–7]
_CITATION_RE = re.compile(r"[ \t]*\[\s*\d+(?:\s*[,–-]\s*\d+)*\s*\]")
_HSPACE_RE = re.compile(r"[^\S\n]+")
_BOUNDARY_RE = re.compile(r"[.!?](?=\s+[A-Z0-9])")

PROTECTED_ABBREVIATIONS = frozenset(
    ["Fig.", "Figs.", "et al.", "e.g.", "i.e.", "vs.", "al.", "No.", "approx."]
)
_OPENERS = "([{\"'"


class DuplicateDocumentError(ValueError):
    """Two corpus entries resolved to the same doc_id."""


@dataclass(frozen=True)
class Document:
    doc_id: str
    source_path: str
    raw_text: str
    cleaned_text: str


@dataclass(frozen=True)
class Sentence:
    doc_id: str
    index: int
    text: str
    word_count: int


@dataclass(frozen=True)
class LoadError:
    source: str
    message: str


def clean_text(raw: str) -> str:
    """Strip numeric citation markers and control characters, normalize whitespace.

    Newlines survive; every other whitespace run becomes one space and each
    line is stripped. The function is idempotent.
    """
    text = raw.replace("\r\n", "\n").replace("\r", "\n")
    text = "".join(
        " " if ch in "\t\v\f" else ch
        for ch in text
        if ch == "\n" or ch in "\t\v\f" or unicodedata.category(ch) != "Cc"
    )
    # removal can expose a new marker, e.g. "[1[2]]"
    while True:
        stripped = _CITATION_RE.sub("", text)
        if stripped == text:
            break
        text = stripped
    text = _HSPACE_RE.sub(" ", text)
    return "\n".join(line.strip() for line in text.split("\n")).strip("\n")


def _is_protected(text: str, pos: int) -> bool:
    """True when the terminator at ``pos`` must not end a sentence."""
    start = pos
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    token = text[start : pos + 1].lstrip(_OPENERS)
    if token in PROTECTED_ABBREVIATIONS:
        return True
    if text[pos] == "." and pos > 0 and text[pos - 1].isdigit():
        nxt = pos + 1
        while nxt < len(text) and text[nxt].isspace():
            nxt += 1
        if nxt < len(text) and text[nxt].isdigit():
            return True
    return False


def split_sentences(cleaned: str, doc_id: str) -> list[Sentence]:
    pieces: list[str] = []
    start = 0
    for m in _BOUNDARY_RE.finditer(cleaned):
        if _is_protected(cleaned, m.start()):
            continue
        pieces.append(cleaned[start : m.end()])
        start = m.end()
    pieces.append(cleaned[start:])

    sentences: list[Sentence] = []
    for piece in pieces:
        text = piece.strip()
        words = len(text.split())
        if words == 0:
            continue
        sentences.append(Sentence(doc_id, len(sentences), text, words))
    return sentences


def _read_jsonl(path: Path, errors: list[LoadError]) -> list[tuple[str, str]]:
    rows = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                errors.append(LoadError(where, f"invalid JSON: {exc.msg}"))
                continue
            if not isinstance(obj, dict):
                errors.append(LoadError(where, "expected a JSON object"))
                continue
            doc_id, text = obj.get("doc_id"), obj.get("text")
            if not isinstance(doc_id, str) or not doc_id:
                errors.append(LoadError(where, "missing or empty 'doc_id'"))
                continue
            if not isinstance(text, str):
                errors.append(LoadError(where, "missing 'text' field"))
                continue
            rows.append((doc_id, text))
    return rows


def load_corpus(directory: str | Path, errors: list[LoadError] | None = None) -> list[Document]:
    """Load every ``.txt`` and ``.jsonl`` file in ``directory``.

    Per-file problems are appended to ``errors`` (and logged) without stopping
    the run. A doc_id seen twice raises :class:`DuplicateDocumentError`.
    Documents come back sorted by doc_id.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"corpus directory not found: {directory}")
    if errors is None:
        errors = []

    seen: dict[str, str] = {}
    docs: list[Document] = []

    def add(doc_id: str, source: str, raw: str) -> None:
        if doc_id in seen:
            raise DuplicateDocumentError(
                f"duplicate doc_id {doc_id!r} in {seen[doc_id]} and {source}"
            )
        seen[doc_id] = source
        docs.append(Document(doc_id, source, raw, clean_text(raw)))

    for path in sorted(directory.iterdir()):
        if not path.is_file() or path.suffix not in (".txt", ".jsonl"):
            continue
        try:
            if path.suffix == ".txt":
                add(path.stem, str(path), path.read_text(encoding="utf-8"))
            else:
                n_before = len(errors)
                for doc_id, text in _read_jsonl(path, errors):
                    add(doc_id, str(path), text)
                for err in errors[n_before:]:
                    logger.warning("skipped %s: %s", err.source, err.message)
        except (OSError, UnicodeDecodeError) as exc:
            errors.append(LoadError(str(path), str(exc)))
            logger.warning("could not read %s: %s", path, exc)

    docs.sort(key=lambda d: d.doc_id)
    return docs
