"""Chunk embeddings and exact cosine top-k search.

The default embedder is a signed feature-hashing model over lowercase
whitespace unigrams and adjacent bigrams (64-bit FNV-1a, 384 buckets). Any
object with ``embedder_id``, ``dim`` and ``embed(text) -> ndarray`` can stand
in for it, e.g. :class:`RemoteEmbedder`.
"""

from __future__ import annotations

import logging
import math
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol

import httpx
import numpy as np

from kgrag.io import atomic_write_bytes

logger = logging.getLogger(__name__)

DIM = 384
FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

INDEX_MAGIC = b"KGRAGIDX"
INDEX_VERSION = 1
_HEADER = struct.Struct("<8sIIII")  # magic, version, dim, count, len(embedder_id)


class IndexConfigError(RuntimeError):
    """Index and query were produced by different embedders, or the file is unusable."""


class EmbeddingError(RuntimeError):
    pass


class Embedder(Protocol):
    embedder_id: str
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


def fnv1a_64(data: bytes) -> int:
    h = FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & _MASK64
    return h


def hash_features(text: str) -> list[str]:
    tokens = text.lower().split()
    return tokens + [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]


class HashingEmbedder:
    embedder_id = "builtin:fnv1a-uni-bi-384"
    dim = DIM

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        for feature in hash_features(text):
            h = fnv1a_64(feature.encode("utf-8"))
            vec[h % self.dim] += -1.0 if h >> 63 else 1.0
        norm = math.sqrt(float(vec @ vec))
        if norm == 0.0:
            return vec
        return vec / norm


_default_embedder = HashingEmbedder()


def embed(text: str) -> np.ndarray:
    return _default_embedder.embed(text)


@dataclass
class RemoteEmbedder:
    """Embedding service speaking ``{"input": text}`` -> ``{"embedding": [...]}``.

    The API key is read from ``KGRAG_EMBED_KEY`` unless given explicitly.
    """

    url: str
    auth_header: str = "Authorization"
    timeout_ms: int = 10_000
    dim: int = DIM
    api_key: str | None = None
    transport: httpx.BaseTransport | None = None

    @property
    def embedder_id(self) -> str:
        return f"remote:{self.url}"

    def embed(self, text: str) -> np.ndarray:
        headers = {}
        key = self.api_key if self.api_key is not None else os.environ.get("KGRAG_EMBED_KEY")
        if key:
            headers[self.auth_header] = key
        try:
            with httpx.Client(transport=self.transport, timeout=self.timeout_ms / 1000) as client:
                resp = client.post(self.url, json={"input": text}, headers=headers)
            resp.raise_for_status()
            values = resp.json()["embedding"]
            vec = np.asarray(values, dtype=np.float64)
        except (httpx.HTTPError, ValueError, KeyError, TypeError) as exc:
            raise EmbeddingError(f"embedding request to {self.url} failed: {exc}") from exc
        if vec.shape != (self.dim,):
            raise EmbeddingError(f"embedding dimension {vec.shape} != expected ({self.dim},)")
        if not np.all(np.isfinite(vec)):
            raise EmbeddingError("embedding contains non-finite values")
        norm = float(np.linalg.norm(vec))
        return vec / norm if norm else vec


class VectorIndex:
    """Exact cosine index; entries are kept sorted by chunk_id."""

    def __init__(self, chunk_ids: list[str], vectors: np.ndarray, embedder_id: str) -> None:
        if len(set(chunk_ids)) != len(chunk_ids):
            raise ValueError("duplicate chunk ids in index")
        vectors = np.asarray(vectors, dtype=np.float32)
        if vectors.ndim != 2 or vectors.shape[0] != len(chunk_ids):
            raise ValueError("vectors must be a (count, dim) matrix matching chunk_ids")
        order = sorted(range(len(chunk_ids)), key=lambda i: chunk_ids[i])
        self.chunk_ids = [chunk_ids[i] for i in order]
        self.vectors = np.ascontiguousarray(vectors[order]) if order else vectors
        self.embedder_id = embedder_id
        self._row = {cid: i for i, cid in enumerate(self.chunk_ids)}
        rows = self.vectors.astype(np.float64)
        self._rows64 = rows
        self._norms = np.sqrt(np.einsum("ij,ij->i", rows, rows))

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.chunk_ids)

    def __contains__(self, chunk_id: str) -> bool:
        return chunk_id in self._row

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VectorIndex):
            return NotImplemented
        return (
            self.chunk_ids == other.chunk_ids
            and self.embedder_id == other.embedder_id
            and np.array_equal(self.vectors, other.vectors)
        )

    def _check(self, query_vec: np.ndarray, embedder_id: str | None) -> np.ndarray:
        if embedder_id is not None and embedder_id != self.embedder_id:
            raise IndexConfigError(
                f"query embedder {embedder_id!r} does not match index embedder {self.embedder_id!r}"
            )
        q = np.asarray(query_vec, dtype=np.float64)
        if q.shape != (self.dim,):
            raise IndexConfigError(f"query dimension {q.shape} != index dimension ({self.dim},)")
        return q

    def cosine(self, query_vec: np.ndarray, rows: np.ndarray | None = None) -> np.ndarray:
        """Cosine of ``query_vec`` against the given row indices (all rows by default).

        Zero vectors on either side score NaN so callers can drop them.
        """
        q = np.asarray(query_vec, dtype=np.float64)
        mat = self._rows64 if rows is None else self._rows64[rows]
        norms = self._norms if rows is None else self._norms[rows]
        qnorm = math.sqrt(float(q @ q))
        dots = np.einsum("ij,j->i", mat, q)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = dots / (norms * qnorm)
        out[(norms == 0) | (qnorm == 0)] = np.nan
        return out

    def search(
        self,
        query_vec: np.ndarray,
        k: int,
        embedder_id: str | None = None,
        candidates: Iterable[str] | None = None,
    ) -> list[tuple[str, float]]:
        """Top-``k`` (chunk_id, cosine) by score desc, chunk_id asc.

        ``candidates`` restricts scoring to a subset of chunk ids; ids not in
        the index are ignored.
        """
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        q = self._check(query_vec, embedder_id)
        if candidates is None:
            rows = np.arange(len(self.chunk_ids))
        else:
            rows = np.array(sorted({self._row[c] for c in candidates if c in self._row}), dtype=np.int64)
        if rows.size == 0:
            return []
        scores = self.cosine(q, rows)
        hits = [
            (self.chunk_ids[r], float(s)) for r, s in zip(rows.tolist(), scores.tolist()) if not math.isnan(s)
        ]
        hits.sort(key=lambda h: (-h[1], h[0]))
        return hits[:k]

    def to_bytes(self) -> bytes:
        eid = self.embedder_id.encode("utf-8")
        parts = [_HEADER.pack(INDEX_MAGIC, INDEX_VERSION, self.dim, len(self), len(eid)), eid]
        parts.append(self.vectors.astype("<f4").tobytes(order="C"))
        for cid in self.chunk_ids:
            raw = cid.encode("utf-8")
            parts.append(struct.pack("<I", len(raw)))
            parts.append(raw)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes, source: str = "<index>") -> "VectorIndex":
        try:
            magic, version, dim, count, eid_len = _HEADER.unpack_from(data, 0)
            if magic != INDEX_MAGIC:
                raise IndexConfigError(f"{source}: not an index file (bad magic)")
            if version != INDEX_VERSION:
                raise IndexConfigError(f"{source}: unsupported index version {version}")
            off = _HEADER.size
            embedder_id = data[off : off + eid_len].decode("utf-8")
            off += eid_len
            nbytes = 4 * dim * count
            if len(data) < off + nbytes:
                raise IndexConfigError(f"{source}: truncated vector block")
            vectors = np.frombuffer(data, dtype="<f4", count=dim * count, offset=off).reshape(count, dim)
            off += nbytes
            chunk_ids = []
            for _ in range(count):
                (n,) = struct.unpack_from("<I", data, off)
                off += 4
                chunk_ids.append(data[off : off + n].decode("utf-8"))
                off += n
        except (struct.error, UnicodeDecodeError) as exc:
            raise IndexConfigError(f"{source}: corrupt index file: {exc}") from exc
        if off != len(data):
            raise IndexConfigError(f"{source}: {len(data) - off} trailing bytes")
        return cls(chunk_ids, vectors.astype(np.float32), embedder_id)


def build_index(texts: dict[str, str], embedder: Embedder | None = None) -> VectorIndex:
    """Embed ``{chunk_id: text}``.

    If a remote embedder fails on any chunk the whole index is rebuilt with
    the built-in embedder, so one index never mixes embedding spaces.
    """
    embedder = embedder or _default_embedder
    ids = sorted(texts)
    try:
        rows = [embedder.embed(texts[cid]) for cid in ids]
        eid, dim = embedder.embedder_id, embedder.dim
    except EmbeddingError as exc:
        logger.warning("embedder %s failed (%s); building index with %s", embedder.embedder_id, exc,
                       _default_embedder.embedder_id)
        rows = [_default_embedder.embed(texts[cid]) for cid in ids]
        eid, dim = _default_embedder.embedder_id, _default_embedder.dim
    matrix = np.vstack(rows) if rows else np.zeros((0, dim))
    return VectorIndex(ids, matrix, eid)


def search(index: VectorIndex, query_vec: np.ndarray, k: int, embedder_id: str | None = None) -> list[tuple[str, float]]:
    return index.search(query_vec, k, embedder_id)


def save_index(index: VectorIndex, path: str | Path) -> None:
    atomic_write_bytes(path, index.to_bytes())


def load_index(path: str | Path) -> VectorIndex:
    return VectorIndex.from_bytes(Path(path).read_bytes(), str(path))
