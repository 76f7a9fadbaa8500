"""Text, graph-assisted and hybrid evidence retrieval."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from kgrag.index import EmbeddingError, Embedder, HashingEmbedder, VectorIndex
from kgrag.kgraph import KnowledgeGraph, neighbors
from kgrag.vocabulary import Vocabulary

logger = logging.getLogger(__name__)

ORIGINS = ("text", "graph", "both")


class QueryError(ValueError):
    pass


@dataclass(frozen=True)
class EvidenceItem:
    chunk_id: str
    score: float
    origin: str
    matched_nodes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not math.isfinite(self.score):
            raise ValueError(f"non-finite score for {self.chunk_id}")
        if self.origin not in ORIGINS:
            raise ValueError(f"bad origin {self.origin!r}")
        if (self.origin != "text") != bool(self.matched_nodes):
            raise ValueError(f"origin {self.origin!r} inconsistent with matched_nodes {self.matched_nodes}")

    def to_dict(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "score": self.score,
            "origin": self.origin,
            "matched_nodes": list(self.matched_nodes),
        }


@dataclass(frozen=True)
class RetrievalConfig:
    k: int = 5
    w_graph: float = 0.6
    w_text: float = 0.4
    depth_default: int = 1
    depth_explanation: int = 2
    # degenerate weightings are only allowed when asked for explicitly
    allow_unprioritized: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"retrieval.k must be >= 1, got {self.k}")
        if self.depth_default < 1 or self.depth_explanation < 1:
            raise ValueError("retrieval depths must be >= 1")
        if self.w_graph < 0 or self.w_text < 0 or not math.isclose(self.w_graph + self.w_text, 1.0, abs_tol=1e-9):
            raise ValueError(
                f"retrieval.w_graph + retrieval.w_text must equal 1 (got {self.w_graph} + {self.w_text})"
            )
        if not self.allow_unprioritized and not self.w_graph > self.w_text:
            raise ValueError("retrieval.w_graph must exceed retrieval.w_text")


def _clamp(score: float) -> float:
    return min(1.0, max(0.0, score))


class Retriever:
    """Read-only view over one index, graph and vocabulary."""

    def __init__(
        self,
        index: VectorIndex,
        graph: KnowledgeGraph,
        vocab: Vocabulary,
        embedder: Embedder | None = None,
    ) -> None:
        self.index = index
        self.graph = graph
        self.vocab = vocab
        self.embedder = embedder or HashingEmbedder()
        self._fallback = HashingEmbedder()

    def embed_query(self, query: str) -> tuple[np.ndarray, str]:
        try:
            return self.embedder.embed(query), self.embedder.embedder_id
        except EmbeddingError as exc:
            logger.warning("query embedding failed (%s); using %s", exc, self._fallback.embedder_id)
            return self._fallback.embed(query), self._fallback.embedder_id

    @staticmethod
    def _normalize(query: str) -> str:
        normalized = " ".join(query.split())
        if not normalized:
            raise QueryError("query is empty")
        return normalized

    def _scored(self, query: str, k: int, candidates=None) -> list[tuple[str, float]]:
        vec, eid = self.embed_query(query)
        if not np.any(vec):
            logger.info("query %r embeds to the zero vector; no evidence", query)
            return []
        return self.index.search(vec, k, eid, candidates=candidates)

    def retrieve_text(self, query: str, k: int) -> list[EvidenceItem]:
        query = self._normalize(query)
        return [EvidenceItem(cid, _clamp(s), "text") for cid, s in self._scored(query, k)]

    def graph_candidates(self, query: str, depth: int) -> tuple[list[str], dict[str, set[str]]]:
        """Vocabulary nodes named in the query and the chunks supporting nearby edges.

        The second value maps each candidate chunk to the endpoints of the
        edges it supports.
        """
        matched = sorted({term[1] for _, _, term in self.vocab.find(query)})
        support: dict[str, set[str]] = {}
        for node in matched:
            sub = neighbors(self.graph, node, depth, "both")
            for edge in sub.edges.values():
                for cid in edge.evidence:
                    support.setdefault(cid, set()).update((edge.src, edge.dst))
        missing = [cid for cid in support if cid not in self.index]
        if missing:
            logger.warning("%d graph evidence chunk(s) absent from the index, e.g. %s", len(missing), missing[0])
        return matched, support

    def retrieve_graph(self, query: str, k: int, depth: int = 1, fallback: bool = True) -> list[EvidenceItem]:
        query = self._normalize(query)
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        matched, support = self.graph_candidates(query, depth)
        hits = self._scored(query, k, candidates=support) if support else []
        if not hits:
            if fallback:
                logger.debug("no graph candidates for %r (matched=%s); falling back to text", query, matched)
                return self.retrieve_text(query, k)
            return []
        return [EvidenceItem(cid, _clamp(s), "graph", tuple(sorted(support[cid]))) for cid, s in hits]

    def retrieve_hybrid(self, query: str, config: RetrievalConfig, depth: int | None = None) -> list[EvidenceItem]:
        """Merge both passes with ``w_graph * g + w_text * s``; a chunk absent from a pass scores 0 there."""
        depth = config.depth_default if depth is None else depth
        graph_items = {it.chunk_id: it for it in self.retrieve_graph(query, config.k, depth, fallback=False)}
        text_items = {it.chunk_id: it for it in self.retrieve_text(query, config.k)}
        merged = []
        for cid in graph_items.keys() | text_items.keys():
            g_item, t_item = graph_items.get(cid), text_items.get(cid)
            g = g_item.score if g_item else 0.0
            s = t_item.score if t_item else 0.0
            if g_item and t_item:
                origin = "both"
            else:
                origin = "graph" if g_item else "text"
            nodes = g_item.matched_nodes if g_item else ()
            merged.append(EvidenceItem(cid, config.w_graph * g + config.w_text * s, origin, nodes))
        merged.sort(key=lambda it: (-it.score, it.chunk_id))
        return merged[: config.k]

    def retrieve(self, query: str, mode: str, config: RetrievalConfig, depth: int | None = None,
                 k: int | None = None) -> list[EvidenceItem]:
        depth = config.depth_default if depth is None else depth
        k = config.k if k is None else k
        if mode == "text":
            return self.retrieve_text(query, k)
        if mode == "graph":
            return self.retrieve_graph(query, k, depth)
        if mode == "hybrid":
            if k != config.k:
                config = replace(config, k=k)
            return self.retrieve_hybrid(query, config, depth)
        raise ValueError(f"unknown retrieval mode {mode!r}")
