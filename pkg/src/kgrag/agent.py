"""Query planning, evidence aggregation, reasoning chains and confidence bands."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from kgrag.extract import CATEGORY_FIELDS, ChunkRecord
from kgrag.kgraph import KnowledgeGraph, find_paths
from kgrag.retrieval import EvidenceItem, RetrievalConfig

QUERY_TYPES = ("lookup", "comparison", "explanation", "general")
MIN_SUPPORT = 2

_COMPARISON_CUES = ("compare", "versus", " vs ", "difference between")
_EXPLANATION_START = re.compile(r"^(why|how)\b")
_EXPLANATION_CUES = ("explain", "mechanism")
_LOOKUP_START = re.compile(r"^(what|which|list|name)\b")


class IntegrityError(RuntimeError):
    pass


def classify_query(query: str) -> str:
    q = " ".join(query.lower().split())
    padded = f" {q} "
    if any(cue in padded for cue in _COMPARISON_CUES):
        return "comparison"
    if _EXPLANATION_START.match(q) or any(cue in q for cue in _EXPLANATION_CUES):
        return "explanation"
    if _LOOKUP_START.match(q):
        return "lookup"
    return "general"


@dataclass(frozen=True)
class QueryPlan:
    query: str
    query_type: str
    mode: str
    k: int
    depth: int


_STRATEGY = {
    "explanation": "hybrid",
    "comparison": "hybrid",
    "lookup": "graph",
    "general": "text",
}


def plan(query: str, config: RetrievalConfig) -> QueryPlan:
    qtype = classify_query(query)
    depth = config.depth_explanation if qtype == "explanation" else config.depth_default
    return QueryPlan(query, qtype, _STRATEGY[qtype], config.k, depth)


def _ranked(counts: Mapping[str, int]) -> list[str]:
    return sorted(counts, key=lambda c: (-counts[c], c))


@dataclass(frozen=True)
class AggregatedEvidence:
    """Distinct-chunk support per label, plus the labels meeting the threshold.

    ``retained[category]`` lists canonicals by count desc, then name asc.
    """

    counts: dict[str, dict[str, int]] = field(default_factory=lambda: {c: {} for c in CATEGORY_FIELDS})
    retained: dict[str, list[str]] = field(default_factory=lambda: {c: [] for c in CATEGORY_FIELDS})
    chunk_ids: tuple[str, ...] = ()

    def top(self, category: str) -> str | None:
        kept = self.retained.get(category, [])
        return kept[0] if kept else None

    def count(self, category: str, canonical: str | None) -> int:
        if canonical is None:
            return 0
        return self.counts.get(category, {}).get(canonical, 0)

    def to_dict(self) -> dict:
        return {
            "counts": {c: dict(sorted(v.items())) for c, v in self.counts.items()},
            "retained": {c: list(v) for c, v in self.retained.items()},
        }


def aggregate_evidence(
    items: Iterable[EvidenceItem],
    records: Mapping[str, ChunkRecord],
    min_support: int = MIN_SUPPORT,
) -> AggregatedEvidence:
    chunk_ids: list[str] = []
    for item in items:
        if item.chunk_id not in chunk_ids:
            chunk_ids.append(item.chunk_id)

    counts: dict[str, dict[str, int]] = {c: {} for c in CATEGORY_FIELDS}
    for cid in chunk_ids:
        record = records.get(cid)
        if record is None:
            raise IntegrityError(f"retrieved chunk {cid!r} has no chunk record")
        for category in CATEGORY_FIELDS:
            for label in set(record.labels(category)):
                counts[category][label] = counts[category].get(label, 0) + 1

    retained = {
        c: [label for label in _ranked(v) if v[label] >= min_support] for c, v in counts.items()
    }
    return AggregatedEvidence(counts, retained, tuple(chunk_ids))


@dataclass(frozen=True)
class ReasoningChain:
    nodes: tuple[tuple[str, str], ...]  # (category, canonical)
    source: str  # graph_path | frequency
    supporting_chunks: tuple[str, ...] = ()

    def render(self) -> str:
        return " → ".join(canonical for _, canonical in self.nodes)

    def to_dict(self) -> dict:
        return {
            "nodes": [list(n) for n in self.nodes],
            "source": self.source,
            "supporting_chunks": list(self.supporting_chunks),
        }


def build_reasoning_chain(agg: AggregatedEvidence, graph: KnowledgeGraph) -> ReasoningChain | None:
    param, defect = agg.top("parameter"), agg.top("defect")
    if param is None or defect is None:
        return None
    paths = find_paths(graph, param, defect, max_len=3)
    if paths:
        best = paths[0]
        support = sorted({cid for edge in best.edges for cid in edge.evidence})
        nodes = tuple((graph.nodes[n].category, n) for n in best.nodes)
        return ReasoningChain(nodes, "graph_path", tuple(support))
    mech = agg.top("mechanism")
    nodes = [("parameter", param)]
    if mech is not None:
        nodes.append(("mechanism", mech))
    nodes.append(("defect", defect))
    return ReasoningChain(tuple(nodes), "frequency")


@dataclass(frozen=True)
class ConfidenceBand:
    band: str  # high | medium | low
    rationale: str


def estimate_confidence(chain: ReasoningChain | None, agg: AggregatedEvidence) -> ConfidenceBand:
    top_defect = agg.top("defect")
    n = agg.count("defect", top_defect)
    if chain is not None and chain.source == "graph_path" and n >= 3:
        return ConfidenceBand("high", f"graph path found and top defect {top_defect!r} is supported by {n} chunks")
    if chain is not None and n >= 2:
        return ConfidenceBand("medium", f"{chain.source} chain with top defect {top_defect!r} supported by {n} chunks")
    if chain is None:
        return ConfidenceBand("low", "no reasoning chain could be built from the retained labels")
    return ConfidenceBand("low", f"top defect support is {n} chunk(s)")
