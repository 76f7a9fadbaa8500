"""End-to-end wiring: documents -> records -> graph + index -> answers."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from kgrag.agent import (
    AggregatedEvidence,
    ConfidenceBand,
    QueryPlan,
    ReasoningChain,
    aggregate_evidence,
    build_reasoning_chain,
    estimate_confidence,
    plan,
)
from kgrag.answer import Answer, AnswerRequest, GenerationEndpoint, generate_llm, generate_template
from kgrag.chunker import ChunkingConfig, chunk_document
from kgrag.extract import ChunkRecord, CueInventory, build_chunk_record, dump_record_line
from kgrag.index import Embedder, VectorIndex, build_index
from kgrag.ingest import Document, split_sentences
from kgrag.io import atomic_write_text
from kgrag.kgraph import KnowledgeGraph, build_graph
from kgrag.retrieval import EvidenceItem, RetrievalConfig, Retriever
from kgrag.vocabulary import Vocabulary


def records_for_document(
    doc: Document,
    vocab: Vocabulary,
    chunking: ChunkingConfig | None = None,
    cues: CueInventory | None = None,
) -> list[ChunkRecord]:
    sentences = split_sentences(doc.cleaned_text, doc.doc_id)
    records = []
    for chunk in chunk_document(sentences, chunking):
        first, last = chunk.sentence_span
        records.append(build_chunk_record(chunk, sentences[first : last + 1], vocab, cues))
    return records


def build_records(
    docs: list[Document],
    vocab: Vocabulary,
    chunking: ChunkingConfig | None = None,
    cues: CueInventory | None = None,
) -> list[ChunkRecord]:
    return [r for doc in docs for r in records_for_document(doc, vocab, chunking, cues)]


def write_records(records: list[ChunkRecord], path: str | Path) -> None:
    atomic_write_text(path, "".join(dump_record_line(r) + "\n" for r in records))


def build_artifacts(records: list[ChunkRecord], embedder: Embedder | None = None) -> tuple[KnowledgeGraph, VectorIndex]:
    graph = build_graph(records)
    index = build_index({r.chunk_id: r.chunk.text for r in records}, embedder)
    return graph, index


@dataclass(frozen=True)
class Analysis:
    plan: QueryPlan
    items: tuple[EvidenceItem, ...]
    aggregated: AggregatedEvidence
    chain: ReasoningChain | None
    confidence: ConfidenceBand


class Pipeline:
    def __init__(
        self,
        records: list[ChunkRecord],
        graph: KnowledgeGraph,
        index: VectorIndex,
        vocab: Vocabulary,
        config: RetrievalConfig | None = None,
        embedder: Embedder | None = None,
    ) -> None:
        self.records = {r.chunk_id: r for r in records}
        self.graph = graph
        self.index = index
        self.vocab = vocab
        self.config = config or RetrievalConfig()
        self.retriever = Retriever(index, graph, vocab, embedder)

    @classmethod
    def from_records(cls, records: list[ChunkRecord], vocab: Vocabulary,
                     config: RetrievalConfig | None = None) -> "Pipeline":
        graph, index = build_artifacts(records)
        return cls(records, graph, index, vocab, config)

    def analyze(self, question: str, mode: str | None = None, k: int | None = None) -> Analysis:
        qplan = plan(question, self.config)
        if mode is not None or k is not None:
            qplan = QueryPlan(qplan.query, qplan.query_type, mode or qplan.mode, k or qplan.k, qplan.depth)
        items = self.retriever.retrieve(question, qplan.mode, self.config, depth=qplan.depth, k=qplan.k)
        agg = aggregate_evidence(items, self.records)
        chain = build_reasoning_chain(agg, self.graph)
        return Analysis(qplan, tuple(items), agg, chain, estimate_confidence(chain, agg))

    def answer(
        self,
        question: str,
        endpoint: GenerationEndpoint | None = None,
        mode: str | None = None,
        k: int | None = None,
        temperature: float = 0.1,
        max_tokens: int = 400,
    ) -> tuple[Analysis, Answer]:
        analysis = self.analyze(question, mode, k)
        request = AnswerRequest(
            question,
            tuple((it.chunk_id, self.records[it.chunk_id].chunk.text) for it in analysis.items),
            analysis.chain,
            temperature,
            max_tokens,
            analysis.aggregated,
            analysis.confidence,
        )
        if endpoint is None:
            return analysis, generate_template(request)
        return analysis, generate_llm(request, endpoint)


def verify_artifacts(
    records: list[ChunkRecord],
    graph: KnowledgeGraph,
    index: VectorIndex | None = None,
    vocab: Vocabulary | None = None,
) -> list[str]:
    """Referential checks between records, graph and index; returns violations."""
    problems: list[str] = []
    ids = [r.chunk_id for r in records]
    known = set(ids)
    if len(known) != len(ids):
        problems.append("records: duplicate chunk ids")

    for edge in graph.sorted_edges():
        missing = sorted(edge.evidence - known)
        if missing:
            problems.append(f"edge {edge}: evidence chunk(s) not in records: {', '.join(missing)}")
        if edge.weight < len(edge.evidence):
            problems.append(f"edge {edge}: weight {edge.weight} < |evidence| {len(edge.evidence)}")
        if not edge.evidence:
            problems.append(f"edge {edge}: no evidence")

    if vocab is not None:
        for node in graph.sorted_nodes():
            if vocab.category_of(node.node_id) != node.category:
                problems.append(f"node {node.node_id!r}: category {node.category!r} disagrees with vocabulary")

    total_triples = sum(len(r.triples) for r in records)
    total_weight = sum(e.weight for e in graph.edges.values())
    if total_triples != total_weight:
        problems.append(f"graph: total edge weight {total_weight} != extracted triples {total_triples}")

    expected = {}
    for r in records:
        for t in r.triples:
            key = (t.subject[1], t.object[1], t.predicate)
            expected.setdefault(key, set()).add(r.chunk_id)
    for key, chunks in sorted(expected.items()):
        edge = graph.edges.get(key)
        if edge is None:
            problems.append(f"graph: missing edge {key[0]} -[{key[2]}]-> {key[1]} extracted from records")
        elif not chunks <= edge.evidence:
            problems.append(f"edge {edge}: evidence lacks {sorted(chunks - edge.evidence)}")

    if index is not None:
        in_index = set(index.chunk_ids)
        for cid in sorted(known - in_index):
            problems.append(f"index: chunk {cid} missing")
        for cid in sorted(in_index - known):
            problems.append(f"index: chunk {cid} has no record")
    return problems
