"""Directed knowledge graph whose edges keep their supporting chunk ids."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from kgrag.extract import PREDICATES, ChunkRecord
from kgrag.vocabulary import CATEGORIES

EdgeKey = tuple[str, str, str]  # (src, dst, predicate)


class GraphFormatError(ValueError):
    pass


@dataclass(frozen=True)
class KGNode:
    node_id: str
    category: str


@dataclass
class KGEdge:
    src: str
    dst: str
    predicate: str
    weight: int = 0
    evidence: set[str] = field(default_factory=set)

    @property
    def key(self) -> EdgeKey:
        return (self.src, self.dst, self.predicate)

    def __str__(self) -> str:
        return f"{self.src} -[{self.predicate}]-> {self.dst}"


@dataclass(frozen=True)
class GraphPath:
    nodes: tuple[str, ...]
    edges: tuple[KGEdge, ...]

    @property
    def length(self) -> int:
        return len(self.edges)

    @property
    def total_weight(self) -> int:
        return sum(e.weight for e in self.edges)


class KnowledgeGraph:
    def __init__(self) -> None:
        self.nodes: dict[str, KGNode] = {}
        self.edges: dict[EdgeKey, KGEdge] = {}
        self._out: dict[str, list[EdgeKey]] = {}
        self._in: dict[str, list[EdgeKey]] = {}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return self.nodes == other.nodes and self.edges == other.edges

    def __repr__(self) -> str:
        return f"KnowledgeGraph(nodes={len(self.nodes)}, edges={len(self.edges)})"

    def add_node(self, node_id: str, category: str) -> KGNode:
        node = self.nodes.get(node_id)
        if node is None:
            node = self.nodes[node_id] = KGNode(node_id, category)
            self._out[node_id] = []
            self._in[node_id] = []
        elif node.category != category:
            raise ValueError(f"node {node_id!r} seen as {node.category!r} and {category!r}")
        return node

    def upsert(self, src: str, dst: str, predicate: str, chunk_id: str, weight: int = 1) -> KGEdge:
        if src == dst:
            raise ValueError(f"self-loop on {src!r}")
        if src not in self.nodes or dst not in self.nodes:
            raise KeyError(f"edge {src!r} -> {dst!r} references a missing node")
        key = (src, dst, predicate)
        edge = self.edges.get(key)
        if edge is None:
            edge = self.edges[key] = KGEdge(src, dst, predicate)
            self._out[src].append(key)
            self._in[dst].append(key)
        edge.weight += weight
        edge.evidence.add(chunk_id)
        return edge

    def add_edge(self, edge: KGEdge) -> KGEdge:
        """Insert a copy of a fully formed edge; the key must be new."""
        if edge.key in self.edges:
            raise ValueError(f"duplicate edge {edge}")
        if edge.src == edge.dst:
            raise ValueError(f"self-loop on {edge.src!r}")
        if edge.src not in self.nodes or edge.dst not in self.nodes:
            raise KeyError(f"edge {edge} references a missing node")
        copy = KGEdge(edge.src, edge.dst, edge.predicate, edge.weight, set(edge.evidence))
        self.edges[edge.key] = copy
        self._out[edge.src].append(edge.key)
        self._in[edge.dst].append(edge.key)
        return copy

    def out_edges(self, node_id: str) -> list[KGEdge]:
        return [self.edges[k] for k in self._out.get(node_id, [])]

    def in_edges(self, node_id: str) -> list[KGEdge]:
        return [self.edges[k] for k in self._in.get(node_id, [])]

    def sorted_nodes(self) -> list[KGNode]:
        return [self.nodes[n] for n in sorted(self.nodes)]

    def sorted_edges(self) -> list[KGEdge]:
        return [self.edges[k] for k in sorted(self.edges)]

    def to_dict(self) -> dict:
        return {
            "nodes": [{"node_id": n.node_id, "category": n.category} for n in self.sorted_nodes()],
            "edges": [
                {
                    "src": e.src,
                    "dst": e.dst,
                    "predicate": e.predicate,
                    "weight": e.weight,
                    "evidence": sorted(e.evidence),
                }
                for e in self.sorted_edges()
            ],
        }


def build_graph(records: Iterable[ChunkRecord]) -> KnowledgeGraph:
    graph = KnowledgeGraph()
    for record in records:
        for t in record.triples:
            graph.add_node(t.subject[1], t.subject[0])
            graph.add_node(t.object[1], t.object[0])
            graph.upsert(t.subject[1], t.object[1], t.predicate, t.chunk_id)
    return graph


def neighbors(graph: KnowledgeGraph, node_id: str, depth: int = 1, direction: str = "both") -> KnowledgeGraph:
    """Breadth-first closure of ``node_id`` out to ``depth`` hops.

    Returns a subgraph holding every reached node and every edge traversed on
    the way. An unknown node gives an empty graph, which callers treat as the
    signal to fall back to text retrieval.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if direction not in ("out", "in", "both"):
        raise ValueError(f"direction must be out, in or both, not {direction!r}")
    sub = KnowledgeGraph()
    if node_id not in graph.nodes:
        return sub

    reached = {node_id}
    traversed: set[EdgeKey] = set()
    frontier = deque([node_id])
    for _ in range(depth):
        nxt: deque[str] = deque()
        for current in sorted(frontier):
            hops: list[tuple[KGEdge, str]] = []
            if direction in ("out", "both"):
                hops += [(e, e.dst) for e in graph.out_edges(current)]
            if direction in ("in", "both"):
                hops += [(e, e.src) for e in graph.in_edges(current)]
            for edge, other in hops:
                traversed.add(edge.key)
                if other not in reached:
                    reached.add(other)
                    nxt.append(other)
        frontier = nxt
        if not frontier:
            break

    for n in sorted(reached):
        node = graph.nodes[n]
        sub.add_node(node.node_id, node.category)
    for key in sorted(traversed):
        sub.add_edge(graph.edges[key])
    return sub


def find_paths(graph: KnowledgeGraph, src: str, dst: str, max_len: int = 3) -> list[GraphPath]:
    """All simple directed paths from ``src`` to ``dst`` with at most ``max_len`` edges.

    Sorted by length ascending, then total edge weight descending, then the
    node and predicate sequences lexically.
    """
    if src == dst or src not in graph.nodes or dst not in graph.nodes:
        return []
    found: list[GraphPath] = []

    def walk(node: str, nodes: list[str], edges: list[KGEdge]) -> None:
        if len(edges) >= max_len:
            return
        for edge in graph.out_edges(node):
            if edge.dst in nodes:
                continue
            if edge.dst == dst:
                found.append(GraphPath(tuple(nodes + [dst]), tuple(edges + [edge])))
            else:
                walk(edge.dst, nodes + [edge.dst], edges + [edge])

    walk(src, [src], [])
    found.sort(key=lambda p: (p.length, -p.total_weight, p.nodes, tuple(e.predicate for e in p.edges)))
    return found


def save_graph(graph: KnowledgeGraph, path: str | Path) -> None:
    from kgrag.io import atomic_write_text

    atomic_write_text(path, dump_graph(graph))


def dump_graph(graph: KnowledgeGraph) -> str:
    return json.dumps(graph.to_dict(), indent=2, ensure_ascii=False) + "\n"


def graph_from_dict(data: object, source: str = "<graph>") -> KnowledgeGraph:
    def fail(where: str, msg: str) -> GraphFormatError:
        return GraphFormatError(f"{source}: {where}: {msg}")

    if not isinstance(data, dict) or not isinstance(data.get("nodes"), list) or not isinstance(data.get("edges"), list):
        raise fail("top level", "expected an object with 'nodes' and 'edges' arrays")
    graph = KnowledgeGraph()
    for i, node in enumerate(data["nodes"]):
        where = f"nodes[{i}]"
        if not isinstance(node, dict) or not isinstance(node.get("node_id"), str):
            raise fail(where, "expected an object with a string 'node_id'")
        if node.get("category") not in CATEGORIES:
            raise fail(where, f"category must be one of {CATEGORIES}")
        if node["node_id"] in graph.nodes:
            raise fail(where, f"duplicate node {node['node_id']!r}")
        graph.add_node(node["node_id"], node["category"])
    for i, edge in enumerate(data["edges"]):
        where = f"edges[{i}]"
        if not isinstance(edge, dict):
            raise fail(where, "expected an object")
        src, dst, pred = edge.get("src"), edge.get("dst"), edge.get("predicate")
        weight, evidence = edge.get("weight"), edge.get("evidence")
        if src not in graph.nodes or dst not in graph.nodes:
            raise fail(where, f"endpoint not among nodes ({src!r} -> {dst!r})")
        if src == dst:
            raise fail(where, "self-loop")
        if pred not in PREDICATES:
            raise fail(where, f"predicate must be one of {PREDICATES}")
        if (src, dst, pred) in graph.edges:
            raise fail(where, "duplicate (src, dst, predicate)")
        if not isinstance(weight, int) or isinstance(weight, bool) or weight < 1:
            raise fail(where, "weight must be an integer >= 1")
        if not isinstance(evidence, list) or not evidence or not all(isinstance(c, str) for c in evidence):
            raise fail(where, "evidence must be a nonempty array of chunk ids")
        if weight < len(set(evidence)):
            raise fail(where, "weight is smaller than the number of evidence chunks")
        graph.add_edge(KGEdge(src, dst, pred, weight, set(evidence)))
    return graph


def load_graph(path: str | Path) -> KnowledgeGraph:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return graph_from_dict(data, str(path))
