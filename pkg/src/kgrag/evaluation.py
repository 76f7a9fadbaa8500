"""Benchmark runner: per-query label metrics, latency and column means."""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from kgrag.agent import QUERY_TYPES, AggregatedEvidence
from kgrag.vocabulary import Vocabulary

METRIC_NAMES = ("precision", "recall", "f1", "accuracy", "parameter_accuracy", "latency_s")


class BenchmarkError(ValueError):
    pass


@dataclass(frozen=True)
class BenchmarkItem:
    qid: str
    question: str
    expected_type: str
    gold_defects: frozenset[str]
    gold_parameters: frozenset[str]


@dataclass(frozen=True)
class LabelMetrics:
    precision: float
    recall: float
    f1: float
    accuracy: float


@dataclass(frozen=True)
class QueryMetrics:
    precision: float
    recall: float
    f1: float
    accuracy: float
    parameter_accuracy: float
    latency_s: float


@dataclass(frozen=True)
class QueryResult:
    qid: str
    query_type: str
    expected_type: str
    predicted_defects: tuple[str, ...]
    predicted_parameters: tuple[str, ...]
    metrics: QueryMetrics


@dataclass(frozen=True)
class BenchmarkReport:
    per_query: tuple[QueryResult, ...]
    means: dict[str, float]

    @property
    def retrieval_accuracy(self) -> float:
        return self.means["accuracy"]

    def to_dict(self, include_timing: bool = True) -> dict:
        names = METRIC_NAMES if include_timing else METRIC_NAMES[:-1]
        rows = []
        for r in self.per_query:
            rows.append({
                "qid": r.qid,
                "query_type": r.query_type,
                "expected_type": r.expected_type,
                "predicted_defects": list(r.predicted_defects),
                "predicted_parameters": list(r.predicted_parameters),
                **{n: getattr(r.metrics, n) for n in names},
            })
        means = {n: self.means[n] for n in names}
        means["retrieval_accuracy"] = self.means["accuracy"]
        return {"per_query": rows, "means": means}

    def table(self, include_timing: bool = True) -> str:
        """Aligned plain-text table with one row per question and a mean row."""
        header = ["Question ID", "Query Type", "Precision", "Recall", "F1-score", "Accuracy", "Param. acc."]
        if include_timing:
            header.append("Latency (s)")
        body = []
        for r in self.per_query:
            m = r.metrics
            row = [r.qid, r.query_type.capitalize(), f"{m.precision:.2f}", f"{m.recall:.2f}", f"{m.f1:.2f}",
                   f"{m.accuracy:.2f}", f"{m.parameter_accuracy:.2f}"]
            if include_timing:
                row.append(f"{m.latency_s:.4f}")
            body.append(row)
        mean_row = ["Mean", "", *(f"{self.means[n]:.4f}" for n in METRIC_NAMES[:5])]
        if include_timing:
            mean_row.append(f"{self.means['latency_s']:.4f}")
        rows = [header, *body, mean_row]
        widths = [max(len(row[i]) for row in rows) for i in range(len(header))]

        def fmt(row: list[str]) -> str:
            return "  ".join(cell.ljust(w) if i < 2 else cell.rjust(w) for i, (cell, w) in enumerate(zip(row, widths)))

        rule = "-" * len(fmt(header))
        return "\n".join([fmt(header), rule, *map(fmt, body), rule, fmt(mean_row)]) + "\n"


def compute_label_metrics(predicted: set[str] | frozenset[str], gold: set[str] | frozenset[str]) -> LabelMetrics:
    if not gold:
        raise BenchmarkError("gold label set is empty")
    hits = len(set(predicted) & set(gold))
    precision = hits / len(predicted) if predicted else 0.0
    recall = hits / len(gold)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    # accuracy: share of gold defect labels recovered by the retained set
    accuracy = hits / len(gold)
    return LabelMetrics(precision, recall, f1, accuracy)


def parameter_accuracy(predicted: set[str] | frozenset[str], gold: set[str] | frozenset[str]) -> float:
    if not gold:
        return 1.0
    return len(set(predicted) & set(gold)) / len(gold)


def parse_benchmark(data: object, vocab: Vocabulary, source: str = "<benchmark>") -> list[BenchmarkItem]:
    if not isinstance(data, list):
        raise BenchmarkError(f"{source}: expected a JSON array of benchmark items")
    items: list[BenchmarkItem] = []
    seen: set[str] = set()
    defects, params = set(vocab.canonicals("defect")), set(vocab.canonicals("parameter"))
    for i, obj in enumerate(data):
        where = f"{source}[{i}]"
        try:
            qid, question, qtype = obj["qid"], obj["question"], obj["expected_type"]
            gold_d, gold_p = obj["gold_defects"], obj.get("gold_parameters", [])
        except (KeyError, TypeError) as exc:
            raise BenchmarkError(f"{where}: missing field {exc}") from exc
        if not isinstance(qid, str) or not qid or qid in seen:
            raise BenchmarkError(f"{where}: qid must be a unique nonempty string")
        if not isinstance(question, str) or not question.strip():
            raise BenchmarkError(f"{where}: empty question")
        if qtype not in QUERY_TYPES:
            raise BenchmarkError(f"{where}: expected_type must be one of {QUERY_TYPES}")
        if not gold_d:
            raise BenchmarkError(f"{where}: gold_defects must be nonempty")
        unknown = sorted(set(gold_d) - defects) + sorted(set(gold_p) - params)
        if unknown:
            raise BenchmarkError(f"{where}: gold labels not in vocabulary: {unknown}")
        seen.add(qid)
        items.append(BenchmarkItem(qid, question, qtype, frozenset(gold_d), frozenset(gold_p)))
    return items


def load_benchmark(path: str | Path, vocab: Vocabulary) -> list[BenchmarkItem]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise BenchmarkError(f"{path}: malformed JSON at line {exc.lineno}: {exc.msg}") from exc
    return parse_benchmark(data, vocab, str(path))


class Analyzer(Protocol):
    def analyze(self, question: str): ...


def _run_one(item: BenchmarkItem, pipeline: Analyzer) -> QueryResult:
    start = time.perf_counter()
    analysis = pipeline.analyze(item.question)
    latency = time.perf_counter() - start
    agg: AggregatedEvidence = analysis.aggregated
    pred_d = tuple(agg.retained.get("defect", []))
    pred_p = tuple(agg.retained.get("parameter", []))
    lm = compute_label_metrics(set(pred_d), item.gold_defects)
    metrics = QueryMetrics(
        lm.precision, lm.recall, lm.f1, lm.accuracy,
        parameter_accuracy(set(pred_p), item.gold_parameters), latency,
    )
    return QueryResult(item.qid, analysis.plan.query_type, item.expected_type, pred_d, pred_p, metrics)


def run_benchmark(items: list[BenchmarkItem], pipeline: Analyzer, parallel: int = 1) -> BenchmarkReport:
    """Time and score plan -> retrieve -> aggregate for every item.

    ``pipeline.analyze(question)`` must return an object with ``plan`` and
    ``aggregated`` attributes. Items run sequentially unless ``parallel > 1``.
    """
    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(lambda it: _run_one(it, pipeline), items))
    else:
        results = [_run_one(it, pipeline) for it in items]
    n = len(results)
    means = {
        name: (sum(getattr(r.metrics, name) for r in results) / n if n else 0.0) for name in METRIC_NAMES
    }
    return BenchmarkReport(tuple(results), means)
