"""Command-line entry point: ingest, build, query, eval, verify, export-graph."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

from kgrag.config import ConfigError, PipelineConfig, load_config
from kgrag.evaluation import BenchmarkError, load_benchmark, run_benchmark
from kgrag.extract import load_cues, read_records
from kgrag.index import load_index, save_index
from kgrag.ingest import LoadError, load_corpus
from kgrag.io import atomic_write_text
from kgrag.kgraph import dump_graph, load_graph, save_graph
from kgrag.pipeline import Pipeline, build_artifacts, build_records, verify_artifacts, write_records
from kgrag.vocabulary import load_vocab

logger = logging.getLogger("kgrag")

PRODUCERS = {"records": "ingest", "graph": "build", "index": "build"}


class CommandError(RuntimeError):
    pass


def _require(cfg: PipelineConfig, *names: str) -> None:
    for name in names:
        path = getattr(cfg.paths, name)
        if not Path(path).exists():
            raise CommandError(f"{name} file {path} not found; run `kgrag {PRODUCERS[name]}` first")


def _vocab(cfg: PipelineConfig):
    return load_vocab(cfg.paths.vocab)


def _load_pipeline(cfg: PipelineConfig) -> Pipeline:
    _require(cfg, "records", "graph", "index")
    return Pipeline(
        read_records(cfg.paths.records),
        load_graph(cfg.paths.graph),
        load_index(cfg.paths.index),
        _vocab(cfg),
        cfg.retrieval,
        cfg.make_embedder(),
    )


def cmd_ingest(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    errors: list[LoadError] = []
    docs = load_corpus(cfg.paths.corpus_dir, errors)
    if not docs:
        logger.warning("no documents found in %s; writing an empty records file", cfg.paths.corpus_dir)
    records = build_records(docs, _vocab(cfg), cfg.chunking, load_cues(cfg.paths.cues))
    write_records(records, cfg.paths.records)
    n_triples = sum(len(r.triples) for r in records)
    logger.info("ingested %d documents into %d chunks with %d triples -> %s",
                len(docs), len(records), n_triples, cfg.paths.records)
    for err in errors:
        logger.warning("load error: %s: %s", err.source, err.message)
    return 0


def cmd_build(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    _require(cfg, "records")
    records = read_records(cfg.paths.records)
    graph, index = build_artifacts(records, cfg.make_embedder())
    save_graph(graph, cfg.paths.graph)
    save_index(index, cfg.paths.index)
    logger.info("graph: %d nodes, %d edges -> %s", len(graph.nodes), len(graph.edges), cfg.paths.graph)
    logger.info("index: %d vectors (%s) -> %s", len(index), index.embedder_id, cfg.paths.index)
    return 0


def _format_query(analysis, answer) -> str:
    lines = [f"Question: {analysis.plan.query}",
             f"Plan: type={analysis.plan.query_type} mode={analysis.plan.mode} k={analysis.plan.k} "
             f"depth={analysis.plan.depth}", "", "Evidence:"]
    if not analysis.items:
        lines.append("  (none)")
    for rank, it in enumerate(analysis.items, start=1):
        nodes = ", ".join(it.matched_nodes) or "-"
        lines.append(f"  {rank:>2}. {it.chunk_id:<36} {it.score:.4f}  {it.origin:<5}  {nodes}")
    lines.append("")
    chain = analysis.chain
    lines.append(f"Reasoning chain: {chain.render()} ({chain.source})" if chain else "Reasoning chain: none")
    lines.append(f"Confidence: {answer.confidence.band} ({answer.confidence.rationale})")
    lines += ["", f"Answer [{answer.generator}]: {answer.text}"]
    if answer.citations:
        lines.append("Citations: " + ", ".join(answer.citations))
    if answer.note:
        lines.append(f"Note: {answer.note}")
    return "\n".join(lines) + "\n"


def cmd_query(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    pipeline = _load_pipeline(cfg)
    endpoint = None if args.no_llm else cfg.make_endpoint()
    analysis, answer = pipeline.answer(
        args.question, endpoint, mode=args.mode, k=args.k,
        temperature=cfg.generation.temperature, max_tokens=cfg.generation.max_tokens,
    )
    if args.json:
        out = {
            "plan": vars(analysis.plan),
            "evidence": [it.to_dict() for it in analysis.items],
            "aggregated": analysis.aggregated.to_dict(),
            "chain": analysis.chain.to_dict() if analysis.chain else None,
            "answer": answer.to_dict(),
        }
        sys.stdout.write(json.dumps(out, indent=2, ensure_ascii=False) + "\n")
    else:
        sys.stdout.write(_format_query(analysis, answer))
    return 0


def fixture_corpus_path() -> Path:
    return Path(str(resources.files("kgrag").joinpath("data/fixture_corpus")))


def default_benchmark_path() -> Path:
    return Path(str(resources.files("kgrag").joinpath("data/benchmark.json")))


def cmd_eval(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    pipeline = _load_pipeline(cfg)
    items = load_benchmark(args.benchmark or default_benchmark_path(), pipeline.vocab)
    report = run_benchmark(items, pipeline, parallel=args.parallel)
    out = Path(args.out)
    # timing lives apart from the metric files so those stay byte-reproducible
    atomic_write_text(out / "report.json", json.dumps(report.to_dict(include_timing=False), indent=2) + "\n")
    atomic_write_text(out / "report.txt", report.table(include_timing=False))
    timing = {
        "per_query": {r.qid: r.metrics.latency_s for r in report.per_query},
        "mean_latency_s": report.means["latency_s"],
    }
    atomic_write_text(out / "timing.json", json.dumps(timing, indent=2) + "\n")
    sys.stdout.write(report.table(include_timing=True))
    return 0


def cmd_verify(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    _require(cfg, "records", "graph")
    records = read_records(cfg.paths.records)
    graph = load_graph(cfg.paths.graph)
    index = load_index(cfg.paths.index) if Path(cfg.paths.index).exists() else None
    if index is None:
        logger.warning("index file %s not found; skipping index checks", cfg.paths.index)
    problems = verify_artifacts(records, graph, index, _vocab(cfg))
    for p in problems:
        sys.stdout.write(f"VIOLATION {p}\n")
    sys.stdout.write(
        f"verify: {len(records)} records, {len(graph.nodes)} nodes, {len(graph.edges)} edges, "
        f"{len(problems)} violation(s)\n"
    )
    return 1 if problems else 0


def cmd_export_graph(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    _require(cfg, "graph")
    sys.stdout.write(dump_graph(load_graph(cfg.paths.graph)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config JSON")
    common.add_argument("--vocab", help="vocabulary JSON (overrides config)")
    common.add_argument("--corpus", help="corpus directory (overrides config); @fixture = bundled fixture")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING, ...")

    parser = argparse.ArgumentParser(prog="kgrag", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="clean, segment, chunk and extract the corpus")
    p.set_defaults(func=cmd_ingest)
    p = sub.add_parser("build", parents=[common], help="build the knowledge graph and vector index")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", parents=[common], help="answer one question")
    p.add_argument("question")
    p.add_argument("--mode", choices=["text", "graph", "hybrid"])
    p.add_argument("--k", type=int)
    p.add_argument("--no-llm", action="store_true", help="always use the template answer")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("eval", parents=[common], help="run a benchmark question set")
    p.add_argument("--benchmark", help="benchmark JSON (default: bundled fixture benchmark)")
    p.add_argument("--out", default="eval_out", help="report directory")
    p.add_argument("--k", type=int)
    p.add_argument("--parallel", type=int, default=1, metavar="N", help="run N queries concurrently")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verify", parents=[common], help="check graph/records/index integrity")
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("export-graph", parents=[common], help="write the graph JSON to stdout")
    p.set_defaults(func=cmd_export_graph)
    return parser


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = load_config(args.config)
    if args.vocab:
        cfg.paths.vocab = Path(args.vocab)
    if args.corpus:
        cfg.paths.corpus_dir = fixture_corpus_path() if args.corpus == "@fixture" else Path(args.corpus)
    if getattr(args, "k", None) is not None:
        try:
            cfg.retrieval = replace(cfg.retrieval, k=args.k)
        except ValueError as exc:
            raise ConfigError(f"--k: {exc}") from exc
    if args.log_level:
        cfg.log_level = args.log_level
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"kgrag: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(
        level=str(cfg.log_level).upper(), stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )
    try:
        return args.func(cfg, args)
    except (CommandError, ConfigError, BenchmarkError, ValueError, OSError, RuntimeError) as exc:
        print(f"kgrag: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
