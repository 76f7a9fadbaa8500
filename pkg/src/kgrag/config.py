"""Pipeline configuration: one JSON document with a section per module."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path

from kgrag.answer import GenerationEndpoint
from kgrag.chunker import ChunkingConfig
from kgrag.index import Embedder, HashingEmbedder, RemoteEmbedder
from kgrag.retrieval import RetrievalConfig


class ConfigError(ValueError):
    pass


@dataclass
class Paths:
    corpus_dir: Path = Path("corpus")
    vocab: Path | None = None  # None -> bundled default
    cues: Path | None = None
    records: Path = Path("build/records.jsonl")
    graph: Path = Path("build/graph.json")
    index: Path = Path("build/index.bin")


@dataclass
class EmbedderConfig:
    kind: str = "builtin"  # builtin | remote
    url: str | None = None
    auth_header: str = "Authorization"
    timeout_ms: int = 10_000


@dataclass
class GenerationConfig:
    url: str | None = None
    auth_header: str = "Authorization"
    timeout_ms: int = 30_000
    fields: dict[str, str] = field(default_factory=dict)
    temperature: float = 0.1
    max_tokens: int = 400


@dataclass
class PipelineConfig:
    paths: Paths = field(default_factory=Paths)
    chunking: ChunkingConfig = field(default_factory=ChunkingConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    log_level: str = "INFO"

    def make_embedder(self) -> Embedder:
        if self.embedder.kind == "remote":
            return RemoteEmbedder(self.embedder.url, self.embedder.auth_header, self.embedder.timeout_ms)
        return HashingEmbedder()

    def make_endpoint(self) -> GenerationEndpoint | None:
        g = self.generation
        if not g.url:
            return None
        return GenerationEndpoint(g.url, g.auth_header, g.timeout_ms, dict(g.fields))


def _section(cls, data: object, name: str, base: Path | None = None):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"config section {name!r}: unknown field(s) {unknown}")
    values = dict(data)
    if base is not None:
        for key, value in values.items():
            if value is not None:
                p = Path(value)
                values[key] = p if p.is_absolute() else base / p
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config section {name!r}: {exc}") from exc


def config_from_dict(data: dict, base: Path | None = None) -> PipelineConfig:
    """Relative paths resolve against ``base`` (the config file's directory)."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(data) - {f.name for f in fields(PipelineConfig)})
    if unknown:
        raise ConfigError(f"unknown config section(s) {unknown}")
    cfg = PipelineConfig(
        paths=_section(Paths, data.get("paths"), "paths", base or Path(".")),
        chunking=_section(ChunkingConfig, data.get("chunking"), "chunking"),
        retrieval=_section(RetrievalConfig, data.get("retrieval"), "retrieval"),
        embedder=_section(EmbedderConfig, data.get("embedder"), "embedder"),
        generation=_section(GenerationConfig, data.get("generation"), "generation"),
        log_level=data.get("log_level", "INFO"),
    )
    validate(cfg)
    return cfg


def validate(cfg: PipelineConfig) -> None:
    if cfg.embedder.kind not in ("builtin", "remote"):
        raise ConfigError(f"embedder.kind must be 'builtin' or 'remote', not {cfg.embedder.kind!r}")
    if cfg.embedder.kind == "remote" and not cfg.embedder.url:
        raise ConfigError("embedder.url is required when embedder.kind is 'remote'")
    if not 0.0 <= cfg.generation.temperature <= 1.0:
        raise ConfigError("generation.temperature must be in [0, 1]")
    if cfg.generation.max_tokens < 1:
        raise ConfigError("generation.max_tokens must be >= 1")
    if not isinstance(logging.getLevelName(str(cfg.log_level).upper()), int):
        raise ConfigError(f"log_level: unknown level {cfg.log_level!r}")


def load_config(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return config_from_dict(data, path.parent)
