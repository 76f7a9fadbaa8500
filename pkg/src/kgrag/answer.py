"""Evidence-constrained prompts, the generation client and the template fallback."""

from __future__ import annotations

import logging
import os
import re
from dataclasses import dataclass, field

import httpx

from kgrag.agent import AggregatedEvidence, ConfidenceBand, ReasoningChain

logger = logging.getLogger(__name__)

REFUSAL_TEXT = "insufficient evidence in corpus"
INSTRUCTION = (
    "Answer the question based solely on the provided evidence. "
    "Do not use outside knowledge. If the evidence does not answer the question, say so."
)
CITE_INSTRUCTION = "Cite the evidence blocks you rely on by number, e.g. [E1]."
OPEN, CLOSE = "<<<", ">>>"
_CITATION_RE = re.compile(r"\[E(\d+)\]")
_BLOCK_HEAD_RE = re.compile(r"^\[E(\d+)\] (.+)$")
_LOW = ConfidenceBand("low", "no evidence")


@dataclass(frozen=True)
class AnswerRequest:
    question: str
    evidence: tuple[tuple[str, str], ...]  # (chunk_id, text) in score order
    chain: ReasoningChain | None = None
    temperature: float = 0.1
    max_tokens: int = 400
    aggregated: AggregatedEvidence | None = None
    confidence: ConfidenceBand = _LOW

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError(f"temperature must be in [0, 1], got {self.temperature}")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class Answer:
    text: str
    citations: tuple[str, ...]
    confidence: ConfidenceBand
    generator: str  # llm | template
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "citations": list(self.citations),
            "confidence": {"band": self.confidence.band, "rationale": self.confidence.rationale},
            "generator": self.generator,
            "note": self.note,
        }


def escape_evidence(text: str) -> str:
    """Backslash-escape so no evidence line can be mistaken for a delimiter."""
    return text.replace("\\", "\\\\").replace(OPEN, "\\" + OPEN).replace(CLOSE, "\\" + CLOSE)


def unescape_evidence(text: str) -> str:
    out, i = [], 0
    while i < len(text):
        if text[i] == "\\" and i + 1 < len(text):
            if text[i + 1] == "\\":
                out.append("\\")
                i += 2
                continue
            for delim in (OPEN, CLOSE):
                if text.startswith(delim, i + 1):
                    out.append(delim)
                    i += 1 + len(delim)
                    break
            else:
                out.append(text[i])
                i += 1
            continue
        out.append(text[i])
        i += 1
    return "".join(out)


class EmptyEvidenceError(ValueError):
    pass


def render_prompt(request: AnswerRequest) -> str:
    if not request.evidence:
        raise EmptyEvidenceError("no evidence to ground a prompt; use the refusal path")
    lines = [INSTRUCTION, "", "Evidence:"]
    for n, (chunk_id, text) in enumerate(request.evidence, start=1):
        lines += [f"[E{n}] {chunk_id}", OPEN, escape_evidence(text), CLOSE]
    if request.chain is not None:
        lines += ["", f"Candidate reasoning chain ({request.chain.source}): {request.chain.render()}"]
    lines += ["", f"Question: {request.question}", "", CITE_INSTRUCTION, ""]
    return "\n".join(lines)


def parse_prompt_evidence(prompt: str) -> list[tuple[str, str]]:
    """Recover the (chunk_id, text) blocks from a rendered prompt."""
    blocks: list[tuple[str, str]] = []
    lines = prompt.split("\n")
    i = 0
    while i < len(lines):
        head = _BLOCK_HEAD_RE.match(lines[i])
        if head and i + 1 < len(lines) and lines[i + 1] == OPEN:
            j = i + 2
            while j < len(lines) and lines[j] != CLOSE:
                j += 1
            if j == len(lines):
                raise ValueError(f"unterminated evidence block [E{head.group(1)}]")
            blocks.append((head.group(2), unescape_evidence("\n".join(lines[i + 2 : j]))))
            i = j + 1
        else:
            i += 1
    return blocks


def parse_citations(text: str, evidence: tuple[tuple[str, str], ...]) -> tuple[str, ...]:
    cited: list[str] = []
    for m in _CITATION_RE.finditer(text):
        n = int(m.group(1))
        if 1 <= n <= len(evidence):
            cid = evidence[n - 1][0]
            if cid not in cited:
                cited.append(cid)
    return tuple(cited)


def refusal(confidence: ConfidenceBand = _LOW, generator: str = "template") -> Answer:
    return Answer(REFUSAL_TEXT, (), confidence, generator)


def generate_template(request: AnswerRequest) -> Answer:
    if not request.evidence:
        return refusal(request.confidence)
    citations = tuple(cid for cid, _ in request.evidence[:3])
    if request.chain is not None:
        text = (
            f"Evidence indicates {request.chain.render()}. "
            f"Supported by {len(request.evidence)} retrieved passages."
        )
        return Answer(text, citations, request.confidence, "template")

    agg = request.aggregated
    parts = []
    if agg is not None:
        for category, label in (
            ("defect", "defects"),
            ("parameter", "parameters"),
            ("mechanism", "mechanisms"),
            ("consequence", "consequences"),
        ):
            if agg.retained.get(category):
                parts.append(f"{label}: {', '.join(agg.retained[category])}")
    if parts:
        text = "Labels supported by at least two retrieved passages: " + "; ".join(parts) + "."
    else:
        text = "No label is supported by at least two retrieved passages."
    return Answer(text, citations, request.confidence, "template")


@dataclass
class GenerationEndpoint:
    """Generic JSON-over-HTTP completion endpoint.

    ``fields`` renames the wire keys (prompt, temperature, max_tokens, text)
    for services that use other names. The key comes from ``KGRAG_LLM_KEY``.
    """

    url: str
    auth_header: str = "Authorization"
    timeout_ms: int = 30_000
    fields: dict[str, str] = field(default_factory=dict)
    api_key: str | None = None
    transport: httpx.BaseTransport | None = None

    def field_name(self, name: str) -> str:
        return self.fields.get(name, name)


def generate_llm(request: AnswerRequest, endpoint: GenerationEndpoint) -> Answer:
    if not request.evidence:
        return refusal(request.confidence)
    prompt = render_prompt(request)
    payload = {
        endpoint.field_name("prompt"): prompt,
        endpoint.field_name("temperature"): request.temperature,
        endpoint.field_name("max_tokens"): request.max_tokens,
    }
    headers = {}
    key = endpoint.api_key if endpoint.api_key is not None else os.environ.get("KGRAG_LLM_KEY")
    if key:
        headers[endpoint.auth_header] = key
    try:
        with httpx.Client(transport=endpoint.transport, timeout=endpoint.timeout_ms / 1000) as client:
            resp = client.post(endpoint.url, json=payload, headers=headers)
        resp.raise_for_status()
        text = resp.json()[endpoint.field_name("text")]
        if not isinstance(text, str) or not text.strip():
            raise ValueError("empty completion")
    except (httpx.HTTPError, ValueError, KeyError, TypeError) as exc:
        logger.warning("generation endpoint failed (%s); using template answer", exc)
        fallback = generate_template(request)
        return Answer(fallback.text, fallback.citations, fallback.confidence, "template",
                      note=f"llm fallback: {exc}")
    return Answer(text.strip(), parse_citations(text, request.evidence), request.confidence, "llm")
