"""Answer pipeline: rewrite -> multi-path retrieve -> rerank -> synthesize,
with a stubbed diagnostic-tool hook.

Every stage degrades rather than aborts: a rewrite timeout falls back to
the raw message, a tool failure contributes nothing, and any generation
failure becomes an explicit Refusal (which emits nothing to the session).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from . import prompts
from .gateway import REFUSAL_TEXT, SCHEMAS, Gateway, GatewayError, StructuredRequest
from .model import Message, Session
from .store import DOC_PATH, QA_PATH, KnowledgeStore

log = logging.getLogger(__name__)


@dataclass
class RewrittenQuestion:
    original_message_id: str
    text: str
    decomposed: List[str] = field(default_factory=list)


@dataclass
class RetrievalCandidate:
    entry_id: str
    path: str  # "qa" | "doc"
    score: float
    rank_after_rerank: int = -1
    question: str = ""
    content: str = ""


@dataclass
class DiagnosticContext:
    tool_name: str
    payload: str


@dataclass
class Answer:
    text: str
    citations: List[str]  # knowledge entry ids, in citation order
    doc_numbers: List[int] = field(default_factory=list)


@dataclass
class Refusal:
    reason: str


PipelineResult = Union[Answer, Refusal]


class FixtureTool:
    """Diagnostic tool stub: maps a trigger substring to a canned payload."""

    def __init__(self, name: str, mapping: Dict[str, str]) -> None:
        self.name = name
        self.mapping = mapping

    @classmethod
    def from_file(cls, name: str, path: str) -> "FixtureTool":
        import json

        with open(path, "r", encoding="utf-8") as fh:
            return cls(name, json.load(fh))

    def match(self, question: str) -> Optional[str]:
        for key, payload in sorted(self.mapping.items()):
            if key in question:
                return payload
        return None


def rewrite_question(session: Session, msg: Message, gateway: Gateway) -> RewrittenQuestion:
    dialogue = [
        (m.author.value, m.text, list(m.attachments))
        for m in session.messages
        if m.seq <= msg.seq
    ]
    req = StructuredRequest(
        task="rewrite",
        system_prompt=prompts.GENERATE,
        dialogue=dialogue,
        response_schema=SCHEMAS["rewrite"],
    )
    try:
        reply = gateway.complete_structured(req)
        text = reply["question"].strip() or msg.text
        decomposed = [s for s in reply.get("sub_questions", []) if s.strip()]
    except GatewayError as exc:
        log.warning("rewrite failed for %s: %s; using raw text", msg.id, exc)
        text, decomposed = msg.text, []
    return RewrittenQuestion(original_message_id=msg.id, text=text, decomposed=decomposed)


def retrieve_multipath(
    q: RewrittenQuestion, store: KnowledgeStore, k_per_path: int = 5
) -> List[RetrievalCandidate]:
    """Up to k candidates from the QA-pair path and k from the doc path,
    merged into one pool (reranking is the single relevance authority)."""
    if k_per_path < 1:
        raise ValueError("k_per_path must be >= 1")
    if not store.entries:
        return []
    query = store.gateway.embed(q.text)
    out: List[RetrievalCandidate] = []
    for path in (QA_PATH, DOC_PATH):
        for entry, score in store.search_embedding(query, path=path, k=k_per_path):
            out.append(
                RetrievalCandidate(
                    entry_id=entry.id,
                    path=path,
                    score=score,
                    question=entry.question,
                    content=entry.content,
                )
            )
    return out


def run_diagnostic_tools(
    q: RewrittenQuestion, registry: Sequence[Any], audit: Optional[List[Dict[str, Any]]] = None
) -> List[DiagnosticContext]:
    """Each matched tool contributes one context; failures are logged and
    swallowed, never fabricated, never fatal."""
    out: List[DiagnosticContext] = []
    for tool in registry:
        try:
            payload = tool.match(q.text)
        except Exception as exc:  # tool isolation contract
            log.warning("diagnostic tool %s failed: %s", getattr(tool, "name", "?"), exc)
            if audit is not None:
                audit.append({"event": "tool_error", "tool": getattr(tool, "name", "?"), "error": str(exc)})
            continue
        if payload is not None:
            out.append(DiagnosticContext(tool_name=tool.name, payload=payload))
    return out


def generate_answer(
    session: Session,
    q: RewrittenQuestion,
    candidates: List[RetrievalCandidate],
    diagnostics: List[DiagnosticContext],
    gateway: Gateway,
    context_cap: int = 6,
) -> PipelineResult:
    """Rerank the merged pool, present the top slice as <doc_n> references,
    and synthesize an answer or an explicit refusal."""
    presented = list(candidates)
    if presented:
        texts = [c.question if c.path == QA_PATH and c.question else c.content for c in presented]
        try:
            order = gateway.rerank(q.text, texts)
        except GatewayError as exc:
            return Refusal(f"rerank failed: {exc}")
        for rank, idx in enumerate(order):
            presented[idx].rank_after_rerank = rank
        presented = [presented[i] for i in order][:context_cap]

    trigger = session.find_message(q.original_message_id)
    dialogue: List[Tuple[str, str, List[str]]] = [
        (m.author.value, m.text, list(m.attachments))
        for m in session.messages
        if trigger is None or m.seq <= trigger.seq
    ]
    for d in diagnostics:
        dialogue.append(("diagnostics", f"[{d.tool_name}] {d.payload}", []))
    dialogue.append(("question", q.text, []))
    ref_blocks = []
    for n, c in enumerate(presented, start=1):
        body = c.content if not c.question else f"Q: {c.question}\nA: {c.content}"
        ref_blocks.append(f"<doc_{n}>{body}</doc_{n}>")
    dialogue.append(("references", "\n".join(ref_blocks), []))

    req = StructuredRequest(
        task="generate",
        system_prompt=prompts.GENERATE,
        dialogue=dialogue,
        response_schema=SCHEMAS["generate"],
    )
    try:
        reply = gateway.complete_structured(req)
    except GatewayError as exc:
        return Refusal(f"generation failed: {exc}")
    answer_text = reply["answer"].strip()
    if not answer_text or answer_text.startswith(REFUSAL_TEXT):
        return Refusal("model declined: insufficient information")
    doc_numbers = list(reply.get("citations", []))
    if any(n < 1 or n > len(presented) for n in doc_numbers):
        return Refusal("fabricated citation: doc number outside presented references")
    citations = [presented[n - 1].entry_id for n in doc_numbers]
    return Answer(text=answer_text, citations=citations, doc_numbers=doc_numbers)


def answer_question(
    session: Session,
    msg: Message,
    store: KnowledgeStore,
    gateway: Gateway,
    k_per_path: int = 5,
    context_cap: int = 6,
    tool_registry: Sequence[Any] = (),
) -> Tuple[RewrittenQuestion, PipelineResult]:
    """Full pipeline for one within-scope trigger message."""
    q = rewrite_question(session, msg, gateway)
    candidates = retrieve_multipath(q, store, k_per_path=k_per_path) if store.entries else []
    diagnostics = run_diagnostic_tools(q, tool_registry)
    result = generate_answer(session, q, candidates, diagnostics, gateway, context_cap=context_cap)
    return q, result
