"""Event-driven session life-cycle manager.

Ingests ordered session events, drives classify -> answer -> dedup -> emit,
records Accept feedback, and triggers the closure-time review.  Everything
observable (verdicts, cards, suppressions, mutations) is emitted exactly
once on the audit stream, and the whole system is deterministic under the
scripted gateway backend: replaying one event log against a fresh store
reproduces transcripts and the final store snapshot bit for bit.

Rapid-fire customer messages inside a quiet window are classified as one
batch whose trigger is the last message; the batch is flushed by the next
event that breaks the window (another author, a late message, closure, or
an explicit tick).
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

from .dedup import check_duplicate
from .gateway import Gateway
from .improve import on_card_accepted, run_session_review
from .model import (
    AnswerCard,
    AuthorRole,
    CardStatus,
    DedupConfig,
    Message,
    QuestionRecord,
    ScopeClass,
    ScopeVerdict,
    Session,
    SessionState,
)
from .pipeline import Answer, answer_question
from .scope import classify_message
from .store import KnowledgeStore

log = logging.getLogger(__name__)


class OrchestratorError(Exception):
    pass


class UnknownSession(OrchestratorError):
    pass


class UnknownCard(OrchestratorError):
    pass


@dataclass
class SessionEvent:
    """Tagged union of everything that can happen to a session."""

    kind: str  # "message_posted" | "analyst_joined" | "card_accepted" | "session_closed"
    seq: int  # global ordering key
    session_id: str
    author: Optional[AuthorRole] = None
    text: str = ""
    ts: Optional[float] = None
    attachments: List[str] = field(default_factory=list)
    message_id: Optional[str] = None
    card_id: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "seq": self.seq,
            "session_id": self.session_id,
            "author": self.author.value if self.author else None,
            "text": self.text,
            "ts": self.ts,
            "attachments": list(self.attachments),
            "message_id": self.message_id,
            "card_id": self.card_id,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "SessionEvent":
        return cls(
            kind=d["kind"],
            seq=d["seq"],
            session_id=d["session_id"],
            author=AuthorRole(d["author"]) if d.get("author") else None,
            text=d.get("text", ""),
            ts=d.get("ts"),
            attachments=list(d.get("attachments", [])),
            message_id=d.get("message_id"),
            card_id=d.get("card_id"),
        )


@dataclass
class OrchestratorConfig:
    theta: float = 0.7
    clamp_negative: bool = True
    k_per_path: int = 5
    context_cap: int = 6
    quiet_window: float = 3.0
    self_improve: bool = True
    review_answers: bool = True

    @property
    def dedup(self) -> DedupConfig:
        return DedupConfig(theta=self.theta, clamp_negative=self.clamp_negative)


class Orchestrator:
    """Single-node session manager; per-session strict serialization."""

    def __init__(
        self,
        store: KnowledgeStore,
        gateway: Gateway,
        config: Optional[OrchestratorConfig] = None,
        fetcher: Optional[Callable[[str], str]] = None,
        tool_registry: Sequence[Any] = (),
        audit_sink: Optional[Callable[[Dict[str, Any]], None]] = None,
    ) -> None:
        self.store = store
        self.gateway = gateway
        self.config = config or OrchestratorConfig()
        self.fetcher = fetcher
        self.tool_registry = tool_registry
        self.audit_sink = audit_sink
        self.sessions: Dict[str, Session] = {}
        self.cursors: Dict[str, int] = {}
        self.audit: List[Dict[str, Any]] = []
        # Per-session ordered stream (message/card events) for clients.
        self.streams: Dict[str, List[Dict[str, Any]]] = {}
        self._card_sessions: Dict[str, str] = {}
        self._pending: Dict[str, List[Message]] = {}
        self.stream_listeners: List[Callable[[str, Dict[str, Any]], None]] = []

    # -- plumbing ---------------------------------------------------------

    def _emit_audit(self, event: Dict[str, Any], effects: List[Dict[str, Any]]) -> None:
        self.audit.append(event)
        effects.append(event)
        if self.audit_sink is not None:
            self.audit_sink(event)

    def _emit_stream(self, session_id: str, payload: Dict[str, Any]) -> None:
        stream = self.streams.setdefault(session_id, [])
        payload = dict(payload, cursor=len(stream))
        stream.append(payload)
        for listener in list(self.stream_listeners):
            listener(session_id, payload)

    def create_session(self, session_id: str) -> Session:
        if session_id in self.sessions:
            return self.sessions[session_id]
        session = Session(id=session_id)
        self.sessions[session_id] = session
        self.cursors[session_id] = 0
        self.streams.setdefault(session_id, [])
        return session

    def get_session(self, session_id: str) -> Session:
        if session_id not in self.sessions:
            raise UnknownSession(session_id)
        return self.sessions[session_id]

    # -- event handling ---------------------------------------------------

    def handle_event(self, ev: SessionEvent) -> List[Dict[str, Any]]:
        """Process one event; returns the audit events it produced.
        Stale events (seq <= session cursor) are dropped idempotently."""
        if ev.kind == "card_accepted":
            return self._handle_accept(ev)
        session = self.get_session(ev.session_id)
        if ev.seq <= self.cursors.get(ev.session_id, 0):
            return []
        self.cursors[ev.session_id] = ev.seq
        effects: List[Dict[str, Any]] = []
        if ev.kind == "message_posted":
            self._handle_message(session, ev, effects)
        elif ev.kind == "analyst_joined":
            self._flush_pending(session, effects)
            if session.state == SessionState.PRE_ESCALATION:
                session.mark_analyst_joined(session.next_seq)
                self._emit_audit(
                    {"event": "analyst_joined", "session_id": session.id, "at_seq": session.analyst_joined_seq},
                    effects,
                )
        elif ev.kind == "session_closed":
            self._handle_close(session, effects)
        else:
            raise OrchestratorError(f"unknown event kind {ev.kind!r}")
        return effects

    def tick(self, session_id: str, now_ts: float) -> List[Dict[str, Any]]:
        """Advance simulated time: flush a pending batch whose quiet window
        has elapsed."""
        session = self.get_session(session_id)
        effects: List[Dict[str, Any]] = []
        pending = self._pending.get(session_id) or []
        if pending and now_ts - pending[-1].ts > self.config.quiet_window:
            self._flush_pending(session, effects)
        return effects

    def _handle_message(self, session: Session, ev: SessionEvent, effects: List[Dict[str, Any]]) -> None:
        if session.state == SessionState.CLOSED:
            self._emit_audit(
                {"event": "dropped_message", "session_id": session.id, "reason": "session closed"},
                effects,
            )
            return
        if ev.author is None:
            raise OrchestratorError("message_posted requires an author")
        seq = session.next_seq
        msg = Message(
            id=ev.message_id or f"{session.id}-m{seq}",
            session_id=session.id,
            author=ev.author,
            seq=seq,
            ts=ev.ts if ev.ts is not None else float(ev.seq),
            text=ev.text,
            attachments=list(ev.attachments),
        )
        pending = self._pending.get(session.id) or []
        extends_batch = (
            ev.author == AuthorRole.CUSTOMER
            and pending
            and msg.ts - pending[-1].ts <= self.config.quiet_window
        )
        if not extends_batch:
            self._flush_pending(session, effects)
        session.append_message(msg)
        self._emit_stream(session.id, {"type": "message", **msg.to_dict()})
        self._emit_audit(
            {"event": "message", "session_id": session.id, "message_id": msg.id, "author": msg.author.value, "seq": msg.seq},
            effects,
        )
        if ev.author == AuthorRole.ANALYST and session.state == SessionState.PRE_ESCALATION:
            session.mark_analyst_joined(msg.seq)
            self._emit_audit(
                {"event": "analyst_joined", "session_id": session.id, "at_seq": msg.seq}, effects
            )
        if ev.author == AuthorRole.CUSTOMER and session.state == SessionState.ACTIVE_CYCLE:
            self._pending.setdefault(session.id, []).append(msg)
            if self.config.quiet_window <= 0:
                self._flush_pending(session, effects)

    def _handle_accept(self, ev: SessionEvent) -> List[Dict[str, Any]]:
        effects: List[Dict[str, Any]] = []
        if not ev.card_id or ev.card_id not in self._card_sessions:
            raise UnknownCard(ev.card_id or "<missing>")
        session = self.get_session(self._card_sessions[ev.card_id])
        card = session.find_card(ev.card_id)
        assert card is not None
        if card.status == CardStatus.ACCEPTED:
            # Double-click replay: idempotent.
            return effects
        card.mark_accepted()
        entry_id = None
        if self.config.self_improve:
            entry_id = on_card_accepted(card, self.store)
        self._emit_stream(session.id, {"type": "card_accepted", "card_id": card.id})
        self._emit_audit(
            {"event": "card_accepted", "session_id": session.id, "card_id": card.id, "entry_id": entry_id},
            effects,
        )
        return effects

    def _handle_close(self, session: Session, effects: List[Dict[str, Any]]) -> None:
        if session.state == SessionState.CLOSED:
            return
        self._flush_pending(session, effects)
        session.transition(SessionState.CLOSED)
        self._emit_stream(session.id, {"type": "session_closed"})
        self._emit_audit({"event": "session_closed", "session_id": session.id}, effects)
        if self.config.self_improve:
            summary = run_session_review(
                session,
                self.gateway,
                self.store,
                fetcher=self.fetcher,
                review_answers=self.config.review_answers,
            )
            self._emit_audit({"event": "session_review", **summary.to_dict()}, effects)

    # -- classification and answering -------------------------------------

    def _flush_pending(self, session: Session, effects: List[Dict[str, Any]]) -> None:
        batch = self._pending.pop(session.id, None)
        if not batch:
            return
        if session.state != SessionState.ACTIVE_CYCLE:
            return  # closed underneath us; verdicts only inside the cycle
        trigger = batch[-1]
        batch_text = "\n".join(m.text for m in batch) if len(batch) > 1 else ""
        started = time.monotonic()
        verdict = classify_message(session, trigger, self.gateway, batch_text=batch_text)
        for m in batch:
            v = ScopeVerdict(message_id=m.id, scope=verdict.scope, decided_at_seq=trigger.seq)
            session.verdicts.append(v)
            self._emit_audit(
                {"event": "verdict", "session_id": session.id, "message_id": m.id, "scope": v.scope.value},
                effects,
            )
        if verdict.scope != ScopeClass.WITHIN_SCOPE:
            return
        q, result = answer_question(
            session,
            trigger,
            self.store,
            self.gateway,
            k_per_path=self.config.k_per_path,
            context_cap=self.config.context_cap,
            tool_registry=self.tool_registry,
        )
        if not isinstance(result, Answer):
            session.questions.append(
                QuestionRecord(message_id=trigger.id, rewritten_question=q.text, outcome="refused")
            )
            self._emit_audit(
                {"event": "refusal", "session_id": session.id, "message_id": trigger.id, "reason": result.reason},
                effects,
            )
            return
        embedding = self.gateway.embed(result.text)
        report = check_duplicate(embedding, session, self.config.dedup)
        card_id = f"{session.id}-card-{len(session.cards) + 1}"
        status = CardStatus.SUPPRESSED if report.is_duplicate else CardStatus.SENT
        card = AnswerCard(
            id=card_id,
            session_id=session.id,
            trigger_message_id=trigger.id,
            rewritten_question=q.text,
            answer_text=result.text,
            citations=list(result.citations),
            embedding=embedding,
            status=status,
            sent_seq=None if report.is_duplicate else session.messages[-1].seq,
        )
        session.add_card(card)
        self._card_sessions[card.id] = session.id
        elapsed_ms = (time.monotonic() - started) * 1000.0
        if report.is_duplicate:
            session.questions.append(
                QuestionRecord(
                    message_id=trigger.id, rewritten_question=q.text, outcome="suppressed", card_id=card.id
                )
            )
            self._emit_audit(
                {
                    "event": "card_suppressed",
                    "session_id": session.id,
                    "card_id": card.id,
                    "similarity": report.max_similarity,
                    "nearest_card_id": report.nearest_card_id,
                },
                effects,
            )
            return
        session.questions.append(
            QuestionRecord(message_id=trigger.id, rewritten_question=q.text, outcome="sent", card_id=card.id)
        )
        self._emit_stream(session.id, {"type": "card", **self.card_payload(card)})
        self._emit_audit(
            {
                "event": "card_sent",
                "session_id": session.id,
                "card_id": card.id,
                "trigger_message_id": trigger.id,
                "latency_ms": elapsed_ms,
            },
            effects,
        )

    def card_payload(self, card: AnswerCard) -> Dict[str, Any]:
        """Wire shape of a card as delivered on the session stream."""
        citations = []
        for eid in card.citations:
            entry = self.store.entries.get(eid)
            citations.append(
                {
                    "entry_id": eid,
                    "title": (entry.question or entry.content[:80]) if entry else eid,
                    "url": entry.source.ref if entry and entry.source.kind == "url" else None,
                }
            )
        return {
            "id": card.id,
            "session_id": card.session_id,
            "trigger_message_id": card.trigger_message_id,
            "rewritten_question": card.rewritten_question,
            "answer_text": card.answer_text,
            "citations": citations,
            "status": card.status.value,
            "accept_action": {"method": "POST", "path": f"/cards/{card.id}/accept"},
        }

    # -- reporting ---------------------------------------------------------

    def metrics(self) -> Dict[str, Any]:
        cards = [c for s in self.sessions.values() for c in s.cards]
        return {
            "sessions": len(self.sessions),
            "sessions_closed": sum(
                1 for s in self.sessions.values() if s.state == SessionState.CLOSED
            ),
            "cards_sent": sum(1 for c in cards if c.status != CardStatus.SUPPRESSED),
            "cards_suppressed": sum(1 for c in cards if c.status == CardStatus.SUPPRESSED),
            "cards_accepted": sum(1 for c in cards if c.status == CardStatus.ACCEPTED),
            "kb_entries": len(self.store.entries),
            "kb_version": self.store.version,
        }

    def card_transcript(self) -> List[Dict[str, Any]]:
        """Deterministic flat view of every card, for replay comparison."""
        out = []
        for sid in sorted(self.sessions):
            for card in self.sessions[sid].cards:
                out.append(card.to_dict())
        return out


def replay_events(
    events: Sequence[SessionEvent],
    store: KnowledgeStore,
    gateway: Gateway,
    config: Optional[OrchestratorConfig] = None,
    fetcher: Optional[Callable[[str], str]] = None,
) -> Orchestrator:
    """Run a full event log through a fresh orchestrator."""
    orch = Orchestrator(store, gateway, config=config, fetcher=fetcher)
    for ev in events:
        orch.create_session(ev.session_id)
        orch.handle_event(ev)
    return orch
