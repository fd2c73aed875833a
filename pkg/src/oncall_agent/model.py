"""Core domain types shared by every module.

All types are plain value objects: construction, invariant validation and
JSON (de)serialization only.  Behavior lives in the modules that consume
them.  Enum wire labels are fixed strings and must never change, since
transcripts and stored snapshots depend on them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np

UNIT_NORM_TOL = 1e-6


class AuthorRole(str, Enum):
    CUSTOMER = "Customer"
    ANALYST = "Analyst"
    AGENT = "Agent"


class SessionState(str, Enum):
    PRE_ESCALATION = "PreEscalation"
    ACTIVE_CYCLE = "ActiveCycle"
    CLOSED = "Closed"


# Forward-only ordering used to validate transitions.
_STATE_ORDER = {
    SessionState.PRE_ESCALATION: 0,
    SessionState.ACTIVE_CYCLE: 1,
    SessionState.CLOSED: 2,
}


class ScopeClass(str, Enum):
    WITHIN_SCOPE = "Within Scope"
    OUT_OF_SCOPE = "Out of Scope"
    NO_ASSISTANCE_NEEDED = "No assistance needed"


class CardStatus(str, Enum):
    SENT = "Sent"
    SUPPRESSED = "Suppressed"
    ACCEPTED = "Accepted"


class EntryKind(str, Enum):
    QA_PAIR = "QAPair"
    DOC_CHUNK = "DocChunk"


class EntryStatus(str, Enum):
    PROVISIONAL = "Provisional"
    VALIDATED = "Validated"


class InvariantError(ValueError):
    """A domain invariant was violated at construction or mutation time."""


# URLs are extracted syntactically; trailing sentence punctuation is not
# part of the URL.
_URL_RE = re.compile(r"https?://[^\s<>\"'\)\]]+")
_TRAILING_PUNCT = ".,;:!?"


def extract_links(text: str) -> List[str]:
    """Return all http/https URLs in ``text`` in order, duplicates kept."""
    links = []
    for m in _URL_RE.finditer(text):
        url = m.group(0).rstrip(_TRAILING_PUNCT)
        if url:
            links.append(url)
    return links


def check_unit_norm(vec: np.ndarray, what: str = "embedding") -> np.ndarray:
    arr = np.asarray(vec, dtype=np.float64)
    norm = float(np.linalg.norm(arr))
    if abs(norm - 1.0) > UNIT_NORM_TOL:
        raise InvariantError(f"{what} is not unit-norm (|v|={norm:.8f})")
    return arr


@dataclass
class Message:
    id: str
    session_id: str
    author: AuthorRole
    seq: int
    text: str
    ts: float = 0.0
    attachments: List[str] = field(default_factory=list)
    links: Optional[List[str]] = None

    def __post_init__(self) -> None:
        self.author = AuthorRole(self.author)
        expected = extract_links(self.text)
        if self.links is None:
            self.links = expected
        elif self.links != expected:
            raise InvariantError(
                f"message {self.id}: links {self.links} do not match text"
            )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "session_id": self.session_id,
            "author": self.author.value,
            "seq": self.seq,
            "ts": self.ts,
            "text": self.text,
            "attachments": list(self.attachments),
            "links": list(self.links or []),
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "Message":
        return cls(
            id=d["id"],
            session_id=d["session_id"],
            author=AuthorRole(d["author"]),
            seq=d["seq"],
            ts=d.get("ts", 0.0),
            text=d["text"],
            attachments=list(d.get("attachments", [])),
            links=list(d["links"]) if "links" in d else None,
        )


@dataclass
class AnswerCard:
    id: str
    session_id: str
    trigger_message_id: str
    rewritten_question: str
    answer_text: str
    citations: List[str]
    embedding: np.ndarray
    status: CardStatus
    sent_seq: Optional[int] = None
    learned_entry_id: Optional[str] = None

    def __post_init__(self) -> None:
        self.status = CardStatus(self.status)
        self.embedding = check_unit_norm(self.embedding, f"card {self.id} embedding")

    def mark_accepted(self) -> None:
        if self.status != CardStatus.SENT:
            raise InvariantError(
                f"card {self.id}: only Sent cards can be Accepted (is {self.status.value})"
            )
        self.status = CardStatus.ACCEPTED

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "session_id": self.session_id,
            "trigger_message_id": self.trigger_message_id,
            "rewritten_question": self.rewritten_question,
            "answer_text": self.answer_text,
            "citations": list(self.citations),
            "embedding": [float(x) for x in self.embedding],
            "status": self.status.value,
            "sent_seq": self.sent_seq,
            "learned_entry_id": self.learned_entry_id,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "AnswerCard":
        return cls(
            id=d["id"],
            session_id=d["session_id"],
            trigger_message_id=d["trigger_message_id"],
            rewritten_question=d["rewritten_question"],
            answer_text=d["answer_text"],
            citations=list(d["citations"]),
            embedding=np.asarray(d["embedding"], dtype=np.float64),
            status=CardStatus(d["status"]),
            sent_seq=d.get("sent_seq"),
            learned_entry_id=d.get("learned_entry_id"),
        )


@dataclass
class Source:
    """Provenance of a knowledge entry."""

    kind: str  # "session" | "url" | "manual"
    ref: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "ref": self.ref}

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "Source":
        return cls(kind=d["kind"], ref=d.get("ref", ""))

    @classmethod
    def session(cls, session_id: str) -> "Source":
        return cls("session", session_id)

    @classmethod
    def url(cls, url: str) -> "Source":
        return cls("url", url)

    @classmethod
    def manual(cls) -> "Source":
        return cls("manual")


@dataclass
class KnowledgeEntry:
    id: str
    kind: EntryKind
    question: str
    content: str
    source: Source
    status: EntryStatus
    embedding: np.ndarray
    created_seq: int
    updated_seq: int

    def __post_init__(self) -> None:
        self.kind = EntryKind(self.kind)
        self.status = EntryStatus(self.status)
        if self.kind == EntryKind.QA_PAIR:
            if not self.question or not self.content:
                raise InvariantError(
                    f"entry {self.id}: QAPair requires non-empty question and content"
                )
        else:
            if self.question:
                raise InvariantError(f"entry {self.id}: DocChunk must have empty question")
            if not self.content:
                raise InvariantError(f"entry {self.id}: DocChunk requires content")
        self.embedding = check_unit_norm(self.embedding, f"entry {self.id} embedding")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "question": self.question,
            "content": self.content,
            "source": self.source.to_dict(),
            "status": self.status.value,
            "embedding": [float(x) for x in self.embedding],
            "created_seq": self.created_seq,
            "updated_seq": self.updated_seq,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "KnowledgeEntry":
        return cls(
            id=d["id"],
            kind=EntryKind(d["kind"]),
            question=d["question"],
            content=d["content"],
            source=Source.from_dict(d["source"]),
            status=EntryStatus(d["status"]),
            embedding=np.asarray(d["embedding"], dtype=np.float64),
            created_seq=d["created_seq"],
            updated_seq=d["updated_seq"],
        )


@dataclass
class ScopeVerdict:
    message_id: str
    scope: ScopeClass
    decided_at_seq: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "message_id": self.message_id,
            "scope": self.scope.value,
            "decided_at_seq": self.decided_at_seq,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "ScopeVerdict":
        return cls(d["message_id"], ScopeClass(d["scope"]), d["decided_at_seq"])


@dataclass
class QuestionRecord:
    """Outcome of one within-scope question, kept on the session for review."""

    message_id: str
    rewritten_question: str
    outcome: str  # "sent" | "suppressed" | "refused"
    card_id: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "message_id": self.message_id,
            "rewritten_question": self.rewritten_question,
            "outcome": self.outcome,
            "card_id": self.card_id,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "QuestionRecord":
        return cls(d["message_id"], d["rewritten_question"], d["outcome"], d.get("card_id"))


@dataclass
class Session:
    id: str
    messages: List[Message] = field(default_factory=list)
    state: SessionState = SessionState.PRE_ESCALATION
    analyst_joined_seq: Optional[int] = None
    cards: List[AnswerCard] = field(default_factory=list)
    verdicts: List[ScopeVerdict] = field(default_factory=list)
    questions: List[QuestionRecord] = field(default_factory=list)

    def append_message(self, msg: Message) -> None:
        if msg.session_id != self.id:
            raise InvariantError(f"message {msg.id} belongs to session {msg.session_id}")
        if self.messages and msg.seq <= self.messages[-1].seq:
            raise InvariantError(
                f"session {self.id}: sequence numbers must strictly increase "
                f"({msg.seq} after {self.messages[-1].seq})"
            )
        self.messages.append(msg)

    def transition(self, new_state: SessionState) -> None:
        if _STATE_ORDER[new_state] < _STATE_ORDER[self.state]:
            raise InvariantError(
                f"session {self.id}: cannot move from {self.state.value} back to "
                f"{new_state.value}"
            )
        self.state = new_state

    def mark_analyst_joined(self, seq: int) -> None:
        """Analyst intervention: first Analyst message or an explicit join event."""
        if self.analyst_joined_seq is None:
            self.analyst_joined_seq = seq
        self.transition(SessionState.ACTIVE_CYCLE)

    def add_card(self, card: AnswerCard) -> None:
        trigger = self.find_message(card.trigger_message_id)
        if trigger is None:
            raise InvariantError(f"card {card.id}: unknown trigger message")
        if self.analyst_joined_seq is None or trigger.seq < self.analyst_joined_seq:
            raise InvariantError(
                f"card {card.id}: trigger precedes analyst intervention"
            )
        self.cards.append(card)

    def find_message(self, message_id: str) -> Optional[Message]:
        for m in self.messages:
            if m.id == message_id:
                return m
        return None

    def find_card(self, card_id: str) -> Optional[AnswerCard]:
        for c in self.cards:
            if c.id == card_id:
                return c
        return None

    @property
    def next_seq(self) -> int:
        return self.messages[-1].seq + 1 if self.messages else 1

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "messages": [m.to_dict() for m in self.messages],
            "state": self.state.value,
            "analyst_joined_seq": self.analyst_joined_seq,
            "cards": [c.to_dict() for c in self.cards],
            "verdicts": [v.to_dict() for v in self.verdicts],
            "questions": [q.to_dict() for q in self.questions],
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "Session":
        return cls(
            id=d["id"],
            messages=[Message.from_dict(m) for m in d.get("messages", [])],
            state=SessionState(d.get("state", "PreEscalation")),
            analyst_joined_seq=d.get("analyst_joined_seq"),
            cards=[AnswerCard.from_dict(c) for c in d.get("cards", [])],
            verdicts=[ScopeVerdict.from_dict(v) for v in d.get("verdicts", [])],
            questions=[QuestionRecord.from_dict(q) for q in d.get("questions", [])],
        )


@dataclass
class ReviewDecision:
    """Keep / Delete / Update outcome of reviewing an unaccepted answer."""

    action: str  # "Keep" | "Delete" | "Update"
    entry_ids: List[str] = field(default_factory=list)
    new_question: str = ""
    new_content: str = ""

    def __post_init__(self) -> None:
        if self.action not in ("Keep", "Delete", "Update"):
            raise InvariantError(f"unknown review action {self.action!r}")
        if self.action == "Update":
            if len(self.entry_ids) != 1:
                raise InvariantError("Update targets exactly one entry")
            if not self.new_question or not self.new_content:
                raise InvariantError("Update requires non-empty question and content")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "action": self.action,
            "entry_ids": list(self.entry_ids),
            "new_question": self.new_question,
            "new_content": self.new_content,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "ReviewDecision":
        return cls(
            action=d["action"],
            entry_ids=list(d.get("entry_ids", [])),
            new_question=d.get("new_question", ""),
            new_content=d.get("new_content", ""),
        )


@dataclass
class DedupConfig:
    theta: float = 0.7
    clamp_negative: bool = True

    def __post_init__(self) -> None:
        if not (0.0 <= self.theta <= 1.0):
            raise InvariantError(f"theta must be in [0,1], got {self.theta}")

    def to_dict(self) -> Dict[str, Any]:
        return {"theta": self.theta, "clamp_negative": self.clamp_negative}

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "DedupConfig":
        return cls(theta=d.get("theta", 0.7), clamp_negative=d.get("clamp_negative", True))
