"""Continuous learning loop: convert accepted answers, reviewed failures,
human-led resolutions and shared links into knowledge-store mutations.

Runs per session at closure (the follow-up dialogue is only complete then);
accepted answers are learned immediately at accept time so concurrent
sessions can reuse them.  No gateway failure ever causes a Delete or
Update; the conservative fallback is always Keep / no-op.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

from . import prompts
from .gateway import SCHEMAS, Gateway, GatewayError, StructuredRequest
from .model import (
    AnswerCard,
    AuthorRole,
    CardStatus,
    EntryStatus,
    Message,
    ReviewDecision,
    Session,
    Source,
)
from .store import KnowledgeStore, MissingEntry

log = logging.getLogger(__name__)

_DOC_MARKER_RE = re.compile(r"\s*<doc_\d+>")


def _strip_doc_markers(text: str) -> str:
    return _DOC_MARKER_RE.sub("", text).strip()


@dataclass
class ReviewTask:
    """An unaccepted sent card plus everything said after it."""

    card: AnswerCard
    question: str
    references_used: List[str]
    follow_up: List[Message]


@dataclass
class ExtractionTask:
    """A refused within-scope question plus the dialogue after its trigger."""

    session_id: str
    message_id: str
    question: str
    follow_up: List[Message]


@dataclass
class ReviewSummary:
    session_id: str
    accepted_skipped: int = 0
    reviews: List[Dict[str, Any]] = field(default_factory=list)
    extractions: List[Dict[str, Any]] = field(default_factory=list)
    harvested: List[Dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "session_id": self.session_id,
            "accepted_skipped": self.accepted_skipped,
            "reviews": self.reviews,
            "extractions": self.extractions,
            "harvested": self.harvested,
        }


class FixtureFetcher:
    """Fixture-backed link fetcher: url -> document text."""

    def __init__(self, mapping: Dict[str, str]) -> None:
        self.mapping = mapping

    def __call__(self, url: str) -> str:
        if url not in self.mapping:
            raise KeyError(url)
        return self.mapping[url]


def on_card_accepted(card: AnswerCard, store: KnowledgeStore) -> str:
    """Store an accepted answer as a Validated QA pair. Idempotent per card."""
    if card.status == CardStatus.SUPPRESSED:
        raise ValueError(f"card {card.id} was suppressed; acceptance rejected")
    if card.status != CardStatus.ACCEPTED:
        raise ValueError(f"card {card.id} must be Accepted (is {card.status.value})")
    if card.learned_entry_id is not None:
        return card.learned_entry_id
    entry_id = store.insert_qa(
        question=card.rewritten_question,
        content=_strip_doc_markers(card.answer_text),
        source=Source.session(card.session_id),
        status=EntryStatus.VALIDATED,
        cause={"kind": "AcceptedCard", "card_id": card.id, "session_id": card.session_id},
    )
    card.learned_entry_id = entry_id
    return entry_id


def review_unaccepted(task: ReviewTask, gateway: Gateway, store: KnowledgeStore) -> ReviewDecision:
    """Keep/Delete/Update verdict for one unaccepted answer.

    Delete targets every reference the answer used; Update targets the
    first cited entry (the one the answer leaned on).  Gateway failures,
    and Update verdicts with nothing to update, degrade to Keep.
    """
    dialogue: List[Tuple[str, str, List[str]]] = [
        ("question", task.question, []),
        ("answer", task.card.answer_text, []),
    ]
    ref_blocks = []
    for n, eid in enumerate(task.references_used, start=1):
        entry = store.entries.get(eid)
        body = "" if entry is None else (f"Q: {entry.question}\nA: {entry.content}" if entry.question else entry.content)
        ref_blocks.append(f"<doc_{n} id={eid}>{body}</doc_{n}>")
    dialogue.append(("references", "\n".join(ref_blocks), []))
    for m in task.follow_up:
        dialogue.append((m.author.value, m.text, list(m.attachments)))
    req = StructuredRequest(
        task="review",
        system_prompt=prompts.REVIEW,
        dialogue=dialogue,
        response_schema=SCHEMAS["review"],
    )
    try:
        reply = gateway.complete_structured(req)
    except GatewayError as exc:
        log.warning("review of card %s failed: %s; keeping", task.card.id, exc)
        return ReviewDecision(action="Keep")
    action = reply["action"]
    if action == "Delete":
        if not task.references_used:
            return ReviewDecision(action="Keep")
        return ReviewDecision(action="Delete", entry_ids=list(task.references_used))
    if action == "Update":
        if not task.references_used or not reply.get("new_question") or not reply.get("new_content"):
            return ReviewDecision(action="Keep")
        return ReviewDecision(
            action="Update",
            entry_ids=[task.references_used[0]],
            new_question=reply["new_question"],
            new_content=reply["new_content"],
        )
    return ReviewDecision(action="Keep")


def extract_from_unanswered(
    task: ExtractionTask, gateway: Gateway, store: KnowledgeStore
) -> Optional[str]:
    """Mine the human-led resolution of a question the pipeline refused.
    Inserts a Provisional QA pair only when a definitive answer is found."""
    if not any(m.author == AuthorRole.ANALYST for m in task.follow_up):
        return None
    dialogue: List[Tuple[str, str, List[str]]] = [("question", task.question, [])]
    for m in task.follow_up:
        dialogue.append((m.author.value, m.text, list(m.attachments)))
    req = StructuredRequest(
        task="extract",
        system_prompt=prompts.REVIEW,
        dialogue=dialogue,
        response_schema=SCHEMAS["extract"],
    )
    try:
        reply = gateway.complete_structured(req)
    except GatewayError as exc:
        log.warning("extraction for %s failed: %s; skipping", task.message_id, exc)
        return None
    if not reply.get("found"):
        return None
    question = (reply.get("question") or task.question).strip()
    answer = (reply.get("answer") or "").strip()
    if not question or not answer:
        return None
    return store.insert_qa(
        question=question,
        content=answer,
        source=Source.session(task.session_id),
        status=EntryStatus.PROVISIONAL,
        cause={
            "kind": "UnansweredExtraction",
            "session_id": task.session_id,
            "message_id": task.message_id,
        },
    )


def harvest_links(
    session: Session,
    fetcher: Optional[Callable[[str], str]],
    store: KnowledgeStore,
    chunk_size: int = 1200,
    overlap: int = 200,
    skip_urls: Optional[set] = None,
) -> List[str]:
    """Fetch each unique link shared in the session and ingest it as doc
    chunks.  Fetch failures are skipped silently, per link."""
    if fetcher is None:
        return []
    seen: List[str] = []
    for m in session.messages:
        for url in m.links or []:
            if url not in seen:
                seen.append(url)
    ids: List[str] = []
    for url in seen:
        if skip_urls and url in skip_urls:
            continue
        try:
            text = fetcher(url)
        except Exception as exc:
            log.info("fetch failed for %s: %s; skipped", url, exc)
            continue
        try:
            ids.extend(
                store.ingest_document(
                    url,
                    text,
                    chunk_size=chunk_size,
                    overlap=overlap,
                    cause={"kind": "DocIngestion", "url": url, "session_id": session.id},
                )
            )
        except Exception as exc:
            log.info("ingest failed for %s: %s; skipped", url, exc)
    return ids


def _done_keys(store: KnowledgeStore, session_id: str) -> set:
    """Task keys already applied, recovered from mutation-log causes so a
    crashed review resumes without double-applying."""
    done = set()
    for rec in store.mutation_log:
        cause = rec.cause or {}
        if cause.get("session_id") != session_id:
            continue
        kind = cause.get("kind")
        if kind == "UnansweredExtraction":
            done.add(("extract", cause.get("message_id")))
        elif kind == "ReviewDecision":
            done.add(("review", cause.get("card_id")))
        elif kind == "DocIngestion":
            done.add(("harvest", cause.get("url")))
    return done


def run_session_review(
    session: Session,
    gateway: Gateway,
    store: KnowledgeStore,
    fetcher: Optional[Callable[[str], str]] = None,
    review_answers: bool = True,
) -> ReviewSummary:
    """Closure-time review of every within-scope question, in order.

    Routing: accepted cards were learned at accept time (skipped here);
    sent-but-unaccepted cards go through Keep/Delete/Update review; refused
    questions go through extraction; finally shared links are harvested.
    Suppressed questions are covered by the sent card they duplicated and
    are not re-routed.  Individual task failures are isolated.
    """
    summary = ReviewSummary(session_id=session.id)
    done = _done_keys(store, session.id)
    for record in session.questions:
        trigger = session.find_message(record.message_id)
        trigger_seq = trigger.seq if trigger else 0
        if record.outcome == "suppressed":
            continue
        if record.outcome == "refused":
            if ("extract", record.message_id) in done:
                summary.extractions.append({"message_id": record.message_id, "status": "already_done"})
                continue
            task = ExtractionTask(
                session_id=session.id,
                message_id=record.message_id,
                question=record.rewritten_question,
                follow_up=[m for m in session.messages if m.seq > trigger_seq],
            )
            try:
                entry_id = extract_from_unanswered(task, gateway, store)
            except Exception as exc:
                summary.extractions.append({"message_id": record.message_id, "status": "error", "error": str(exc)})
                continue
            summary.extractions.append(
                {"message_id": record.message_id, "status": "inserted" if entry_id else "no_answer", "entry_id": entry_id}
            )
            continue
        card = session.find_card(record.card_id) if record.card_id else None
        if card is None:
            continue
        if card.status == CardStatus.ACCEPTED:
            summary.accepted_skipped += 1
            continue
        if card.status != CardStatus.SENT:
            continue
        if not review_answers:
            summary.reviews.append({"card_id": card.id, "status": "review_disabled"})
            continue
        if ("review", card.id) in done:
            summary.reviews.append({"card_id": card.id, "status": "already_done"})
            continue
        task = ReviewTask(
            card=card,
            question=record.rewritten_question,
            references_used=list(card.citations),
            follow_up=[m for m in session.messages if card.sent_seq is None or m.seq > card.sent_seq],
        )
        try:
            decision = review_unaccepted(task, gateway, store)
            muts = store.apply_review(
                decision,
                cause={"kind": "ReviewDecision", "session_id": session.id, "card_id": card.id, "action": decision.action},
            )
            summary.reviews.append(
                {"card_id": card.id, "status": "applied", "action": decision.action, "mutations": len(muts)}
            )
        except MissingEntry as exc:
            summary.reviews.append({"card_id": card.id, "status": "dropped_missing_entry", "error": str(exc)})
        except Exception as exc:
            summary.reviews.append({"card_id": card.id, "status": "error", "error": str(exc)})
    harvested = harvest_links(
        session, fetcher, store, skip_urls={k[1] for k in done if k[0] == "harvest"}
    )
    summary.harvested = [{"entry_id": eid} for eid in harvested]
    return summary
