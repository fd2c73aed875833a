"""Decide when to intervene: action-cycle gating plus three-way scope
classification of new customer messages.

Failures default to NoAssistanceNeeded: a missed assist is cheaper than a
wrong interruption.
"""

from __future__ import annotations

import logging
from typing import List, Tuple

from . import prompts
from .gateway import SCHEMAS, Gateway, GatewayError, StructuredRequest
from .model import AuthorRole, Message, ScopeClass, ScopeVerdict, Session, SessionState

log = logging.getLogger(__name__)


def is_cycle_active(session: Session) -> bool:
    return session.state == SessionState.ACTIVE_CYCLE


def _dialogue_context(session: Session, upto_seq: int) -> List[Tuple[str, str, List[str]]]:
    return [
        (m.author.value, m.text, list(m.attachments))
        for m in session.messages
        if m.seq <= upto_seq
    ]


def classify_message(
    session: Session, msg: Message, gateway: Gateway, batch_text: str = ""
) -> ScopeVerdict:
    """Classify one customer message (or a batched run of them) inside an
    active cycle.  ``batch_text`` overrides the trigger's own text when a
    rapid-fire batch is classified as one unit."""
    if not is_cycle_active(session):
        raise ValueError(f"session {session.id} has no active cycle")
    if msg.author != AuthorRole.CUSTOMER:
        raise ValueError("only customer messages are classified")
    dialogue = _dialogue_context(session, msg.seq)
    if batch_text:
        role, _text, attachments = dialogue[-1]
        dialogue[-1] = (role, batch_text, attachments)
    req = StructuredRequest(
        task="identify",
        system_prompt=prompts.IDENTIFY,
        dialogue=dialogue,
        response_schema=SCHEMAS["identify"],
    )
    try:
        reply = gateway.complete_structured(req)
        scope = ScopeClass(reply["class"])
    except GatewayError as exc:
        log.warning("classification failed for %s: %s; defaulting", msg.id, exc)
        scope = ScopeClass.NO_ASSISTANCE_NEEDED
    return ScopeVerdict(message_id=msg.id, scope=scope, decided_at_seq=msg.seq)


def question_already_answered(session: Session, msg: Message, gateway: Gateway) -> bool:
    """True when the analyst already resolved this question earlier in the
    session.  Folded into the classification prompt in production; exposed
    separately so the scripted backend can pin its behavior in tests."""
    req = StructuredRequest(
        task="answered",
        system_prompt=prompts.IDENTIFY,
        dialogue=_dialogue_context(session, msg.seq),
        response_schema=SCHEMAS["answered"],
    )
    try:
        return bool(gateway.complete_structured(req)["answered"])
    except GatewayError as exc:
        log.warning("answered-check failed for %s: %s; defaulting to False", msg.id, exc)
        return False
