import pytest

from oncall_agent.gateway import scripted_gateway
from oncall_agent.model import AuthorRole, Message, Session, SessionState
from oncall_agent.store import KnowledgeStore


@pytest.fixture
def gw():
    return scripted_gateway()


@pytest.fixture
def store(gw):
    return KnowledgeStore(gw.cfg.embedding_dim, gw)


def make_message(session_id, seq, author, text, ts=None, msg_id=None):
    return Message(
        id=msg_id or f"{session_id}-m{seq}",
        session_id=session_id,
        author=AuthorRole(author),
        seq=seq,
        ts=float(seq * 10) if ts is None else ts,
        text=text,
    )


def make_active_session(session_id="s1", messages=()):
    """Session already past analyst intervention, with optional transcript."""
    session = Session(id=session_id)
    for seq, (author, text) in enumerate(messages, start=1):
        session.append_message(make_message(session_id, seq, author, text))
    session.mark_analyst_joined(session.next_seq if not session.messages else 1)
    assert session.state == SessionState.ACTIVE_CYCLE
    return session
