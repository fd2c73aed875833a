import random

import pytest

from oncall_agent.gateway import scripted_gateway
from oncall_agent.model import AuthorRole, CardStatus, InvariantError, SessionState, Source
from oncall_agent.orchestrator import (
    Orchestrator,
    OrchestratorConfig,
    SessionEvent,
    UnknownCard,
    UnknownSession,
    replay_events,
)
from oncall_agent.store import KnowledgeStore


def ev_message(seq, sid, author, text, ts=None, message_id=None):
    return SessionEvent(
        kind="message_posted",
        seq=seq,
        session_id=sid,
        author=AuthorRole(author),
        text=text,
        ts=ts,
        message_id=message_id,
    )


def fresh(gw, seed_qa=(), config=None):
    store = KnowledgeStore(gw.cfg.embedding_dim, gw)
    for question, content in seed_qa:
        store.insert_qa(question=question, content=content, source=Source.manual())
    return Orchestrator(store, gw, config=config or OrchestratorConfig(quiet_window=0.0))


SEED = [("how do we rotate the api key?", "use the rotate endpoint, then redeploy")]


def test_unknown_session_raises(gw):
    orch = fresh(gw)
    with pytest.raises(UnknownSession):
        orch.handle_event(ev_message(1, "nope", "Customer", "hi"))


def test_pre_escalation_question_gets_no_verdict(gw):
    orch = fresh(gw, seed_qa=SEED)
    orch.create_session("s1")
    orch.handle_event(ev_message(1, "s1", "Customer", "how do we rotate the api key?"))
    session = orch.get_session("s1")
    assert session.verdicts == [] and session.cards == []
    assert session.state == SessionState.PRE_ESCALATION


def test_analyst_message_activates_cycle(gw):
    orch = fresh(gw)
    orch.create_session("s1")
    orch.handle_event(ev_message(1, "s1", "Customer", "hi"))
    orch.handle_event(ev_message(2, "s1", "Analyst", "taking a look"))
    session = orch.get_session("s1")
    assert session.state == SessionState.ACTIVE_CYCLE
    assert session.analyst_joined_seq == 2


def test_join_event_activates_cycle_without_message(gw):
    orch = fresh(gw)
    orch.create_session("s1")
    orch.handle_event(ev_message(1, "s1", "Customer", "hi"))
    orch.handle_event(SessionEvent(kind="analyst_joined", seq=2, session_id="s1"))
    session = orch.get_session("s1")
    assert session.state == SessionState.ACTIVE_CYCLE
    assert all(m.author != AuthorRole.ANALYST for m in session.messages)


def activated(gw, seed_qa=(), config=None):
    orch = fresh(gw, seed_qa=seed_qa, config=config)
    orch.create_session("s1")
    orch.handle_event(ev_message(1, "s1", "Customer", "hello there"))
    orch.handle_event(SessionEvent(kind="analyst_joined", seq=2, session_id="s1"))
    return orch


def test_within_scope_question_emits_card(gw):
    orch = activated(gw, seed_qa=SEED)
    orch.handle_event(ev_message(3, "s1", "Customer", "how do we rotate the api key?"))
    session = orch.get_session("s1")
    card = session.cards[0]
    assert card.status == CardStatus.SENT
    assert card.id == "s1-card-1"
    assert "rotate endpoint" in card.answer_text
    stream_types = [e["type"] for e in orch.streams["s1"]]
    assert "card" in stream_types


def test_refusal_on_empty_store_emits_no_card(gw):
    orch = activated(gw)
    orch.handle_event(ev_message(3, "s1", "Customer", "how do we rotate the api key?"))
    session = orch.get_session("s1")
    assert session.cards == []
    assert session.questions[0].outcome == "refused"


def test_duplicate_answer_suppressed_and_absent_from_stream(gw):
    orch = activated(gw, seed_qa=SEED)
    orch.handle_event(ev_message(3, "s1", "Customer", "how do we rotate the api key?"))
    orch.handle_event(ev_message(4, "s1", "Customer", "how do we rotate the api key? (asking again)"))
    orch.handle_event(SessionEvent(kind="session_closed", seq=5, session_id="s1"))
    session = orch.get_session("s1")
    statuses = [c.status for c in session.cards]
    assert statuses == [CardStatus.SENT, CardStatus.SUPPRESSED]
    card_events = [e for e in orch.streams["s1"] if e["type"] == "card"]
    assert len(card_events) == 1  # the suppressed card never reaches clients
    assert any(a["event"] == "card_suppressed" for a in orch.audit)


def test_theta_one_disables_suppression(gw):
    orch = activated(gw, seed_qa=SEED, config=OrchestratorConfig(theta=1.0, quiet_window=0.0))
    orch.handle_event(ev_message(3, "s1", "Customer", "how do we rotate the api key?"))
    orch.handle_event(ev_message(4, "s1", "Customer", "how do we rotate the api key? (asking again)"))
    session = orch.get_session("s1")
    assert [c.status for c in session.cards] == [CardStatus.SENT, CardStatus.SENT]


def test_accept_flow_and_idempotence(gw):
    orch = activated(gw, seed_qa=SEED)
    orch.handle_event(ev_message(3, "s1", "Customer", "how do we rotate the api key?"))
    card = orch.get_session("s1").cards[0]
    orch.handle_event(SessionEvent(kind="card_accepted", seq=4, session_id="s1", card_id=card.id))
    assert card.status == CardStatus.ACCEPTED
    entries_after = len(orch.store.entries)
    orch.handle_event(SessionEvent(kind="card_accepted", seq=5, session_id="s1", card_id=card.id))
    assert len(orch.store.entries) == entries_after  # double click is a no-op


def test_accept_unknown_card(gw):
    orch = fresh(gw)
    with pytest.raises(UnknownCard):
        orch.handle_event(SessionEvent(kind="card_accepted", seq=1, session_id="s1", card_id="ghost"))


def test_accept_suppressed_card_rejected(gw):
    orch = activated(gw, seed_qa=SEED)
    orch.handle_event(ev_message(3, "s1", "Customer", "how do we rotate the api key?"))
    orch.handle_event(ev_message(4, "s1", "Customer", "how do we rotate the api key? (asking again)"))
    orch.handle_event(ev_message(5, "s1", "Analyst", "checking"))  # flush the batch
    suppressed = orch.get_session("s1").cards[1]
    assert suppressed.status == CardStatus.SUPPRESSED
    before = len(orch.store.entries)
    with pytest.raises(InvariantError):
        orch.handle_event(
            SessionEvent(kind="card_accepted", seq=6, session_id="s1", card_id=suppressed.id)
        )
    assert len(orch.store.entries) == before


def test_stale_events_dropped(gw):
    orch = fresh(gw)
    orch.create_session("s1")
    orch.handle_event(ev_message(5, "s1", "Customer", "hi"))
    assert orch.handle_event(ev_message(5, "s1", "Customer", "replayed")) == []
    assert orch.handle_event(ev_message(3, "s1", "Customer", "late")) == []
    assert len(orch.get_session("s1").messages) == 1


def test_messages_after_close_dropped(gw):
    orch = activated(gw)
    orch.handle_event(SessionEvent(kind="session_closed", seq=3, session_id="s1"))
    effects = orch.handle_event(ev_message(4, "s1", "Customer", "anyone there?"))
    assert effects[0]["event"] == "dropped_message"
    assert len(orch.get_session("s1").messages) == 1


def test_close_is_idempotent(gw):
    orch = activated(gw)
    orch.handle_event(SessionEvent(kind="session_closed", seq=3, session_id="s1"))
    assert orch.handle_event(SessionEvent(kind="session_closed", seq=4, session_id="s1")) == []


# -- quiet-window batching --------------------------------------------------


def test_rapid_fire_batch_classified_once(gw):
    orch = activated(gw, seed_qa=SEED, config=OrchestratorConfig(quiet_window=3.0))
    orch.handle_event(ev_message(3, "s1", "Customer", "quick question about the api key", ts=100.0))
    orch.handle_event(ev_message(4, "s1", "Customer", "how do we rotate the api key?", ts=101.0))
    orch.handle_event(ev_message(5, "s1", "Analyst", "on it", ts=110.0))  # breaks window
    session = orch.get_session("s1")
    # One verdict per batch member, all decided at the last member's seq.
    batch_verdicts = [v for v in session.verdicts]
    assert len(batch_verdicts) == 2
    # Session-local seqs: "hello" is 1, the two batch members are 2 and 3.
    assert {v.decided_at_seq for v in batch_verdicts} == {3}
    assert len(session.cards) == 1
    assert session.cards[0].trigger_message_id == session.messages[2].id


def test_slow_messages_are_separate_batches(gw):
    orch = activated(gw, seed_qa=SEED, config=OrchestratorConfig(quiet_window=3.0))
    orch.handle_event(ev_message(3, "s1", "Customer", "how do we rotate the api key?", ts=100.0))
    orch.handle_event(ev_message(4, "s1", "Customer", "thanks, that helps", ts=200.0))
    orch.handle_event(SessionEvent(kind="session_closed", seq=5, session_id="s1"))
    session = orch.get_session("s1")
    assert {v.decided_at_seq for v in session.verdicts} == {2, 3}


def test_tick_flushes_elapsed_window(gw):
    orch = activated(gw, seed_qa=SEED, config=OrchestratorConfig(quiet_window=3.0))
    orch.handle_event(ev_message(3, "s1", "Customer", "how do we rotate the api key?", ts=100.0))
    assert orch.get_session("s1").verdicts == []
    assert orch.tick("s1", 101.0) == []  # window still open
    orch.tick("s1", 104.5)
    assert len(orch.get_session("s1").verdicts) == 1


# -- determinism and isolation ----------------------------------------------


def scripted_log():
    events = []
    seq = 0

    def add(**kw):
        nonlocal seq
        seq += 1
        events.append(SessionEvent(seq=seq, **kw))

    for sid in ("a1", "b2"):
        add(kind="message_posted", session_id=sid, author=AuthorRole.CUSTOMER, text="hello")
        add(kind="analyst_joined", session_id=sid)
        add(kind="message_posted", session_id=sid, author=AuthorRole.CUSTOMER,
            text="how do we rotate the api key?")
        add(kind="message_posted", session_id=sid, author=AuthorRole.ANALYST,
            text="workaround: rotate via console")
        add(kind="session_closed", session_id=sid)
    return events


def run_log(gw, events):
    store = KnowledgeStore(gw.cfg.embedding_dim, gw)
    for q, c in SEED:
        store.insert_qa(question=q, content=c, source=Source.manual())
    orch = replay_events(events, store, gw, config=OrchestratorConfig(quiet_window=0.0))
    return orch


def test_full_replay_determinism(gw):
    events = scripted_log()
    one = run_log(gw, events)
    two = run_log(gw, events)
    assert one.card_transcript() == two.card_transcript()
    assert one.store.snapshot_hash() == two.store.snapshot_hash()


def test_no_cross_session_interference(gw):
    events = scripted_log()
    mixed = run_log(gw, events)
    for sid in ("a1", "b2"):
        alone = run_log(gw, [e for e in events if e.session_id == sid])
        mixed_cards = [c.to_dict() for c in mixed.get_session(sid).cards]
        alone_cards = [c.to_dict() for c in alone.get_session(sid).cards]
        assert mixed_cards == alone_cards


def test_audit_completeness(gw):
    orch = activated(gw, seed_qa=SEED)
    orch.handle_event(ev_message(3, "s1", "Customer", "how do we rotate the api key?"))
    orch.handle_event(ev_message(4, "s1", "Customer", "how do we rotate the api key? (asking again)"))
    orch.handle_event(SessionEvent(kind="session_closed", seq=5, session_id="s1"))
    session = orch.get_session("s1")
    sent_ids = [a["card_id"] for a in orch.audit if a["event"] == "card_sent"]
    supp_ids = [a["card_id"] for a in orch.audit if a["event"] == "card_suppressed"]
    verdict_ids = [a["message_id"] for a in orch.audit if a["event"] == "verdict"]
    assert sorted(sent_ids + supp_ids) == sorted(c.id for c in session.cards)
    assert sorted(verdict_ids) == sorted(v.message_id for v in session.verdicts)
    assert len(set(sent_ids + supp_ids)) == len(sent_ids + supp_ids)


def test_metrics_counters(gw):
    orch = activated(gw, seed_qa=SEED)
    orch.handle_event(ev_message(3, "s1", "Customer", "how do we rotate the api key?"))
    orch.handle_event(SessionEvent(kind="session_closed", seq=4, session_id="s1"))
    m = orch.metrics()
    assert m["sessions"] == 1 and m["sessions_closed"] == 1
    assert m["cards_sent"] == 1 and m["cards_suppressed"] == 0
