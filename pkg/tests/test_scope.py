import pytest

from oncall_agent.model import ScopeClass, Session
from oncall_agent.scope import classify_message, is_cycle_active, question_already_answered
from oncall_agent.gateway import scripted_gateway

from conftest import make_active_session, make_message


def test_no_classification_outside_active_cycle(gw):
    session = Session(id="s1")
    msg = make_message("s1", 1, "Customer", "how do we fix this?")
    session.append_message(msg)
    assert not is_cycle_active(session)
    with pytest.raises(ValueError):
        classify_message(session, msg, gw)


def test_only_customer_messages_classified(gw):
    session = make_active_session(messages=[("Customer", "hi"), ("Analyst", "looking")])
    msg = make_message("s1", 3, "Analyst", "how about this?")
    session.append_message(msg)
    with pytest.raises(ValueError):
        classify_message(session, msg, gw)


def test_within_scope_question(gw):
    session = make_active_session(messages=[("Customer", "hi"), ("Analyst", "here")])
    msg = make_message("s1", 3, "Customer", "how do we rotate credentials?")
    session.append_message(msg)
    verdict = classify_message(session, msg, gw)
    assert verdict.scope == ScopeClass.WITHIN_SCOPE
    assert verdict.message_id == msg.id
    assert verdict.decided_at_seq == 3


def test_out_of_scope_question(gw):
    session = make_active_session(messages=[("Analyst", "here")])
    msg = make_message("s1", 2, "Customer", "should we migrate off your product?")
    session.append_message(msg)
    assert classify_message(session, msg, gw).scope == ScopeClass.OUT_OF_SCOPE


def test_phatic_message_needs_no_assistance(gw):
    session = make_active_session(messages=[("Analyst", "here")])
    msg = make_message("s1", 2, "Customer", "thanks, all good now")
    session.append_message(msg)
    assert classify_message(session, msg, gw).scope == ScopeClass.NO_ASSISTANCE_NEEDED


def test_gateway_failure_defaults_to_no_assistance():
    gw = scripted_gateway([{"task": "identify", "error": "unavailable"}])
    session = make_active_session(messages=[("Analyst", "here")])
    msg = make_message("s1", 2, "Customer", "how do we fix the outage?")
    session.append_message(msg)
    assert classify_message(session, msg, gw).scope == ScopeClass.NO_ASSISTANCE_NEEDED


def test_batch_text_overrides_trigger_text():
    gw = scripted_gateway(
        [{"task": "identify", "last_contains": ["part one"], "reply": {"class": "Out of Scope"}}]
    )
    session = make_active_session(messages=[("Analyst", "here")])
    msg = make_message("s1", 2, "Customer", "part two")
    session.append_message(msg)
    verdict = classify_message(session, msg, gw, batch_text="part one\npart two")
    assert verdict.scope == ScopeClass.OUT_OF_SCOPE


def test_already_answered_repeat(gw):
    session = make_active_session(
        messages=[
            ("Customer", "how do we rotate the key?"),
            ("Analyst", "workaround: use the rotate endpoint"),
        ]
    )
    repeat = make_message("s1", 3, "Customer", "how do we rotate the key?")
    session.append_message(repeat)
    assert question_already_answered(session, repeat, gw)
    assert classify_message(session, repeat, gw).scope == ScopeClass.NO_ASSISTANCE_NEEDED


def test_not_answered_without_analyst_resolution(gw):
    session = make_active_session(messages=[("Customer", "how do we rotate the key?")])
    repeat = make_message("s1", 2, "Customer", "how do we rotate the key?")
    session.append_message(repeat)
    assert not question_already_answered(session, repeat, gw)


def test_answered_check_failure_defaults_false():
    gw = scripted_gateway([{"task": "answered", "error": "timeout"}])
    session = make_active_session(messages=[("Analyst", "here")])
    msg = make_message("s1", 2, "Customer", "how do we fix it?")
    session.append_message(msg)
    assert question_already_answered(session, msg, gw) is False
