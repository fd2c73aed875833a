import json

import numpy as np
import pytest

from oncall_agent.evalharness import (
    ABLATION_MODES,
    AlignmentError,
    CorpusFormatError,
    LabeledCorpus,
    ablation_config,
    judge_answers,
    make_ablation_fixture,
    make_case1_corpus,
    make_case2_corpus,
    make_dedup_corpus,
    replay_corpus,
    score_identification,
    simulate_suppression,
    sweep_table,
    sweep_thresholds,
)
from oncall_agent.gateway import scripted_gateway


# -- corpus format ----------------------------------------------------------


def test_corpus_save_load_round_trip(tmp_path):
    corpus = make_dedup_corpus(seed=3, n_sessions=4)
    path = str(tmp_path / "corpus.jsonl")
    corpus.save(path)
    loaded = LabeledCorpus.load(path)
    assert [s.header() for s in loaded.sessions] == [s.header() for s in corpus.sessions]
    assert [s.lines for s in loaded.sessions] == [s.lines for s in corpus.sessions]
    assert loaded.seed_entries == corpus.seed_entries


def test_corpus_rejects_message_before_header(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"id": "m1", "author": "Customer", "text": "hi"}\n')
    with pytest.raises(CorpusFormatError) as exc:
        LabeledCorpus.load(str(path))
    assert exc.value.line_no == 1


def test_corpus_rejects_unparseable_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"session_id": "s", "labels": {}}\nnot json\n')
    with pytest.raises(CorpusFormatError) as exc:
        LabeledCorpus.load(str(path))
    assert exc.value.line_no == 2


def test_generators_are_seed_deterministic(tmp_path):
    a, b = make_dedup_corpus(seed=9, n_sessions=6), make_dedup_corpus(seed=9, n_sessions=6)
    assert [s.lines for s in a.sessions] == [s.lines for s in b.sessions]
    c, _ = make_ablation_fixture(seed=2)
    d, _ = make_ablation_fixture(seed=2)
    assert [s.lines for s in c.sessions] == [s.lines for s in d.sessions]


# -- replay and scoring -----------------------------------------------------


def test_replay_covers_all_labeled_messages():
    corpus = make_dedup_corpus(seed=5, n_sessions=6)
    preds, _ = replay_corpus(corpus, scripted_gateway())
    for sess in corpus.sessions:
        for mid in sess.labels:
            assert mid in preds.verdicts


def test_score_identification_on_fixture():
    corpus = make_dedup_corpus(seed=5, n_sessions=10)
    preds, _ = replay_corpus(corpus, scripted_gateway())
    report = score_identification(preds, corpus)
    assert report.total == sum(len(s.labels) for s in corpus.sessions)
    assert report.accuracy == pytest.approx(1.0)  # scripted defaults match the labels


def test_score_identification_alignment_error():
    corpus = make_case1_corpus()
    preds, _ = replay_corpus(corpus, scripted_gateway())
    preds.verdicts.pop("case1-b-m2")
    with pytest.raises(AlignmentError):
        score_identification(preds, corpus)


def test_gold_card_labels_take_precedence():
    corpus = make_case1_corpus()
    corpus.sessions[1].card_labels = {"case1-b-m2": "Incorrect"}
    preds, _ = replay_corpus(corpus, scripted_gateway())
    verdicts = judge_answers(preds, scripted_gateway(), corpus)
    sent = [a for a in preds.answers if a.sent]
    assert verdicts[sent[0].card_id] == "Incorrect"


def test_judge_failure_excludes_card():
    corpus = make_case1_corpus()
    preds, _ = replay_corpus(corpus, scripted_gateway())
    judge_gw = scripted_gateway([{"task": "judge", "error": "timeout"}])
    verdicts = judge_answers(preds, judge_gw, None)
    assert verdicts == {"__excluded__": "1"}


# -- suppression simulation -------------------------------------------------


def test_simulate_suppression_greedy_hand_case():
    e1 = [1.0, 0.0]
    e2 = [1.0, 0.0]
    e3 = [0.0, 1.0]
    assert simulate_suppression([e1, e2, e3], theta=0.5) == [False, True, False]


def test_simulate_suppression_first_never_suppressed():
    assert simulate_suppression([[1.0, 0.0]], theta=0.0) == [False]


def test_simulate_suppression_clamps_negative():
    flags = simulate_suppression([[1.0, 0.0], [-1.0, 0.0]], theta=0.0)
    assert flags == [False, False]
    flags = simulate_suppression([[1.0, 0.0], [-1.0, 0.0]], theta=0.0, clamp_negative=False)
    assert flags == [False, False]  # negative sim still does not exceed 0


# -- sweep ------------------------------------------------------------------


def test_sweep_rejects_out_of_range_thetas():
    with pytest.raises(ValueError):
        sweep_thresholds(make_case1_corpus(), [0.5, 1.2], scripted_gateway())


def test_sweep_stream_is_frozen_across_thetas():
    corpus = make_dedup_corpus(seed=5, n_sessions=8)
    gw = scripted_gateway()
    rows1, preds1 = sweep_thresholds(corpus, [0.0, 0.7], gw)
    rows2, preds2 = sweep_thresholds(corpus, [0.7, 1.0], gw)
    assert preds1.stream_hash == preds2.stream_hash
    assert [r.to_dict() for r in rows1 if r.theta == 0.7] == [
        r.to_dict() for r in rows2 if r.theta == 0.7
    ]


def test_sweep_table_columns():
    corpus = make_dedup_corpus(seed=5, n_sessions=5)
    rows, _ = sweep_thresholds(corpus, [0.0, 1.0], scripted_gateway())
    table = sweep_table(rows)
    assert table.splitlines()[0].split() == [
        "theta", "precision", "recall", "precision_w", "recall_w", "f1_w",
    ]


# -- ablation ---------------------------------------------------------------


def test_ablation_config_flags():
    assert ablation_config("full").self_improve and ablation_config("full").review_answers
    assert ablation_config("no-answer-review").self_improve
    assert not ablation_config("no-answer-review").review_answers
    assert not ablation_config("no-self-improve").self_improve
    with pytest.raises(ValueError):
        ablation_config("no-such-mode")
    assert set(ABLATION_MODES) == {"full", "no-answer-review", "no-self-improve"}


def test_case2_fixture_round_trips_through_files(tmp_path):
    corpus = make_case2_corpus()
    path = str(tmp_path / "case2.jsonl")
    corpus.save(path)
    preds, orch = replay_corpus(LabeledCorpus.load(path), scripted_gateway())
    assert len(orch.store.entries) == 1


def test_answer_records_carry_unit_embeddings():
    corpus = make_case1_corpus()
    preds, _ = replay_corpus(corpus, scripted_gateway())
    for rec in preds.answers:
        assert np.linalg.norm(rec.embedding) == pytest.approx(1.0, abs=1e-9)
