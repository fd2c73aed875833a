import json
import os

import pytest
from click.testing import CliRunner

from oncall_agent.cli import main
from oncall_agent.evalharness import make_case1_corpus
from oncall_agent.gateway import scripted_gateway
from oncall_agent.model import Source
from oncall_agent.store import KnowledgeStore


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def corpus_path(tmp_path):
    path = str(tmp_path / "case1.jsonl")
    make_case1_corpus().save(path)
    return path


def test_gen_fixture_and_replay(runner, tmp_path):
    fixture = str(tmp_path / "dedup.jsonl")
    result = runner.invoke(main, ["eval", "gen-fixture", "--kind", "dedup", "--out", fixture])
    assert result.exit_code == 0, result.output
    out = str(tmp_path / "preds.json")
    result = runner.invoke(main, ["replay", "--corpus", fixture, "--out", out])
    assert result.exit_code == 0, result.output
    report = json.loads(result.output)
    assert report["sessions"] == 50
    assert report["answers_sent"] > 0
    assert os.path.exists(out)


def test_replay_respects_theta_flag(runner, corpus_path):
    loose = runner.invoke(main, ["replay", "--corpus", corpus_path, "--theta", "1.0"])
    assert loose.exit_code == 0, loose.output
    assert json.loads(loose.output)["answers_suppressed"] == 0


def test_eval_identify(runner, corpus_path):
    result = runner.invoke(main, ["eval", "identify", "--corpus", corpus_path])
    assert result.exit_code == 0, result.output
    assert "Within Scope" in result.output


def test_eval_answers(runner, corpus_path):
    result = runner.invoke(main, ["eval", "answers", "--corpus", corpus_path])
    assert result.exit_code == 0, result.output
    body = json.loads(result.output)
    assert body["judged"] == 1 and body["correct"] == 1


def test_eval_sweep(runner, tmp_path):
    fixture = str(tmp_path / "dedup.jsonl")
    runner.invoke(main, ["eval", "gen-fixture", "--kind", "dedup", "--out", fixture])
    result = runner.invoke(
        main, ["eval", "sweep", "--corpus", fixture, "--thetas", "0,0.7,1.0"]
    )
    assert result.exit_code == 0, result.output
    assert result.output.splitlines()[0].startswith("theta")


def test_eval_ablate_default_fixture(runner):
    result = runner.invoke(main, ["eval", "ablate", "--mode", "all"])
    assert result.exit_code == 0, result.output
    rows = json.loads(result.output[result.output.index("[") :])
    by_mode = {r["mode"]: r["accuracy"] for r in rows}
    assert by_mode["full"] > by_mode["no-answer-review"] > by_mode["no-self-improve"]


def test_kb_export_import_stats(runner, tmp_path):
    gw = scripted_gateway()
    src_dir = str(tmp_path / "store")
    store = KnowledgeStore(gw.cfg.embedding_dim, gw, dirpath=src_dir)
    store.insert_qa(question="how?", content="like this", source=Source.manual())
    store.close()

    snap = str(tmp_path / "snap.json")
    result = runner.invoke(main, ["kb", "export", "--store-dir", src_dir, "--out", snap])
    assert result.exit_code == 0, result.output

    dst_dir = str(tmp_path / "store2")
    result = runner.invoke(main, ["kb", "import", "--store-dir", dst_dir, "--snapshot", snap])
    assert result.exit_code == 0, result.output

    result = runner.invoke(main, ["kb", "stats", "--store-dir", dst_dir])
    assert result.exit_code == 0, result.output
    stats = json.loads(result.output)
    assert stats["entries"] == 1
    assert stats["by_kind_status"] == {"QAPair/Provisional": 1}


def test_theta_env_override(runner, corpus_path, monkeypatch):
    monkeypatch.setenv("ONCALL_AGENT_THETA", "1.0")
    result = runner.invoke(main, ["replay", "--corpus", corpus_path])
    assert result.exit_code == 0, result.output
    assert json.loads(result.output)["answers_suppressed"] == 0
