"""Command-line entry points: `serve`, `replay`, `kb ...` and `eval ...`.

Configuration comes from an optional JSON file plus environment overrides
(ONCALL_AGENT_THETA, ONCALL_AGENT_STORE_DIR, ONCALL_AGENT_BACKEND,
ONCALL_AGENT_ENDPOINT); CLI flags override both.  The config file uses
dotted keys under flat sections, e.g. {"dedup": {"theta": 0.7}}.
"""

from __future__ import annotations

import json
import os
import sys
from typing import Any, Dict, Optional

import click

from .evalharness import (
    ABLATION_MODES,
    LabeledCorpus,
    judge_answers,
    make_ablation_fixture,
    make_case1_corpus,
    make_case2_corpus,
    make_dedup_corpus,
    replay_corpus,
    run_ablation,
    score_identification,
    sweep_table,
    sweep_thresholds,
)
from .gateway import Gateway, ProviderConfig, ScriptedBackend
from .metrics import format_table
from .orchestrator import Orchestrator, OrchestratorConfig
from .store import KnowledgeStore


def _load_config(path: Optional[str]) -> Dict[str, Any]:
    cfg: Dict[str, Any] = {}
    if path:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    env = os.environ
    cfg.setdefault("dedup", {})
    cfg.setdefault("provider", {})
    cfg.setdefault("store", {})
    if "ONCALL_AGENT_THETA" in env:
        cfg["dedup"]["theta"] = float(env["ONCALL_AGENT_THETA"])
    if "ONCALL_AGENT_STORE_DIR" in env:
        cfg["store"]["dir"] = env["ONCALL_AGENT_STORE_DIR"]
    if "ONCALL_AGENT_BACKEND" in env:
        cfg["provider"]["backend"] = env["ONCALL_AGENT_BACKEND"]
    if "ONCALL_AGENT_ENDPOINT" in env:
        cfg["provider"]["endpoint"] = env["ONCALL_AGENT_ENDPOINT"]
    return cfg


def _build_gateway(cfg: Dict[str, Any], rules_path: Optional[str]) -> Gateway:
    provider = cfg.get("provider", {})
    pc = ProviderConfig(
        backend=provider.get("backend", "scripted"),
        endpoint=provider.get("endpoint", ""),
        model_name=provider.get("model_name", "scripted-v1"),
        timeout_ms=int(provider.get("timeout_ms", 10_000)),
        embedding_dim=int(provider.get("embedding_dim", 64)),
    )
    backend = None
    if pc.backend == "scripted" and rules_path:
        backend = ScriptedBackend.from_file(rules_path)
    return Gateway(cfg=pc, backend=backend)


def _orch_config(cfg: Dict[str, Any], theta: Optional[float]) -> OrchestratorConfig:
    dedup = cfg.get("dedup", {})
    return OrchestratorConfig(
        theta=theta if theta is not None else float(dedup.get("theta", 0.7)),
        clamp_negative=bool(dedup.get("clamp_negative", True)),
    )


@click.group()
def main() -> None:
    """Proactive on-call support agent."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--store-dir", default=None, help="Knowledge store directory.")
@click.option("--rules", default=None, type=click.Path(exists=True), help="Scripted backend rules file.")
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8010, type=int)
@click.option("--theta", default=None, type=float, help="Dedup similarity threshold (config key dedup.theta).")
def serve(config_path: Optional[str], store_dir: Optional[str], rules: Optional[str],
          host: str, port: int, theta: Optional[float]) -> None:
    """Run the HTTP/WebSocket service."""
    import uvicorn

    from .api import create_app

    cfg = _load_config(config_path)
    gateway = _build_gateway(cfg, rules)
    store_dir = store_dir or cfg.get("store", {}).get("dir")
    try:
        if store_dir and os.path.isdir(store_dir):
            store = KnowledgeStore.load(store_dir, gateway)
        else:
            store = KnowledgeStore(gateway.cfg.embedding_dim, gateway, dirpath=store_dir)
    except Exception as exc:
        click.echo(f"store load failed, refusing to start: {exc}", err=True)
        sys.exit(1)
    orch = Orchestrator(store, gateway, config=_orch_config(cfg, theta))
    uvicorn.run(create_app(orch), host=host, port=port)


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--rules", default=None, type=click.Path(exists=True))
@click.option("--theta", default=None, type=float)
@click.option("--out", "out_path", default=None, help="Write predictions JSON here.")
def replay(corpus_path: str, config_path: Optional[str], rules: Optional[str],
           theta: Optional[float], out_path: Optional[str]) -> None:
    """Replay a labeled transcript corpus through the full pipeline."""
    cfg = _load_config(config_path)
    gateway = _build_gateway(cfg, rules)
    corpus = LabeledCorpus.load(corpus_path)
    preds, orch = replay_corpus(corpus, gateway, config=_orch_config(cfg, theta))
    report = {
        "sessions": len(corpus.sessions),
        "verdicts": len(preds.verdicts),
        "answers_sent": sum(1 for a in preds.answers if a.sent),
        "answers_suppressed": sum(1 for a in preds.answers if not a.sent),
        "refusals": len(preds.refusals),
        "store_hash": preds.store_hash,
        "stream_hash": preds.stream_hash,
        "metrics": orch.metrics(),
    }
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(preds.to_dict(), fh, indent=2, sort_keys=True)
    click.echo(json.dumps(report, indent=2, sort_keys=True))


@main.group()
def kb() -> None:
    """Knowledge-store maintenance."""


@kb.command("export")
@click.option("--store-dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True)
def kb_export(store_dir: str, out_path: str) -> None:
    """Export the store snapshot as versioned JSON."""
    gateway = Gateway(cfg=ProviderConfig())
    store = KnowledgeStore.load(store_dir, gateway)
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(store.to_snapshot_dict(), fh, indent=2, sort_keys=True)
    click.echo(f"exported {len(store.entries)} entries to {out_path}")


@kb.command("import")
@click.option("--store-dir", required=True)
@click.option("--snapshot", "snapshot_path", required=True, type=click.Path(exists=True))
def kb_import(store_dir: str, snapshot_path: str) -> None:
    """Create a store directory from an exported snapshot."""
    with open(snapshot_path, "r", encoding="utf-8") as fh:
        snap = json.load(fh)
    gateway = Gateway(cfg=ProviderConfig(embedding_dim=int(snap.get("embedding_dim", 64))))
    os.makedirs(store_dir, exist_ok=True)
    store = KnowledgeStore.from_snapshot_dict(snap, gateway, dirpath=store_dir)
    store.persist()
    store.close()
    click.echo(f"imported {len(store.entries)} entries into {store_dir}")


@kb.command("stats")
@click.option("--store-dir", required=True, type=click.Path(exists=True))
def kb_stats(store_dir: str) -> None:
    """Entry counts by kind/status, plus version and snapshot hash."""
    gateway = Gateway(cfg=ProviderConfig())
    store = KnowledgeStore.load(store_dir, gateway)
    by: Dict[str, int] = {}
    for entry in store.entries.values():
        key = f"{entry.kind.value}/{entry.status.value}"
        by[key] = by.get(key, 0) + 1
    click.echo(json.dumps({
        "entries": len(store.entries),
        "by_kind_status": dict(sorted(by.items())),
        "version": store.version,
        "snapshot_hash": store.snapshot_hash(),
    }, indent=2, sort_keys=True))


@main.group(name="eval")
def eval_group() -> None:
    """Replay-based evaluation over labeled corpora."""


def _eval_setup(corpus_path: str, rules: Optional[str], config_path: Optional[str],
                theta: Optional[float]):
    cfg = _load_config(config_path)
    gateway = _build_gateway(cfg, rules)
    corpus = LabeledCorpus.load(corpus_path)
    return corpus, gateway, _orch_config(cfg, theta)


@eval_group.command("identify")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--rules", default=None, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def eval_identify(corpus_path: str, rules: Optional[str], config_path: Optional[str]) -> None:
    """Scope-identification metrics against gold labels."""
    corpus, gateway, ocfg = _eval_setup(corpus_path, rules, config_path, None)
    preds, _ = replay_corpus(corpus, gateway, config=ocfg)
    report = score_identification(preds, corpus)
    rows = [dict({"class": label}, **stats.to_dict()) for label, stats in sorted(report.per_class.items())]
    click.echo(format_table(rows, ["class", "n", "precision", "recall", "f1"]))
    click.echo(json.dumps(report.to_dict(), indent=2, sort_keys=True))


@eval_group.command("answers")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--rules", default=None, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def eval_answers(corpus_path: str, rules: Optional[str], config_path: Optional[str]) -> None:
    """Judged answer correctness (gold card labels take precedence)."""
    corpus, gateway, ocfg = _eval_setup(corpus_path, rules, config_path, None)
    preds, _ = replay_corpus(corpus, gateway, config=ocfg)
    verdicts = judge_answers(preds, gateway, corpus)
    judged = {k: v for k, v in verdicts.items() if k != "__excluded__"}
    correct = sum(1 for v in judged.values() if v == "Correct")
    click.echo(json.dumps({
        "judged": len(judged),
        "correct": correct,
        "accuracy": correct / len(judged) if judged else 0.0,
        "excluded": int(verdicts.get("__excluded__", "0")),
        "verdicts": dict(sorted(judged.items())),
    }, indent=2, sort_keys=True))


@eval_group.command("sweep")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--thetas", default="0,0.2,0.4,0.6,0.7,0.8,0.9,1.0", show_default=True)
@click.option("--rules", default=None, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def eval_sweep(corpus_path: str, thetas: str, rules: Optional[str], config_path: Optional[str]) -> None:
    """Dedup threshold sweep over one frozen answer stream."""
    corpus, gateway, ocfg = _eval_setup(corpus_path, rules, config_path, None)
    grid = [float(t) for t in thetas.split(",") if t.strip()]
    rows, preds = sweep_thresholds(corpus, grid, gateway, config=ocfg)
    click.echo(sweep_table(rows))
    click.echo(json.dumps({
        "rows": [r.to_dict() for r in rows],
        "stream_hash": preds.stream_hash,
    }, indent=2, sort_keys=True))


@eval_group.command("ablate")
@click.option("--corpus", "corpus_path", default=None, type=click.Path(exists=True),
              help="Defaults to the seeded ablation fixture.")
@click.option("--mode", type=click.Choice(list(ABLATION_MODES) + ["all"]), default="all", show_default=True)
@click.option("--rules", default=None, type=click.Path(exists=True))
def eval_ablate(corpus_path: Optional[str], mode: str, rules: Optional[str]) -> None:
    """Judged accuracy under learning-loop ablations."""
    if corpus_path:
        corpus = LabeledCorpus.load(corpus_path)
        rule_list = ScriptedBackend.from_file(rules).rules if rules else []
    else:
        corpus, rule_list = make_ablation_fixture()
    from .gateway import scripted_gateway

    results = []
    for m in ABLATION_MODES if mode == "all" else [mode]:
        results.append(run_ablation(corpus, scripted_gateway(rule_list), m))
    click.echo(format_table(results, ["mode", "correct", "total", "accuracy"]))
    click.echo(json.dumps(results, indent=2, sort_keys=True))


@eval_group.command("gen-fixture")
@click.option("--kind", type=click.Choice(["dedup", "ablation", "case1", "case2"]), required=True)
@click.option("--seed", default=7, type=int)
@click.option("--out", "out_path", required=True)
@click.option("--rules-out", default=None, help="Where to write judge rules (ablation only).")
def gen_fixture(kind: str, seed: int, out_path: str, rules_out: Optional[str]) -> None:
    """Write a seeded synthetic fixture corpus (and rules, for ablation)."""
    if kind == "dedup":
        corpus = make_dedup_corpus(seed=seed)
    elif kind == "ablation":
        corpus, rule_list = make_ablation_fixture(seed=seed)
        if rules_out:
            with open(rules_out, "w", encoding="utf-8") as fh:
                json.dump({"rules": rule_list}, fh, indent=2)
    elif kind == "case1":
        corpus = make_case1_corpus()
    else:
        corpus = make_case2_corpus()
    corpus.save(out_path)
    click.echo(f"wrote {len(corpus.sessions)} sessions to {out_path}")


if __name__ == "__main__":
    main()
