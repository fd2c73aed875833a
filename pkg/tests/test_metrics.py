import random

import pytest
from hypothesis import given, strategies as st

from oncall_agent.metrics import ClassStats, compute_metrics, format_table


def oracle(preds, golds):
    """Independent confusion-matrix implementation for cross-checking."""
    labels = sorted(set(preds) | set(golds))
    per = {}
    for label in labels:
        tp = sum(1 for p, g in zip(preds, golds) if p == g == label)
        fp = sum(1 for p, g in zip(preds, golds) if p == label != g)
        fn = sum(1 for p, g in zip(preds, golds) if g == label != p)
        n = sum(1 for g in golds if g == label)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per[label] = dict(n=n, precision=precision, recall=recall, f1=f1, tp=tp)
    total = len(golds)
    support = sum(c["n"] for c in per.values())
    return {
        "per": per,
        "accuracy": sum(c["tp"] for c in per.values()) / total if total else 0.0,
        "precision_w": sum(c["n"] * c["precision"] for c in per.values()) / support if support else 0.0,
        "recall_w": sum(c["n"] * c["recall"] for c in per.values()) / support if support else 0.0,
        "f1_w": sum(c["n"] * c["f1"] for c in per.values()) / support if support else 0.0,
    }


def test_hand_worked_example():
    golds = ["A", "A", "A", "B"]
    preds = ["A", "A", "B", "B"]
    report = compute_metrics(preds, golds)
    assert report.per_class["A"].precision == pytest.approx(1.0)
    assert report.per_class["B"].precision == pytest.approx(0.5)
    # Support-weighted mean: (3 * 1.0 + 1 * 0.5) / 4.
    assert report.precision_w == pytest.approx(0.875)
    assert report.accuracy == pytest.approx(0.75)
    assert report.recall_w == pytest.approx(0.75)


def test_zero_over_zero_is_zero():
    report = compute_metrics(["A", "A"], ["B", "B"], labels=["A", "B", "C"])
    c = report.per_class["C"]  # never predicted, never gold
    assert c.precision == 0.0 and c.recall == 0.0 and c.f1 == 0.0
    assert ClassStats().f1 == 0.0


def test_f1_w_is_weighted_mean_of_per_class_f1():
    golds = ["A"] * 7 + ["B"] * 3
    preds = ["A"] * 5 + ["B"] * 2 + ["B", "A", "A"]
    report = compute_metrics(preds, golds)
    expected = sum(c.n * c.f1 for c in report.per_class.values()) / 10
    assert report.f1_w == pytest.approx(expected, abs=1e-15)


def test_matches_oracle_on_random_instances():
    rng = random.Random(13)
    labels = ["Within Scope", "Out of Scope", "No assistance needed"]
    for _ in range(100):
        n = rng.randint(1, 40)
        golds = [rng.choice(labels) for _ in range(n)]
        preds = [rng.choice(labels) for _ in range(n)]
        report = compute_metrics(preds, golds)
        want = oracle(preds, golds)
        assert report.accuracy == pytest.approx(want["accuracy"], abs=1e-12)
        assert report.precision_w == pytest.approx(want["precision_w"], abs=1e-12)
        assert report.recall_w == pytest.approx(want["recall_w"], abs=1e-12)
        assert report.f1_w == pytest.approx(want["f1_w"], abs=1e-12)
        for label, stats in want["per"].items():
            got = report.per_class[label]
            assert got.precision == pytest.approx(stats["precision"], abs=1e-12)
            assert got.recall == pytest.approx(stats["recall"], abs=1e-12)
            assert got.f1 == pytest.approx(stats["f1"], abs=1e-12)


@given(
    st.lists(st.sampled_from(["a", "b", "c"]), min_size=1, max_size=50).flatmap(
        lambda golds: st.tuples(
            st.just(golds),
            st.lists(st.sampled_from(["a", "b", "c"]), min_size=len(golds), max_size=len(golds)),
        )
    )
)
def test_weighted_recall_equals_accuracy_on_partitioned_labels(pair):
    golds, preds = pair
    report = compute_metrics(preds, golds)
    assert report.recall_w == pytest.approx(report.accuracy, abs=1e-12)


def test_length_mismatch_rejected():
    with pytest.raises(ValueError):
        compute_metrics(["a"], ["a", "b"])


def test_format_table_alignment():
    rows = [{"theta": 0.7, "f1": 0.752}, {"theta": 1.0, "f1": 0.5}]
    table = format_table(rows, ["theta", "f1"])
    lines = table.splitlines()
    assert lines[0].startswith("theta")
    assert "0.700" in lines[2] and "0.752" in lines[2]
    assert len({len(line) for line in lines[:2]}) == 1
