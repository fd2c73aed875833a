"""Confusion-matrix bookkeeping and support-weighted metrics.

Per-class precision/recall/F1 use the 0/0 := 0 convention.  Weighted
metrics are support-weighted means (X_w = sum n_i * X_i / sum n_i); the
weighted F1 is the weighted mean of per-class F1 values, not the harmonic
mean of weighted precision and recall, which is why F1_w can fall outside
the [P_w, R_w] interval.  When gold labels partition the data, weighted
recall equals accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence


def _safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


@dataclass
class ClassStats:
    n: int = 0  # support (gold count)
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def precision(self) -> float:
        return _safe_div(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> float:
        return _safe_div(self.tp, self.tp + self.fn)

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return _safe_div(2 * p * r, p + r)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


@dataclass
class MetricsReport:
    per_class: Dict[str, ClassStats] = field(default_factory=dict)
    total: int = 0

    @property
    def accuracy(self) -> float:
        return _safe_div(sum(c.tp for c in self.per_class.values()), self.total)

    def _weighted(self, attr: str) -> float:
        num = sum(c.n * getattr(c, attr) for c in self.per_class.values())
        den = sum(c.n for c in self.per_class.values())
        return _safe_div(num, den)

    @property
    def precision_w(self) -> float:
        return self._weighted("precision")

    @property
    def recall_w(self) -> float:
        return self._weighted("recall")

    @property
    def f1_w(self) -> float:
        return self._weighted("f1")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "per_class": {label: c.to_dict() for label, c in sorted(self.per_class.items())},
            "total": self.total,
            "accuracy": self.accuracy,
            "precision_w": self.precision_w,
            "recall_w": self.recall_w,
            "f1_w": self.f1_w,
        }


def compute_metrics(
    predictions: Sequence[str], golds: Sequence[str], labels: Sequence[str] = ()
) -> MetricsReport:
    """Multiclass confusion counts for aligned prediction/gold sequences."""
    if len(predictions) != len(golds):
        raise ValueError(f"{len(predictions)} predictions vs {len(golds)} golds")
    label_set: List[str] = list(labels) if labels else sorted(set(golds) | set(predictions))
    report = MetricsReport(total=len(golds))
    for label in label_set:
        stats = ClassStats()
        for pred, gold in zip(predictions, golds):
            if gold == label and pred == label:
                stats.tp += 1
            elif gold == label:
                stats.fn += 1
            elif pred == label:
                stats.fp += 1
            else:
                stats.tn += 1
        stats.n = sum(1 for g in golds if g == label)
        report.per_class[label] = stats
    return report


def format_table(rows: Sequence[Dict[str, Any]], columns: Sequence[str]) -> str:
    """Aligned plain-text table with floats fixed to 3 decimals."""
    def fmt(v: Any) -> str:
        if isinstance(v, float):
            return f"{v:.3f}"
        return str(v)

    rendered = [[fmt(r.get(c, "")) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in rendered)) if rendered else len(c) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(widths[i]) for i, c in enumerate(columns))]
    lines.append("  ".join("-" * w for w in widths))
    for row in rendered:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    return "\n".join(lines)
