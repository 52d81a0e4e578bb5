"""Classification metrics: per-class precision/recall/F1, macro and
support-weighted F1, accuracy, and a 3x3 confusion matrix.

Conventions: any ratio with a zero denominator is 0, and a class with zero
support gets F1 = 0 plus an entry in the report's warning list. Weighted F1
is the headline number for scheme comparisons; macro F1 weights every class
equally regardless of support.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import LABELS
from .errors import UsageError


@dataclass
class ClassMetrics:
    label: str
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class MetricsReport:
    accuracy: float
    per_class: list
    macro_f1: float
    weighted_f1: float
    confusion: list  # confusion[i][j] = count of (true=i, predicted=j)
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return {
            "accuracy": self.accuracy,
            "per_class": [
                {
                    "label": c.label,
                    "precision": c.precision,
                    "recall": c.recall,
                    "f1": c.f1,
                    "support": c.support,
                }
                for c in self.per_class
            ],
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
            "confusion": self.confusion,
            "warnings": list(self.warnings),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_text(self):
        lines = []
        header = f"{'class':<10} {'precision':>9} {'recall':>9} {'f1':>9} {'support':>8}"
        lines.append(header)
        lines.append("-" * len(header))
        for c in self.per_class:
            lines.append(
                f"{c.label:<10} {c.precision:>9.4f} {c.recall:>9.4f} "
                f"{c.f1:>9.4f} {c.support:>8d}"
            )
        lines.append("-" * len(header))
        lines.append(f"{'accuracy':<10} {self.accuracy:>9.4f}")
        lines.append(f"{'macro f1':<10} {self.macro_f1:>9.4f}")
        lines.append(f"{'wgt f1':<10} {self.weighted_f1:>9.4f}")
        lines.append("")
        lines.append("confusion (rows = true, cols = predicted):")
        lines.append("          " + " ".join(f"{l[:8]:>8}" for l in LABELS))
        for i, row in enumerate(self.confusion):
            lines.append(f"{LABELS[i][:8]:>8}  " + " ".join(f"{v:>8d}" for v in row))
        for w in self.warnings:
            lines.append(f"warning: {w}")
        return "\n".join(lines) + "\n"


def _safe_div(num, den):
    return num / den if den > 0 else 0.0


def compute_metrics(y_true, y_pred, labels=LABELS):
    """MetricsReport over integer class ids (0 .. len(labels)-1)."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise UsageError(
            f"labels and predictions must be matching 1-d arrays, "
            f"got {y_true.shape} and {y_pred.shape}")
    if y_true.size == 0:
        raise UsageError("cannot compute metrics on zero examples")
    k = len(labels)
    if y_true.min() < 0 or y_true.max() >= k or y_pred.min() < 0 or y_pred.max() >= k:
        raise UsageError(f"class ids must lie in [0, {k})")

    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (y_true, y_pred), 1)

    per_class = []
    warnings = []
    for c in range(k):
        tp = int(confusion[c, c])
        support = int(confusion[c].sum())
        predicted = int(confusion[:, c].sum())
        precision = _safe_div(tp, predicted)
        recall = _safe_div(tp, support)
        f1 = _safe_div(2.0 * precision * recall, precision + recall)
        if support == 0:
            f1 = 0.0
            warnings.append(f"class '{labels[c]}' has zero support; f1 set to 0")
        per_class.append(ClassMetrics(
            label=labels[c], precision=precision, recall=recall, f1=f1, support=support))

    total = int(y_true.size)
    accuracy = float((y_true == y_pred).sum()) / total
    macro_f1 = sum(c.f1 for c in per_class) / k
    weighted_f1 = sum(c.f1 * c.support for c in per_class) / total
    return MetricsReport(
        accuracy=accuracy,
        per_class=per_class,
        macro_f1=macro_f1,
        weighted_f1=weighted_f1,
        confusion=confusion.tolist(),
        warnings=warnings,
    )
