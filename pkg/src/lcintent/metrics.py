"""Three-class confusion-matrix metrics.

Precision, recall and F1 use the 0/0 -> 0 convention, so a class that is
neither present nor predicted scores an F1 of 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, LengthMismatch

N_CLASSES = 3


def confusion_matrix(predictions, labels, n_classes: int = N_CLASSES) -> np.ndarray:
    """Rows are true classes, columns predicted ones."""
    p = np.asarray(predictions, dtype=np.int64)
    y = np.asarray(labels, dtype=np.int64)
    if len(p) != len(y):
        raise LengthMismatch(f"{len(p)} predictions for {len(y)} labels")
    if len(y) == 0:
        raise EmptyInput("no predictions to score")
    return np.bincount(y * n_classes + p, minlength=n_classes * n_classes).reshape(n_classes, n_classes)


def _safe_div(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.divide(a, b, out=np.zeros(np.broadcast(a, b).shape), where=b > 0)


def per_class_f1(cm: np.ndarray) -> np.ndarray:
    """F1 per class from a confusion matrix, or from a stack of them (leading axes)."""
    tp = np.diagonal(cm, axis1=-2, axis2=-1)
    pred = cm.sum(axis=-2)
    true = cm.sum(axis=-1)
    # 2PR/(P+R) simplifies to 2tp/(pred+true) and shares the 0/0 case
    return _safe_div(2 * tp, pred + true)


def macro_f1(predictions, labels) -> float:
    return float(per_class_f1(confusion_matrix(predictions, labels)).mean())


@dataclass(frozen=True, eq=False)
class MetricsReport:
    confusion: np.ndarray
    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    macro_f1: float

    @property
    def n(self) -> int:
        return int(self.confusion.sum())

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "f1": [float(v) for v in self.f1],
            "precision": [float(v) for v in self.precision],
            "recall": [float(v) for v in self.recall],
            "confusion": self.confusion.tolist(),
        }


def report_from_confusion(cm: np.ndarray) -> MetricsReport:
    cm = np.asarray(cm, dtype=np.int64)
    tp = np.diag(cm)
    precision = _safe_div(tp, cm.sum(axis=0))
    recall = _safe_div(tp, cm.sum(axis=1))
    f1 = per_class_f1(cm)
    total = cm.sum()
    return MetricsReport(
        confusion=cm,
        accuracy=float(tp.sum() / total) if total else 0.0,
        precision=precision,
        recall=recall,
        f1=f1,
        macro_f1=float(f1.mean()),
    )


def compute_metrics(predictions, labels) -> MetricsReport:
    return report_from_confusion(confusion_matrix(predictions, labels))
