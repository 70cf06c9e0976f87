"""Per-class classification metrics and feature-importance reports."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import CLASS_NAMES, FEATURE_NAMES, N_CLASSES, N_FEATURES
from .baselines.contract import Classifier
from .errors import EmptyTestSet, Unsupported

REPORT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ClassMetrics:
    precision: Optional[float]
    recall: Optional[float]
    f1: Optional[float]
    support: int


@dataclass(frozen=True)
class EvaluationReport:
    per_class: dict[str, ClassMetrics]
    accuracy: float
    macro_precision: Optional[float]
    confusion: np.ndarray
    n_examples: int

    def to_dict(self) -> dict:
        """One block per class plus an overall block."""
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "n_examples": self.n_examples,
            "classes": {
                name: {"precision": m.precision, "f1": m.f1, "recall": m.recall, "support": m.support}
                for name, m in self.per_class.items()
            },
            "overall": {"accuracy": self.accuracy, "macro_precision": self.macro_precision},
            "confusion": self.confusion.tolist(),
        }


@dataclass(frozen=True)
class ImportanceReport:
    method: str
    scores: np.ndarray
    top3: list[str]
    degenerate: bool = False
    raw: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        d = {
            "method": self.method,
            "features": list(FEATURE_NAMES),
            "scores": self.scores.tolist(),
            "top3": self.top3,
            "degenerate": self.degenerate,
        }
        if self.raw is not None:
            d["raw"] = self.raw.tolist()
        return d


def confusion_matrix(y_true, y_pred, n_classes: int = N_CLASSES) -> np.ndarray:
    """Rows are true classes, columns predicted classes."""
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true, dtype=np.int64), np.asarray(y_pred, dtype=np.int64)), 1)
    return cm


def f1_from_pr(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def report_from_confusion(cm: np.ndarray) -> EvaluationReport:
    """Metrics from a confusion matrix.

    Precision is None for a class that is never predicted, recall is None
    for a class absent from the truth, and F1 (``2TP / (2TP + FP + FN)``) is
    None only when the class appears in neither.
    """
    cm = np.asarray(cm, dtype=np.int64)
    total = int(cm.sum())
    if total == 0:
        raise EmptyTestSet("no examples to evaluate")
    per_class = {}
    for c, name in enumerate(CLASS_NAMES):
        tp = int(cm[c, c])
        col, row = int(cm[:, c].sum()), int(cm[c, :].sum())
        precision = tp / col if col else None
        recall = tp / row if row else None
        if precision is not None and recall is not None:
            f1 = f1_from_pr(precision, recall)
        elif col or row:
            f1 = 2 * tp / (col + row)
        else:
            f1 = None
        per_class[name] = ClassMetrics(precision, recall, f1, row)
    defined = [m.precision for m in per_class.values() if m.precision is not None]
    return EvaluationReport(
        per_class=per_class,
        accuracy=float(np.trace(cm)) / total,
        macro_precision=float(np.mean(defined)) if defined else None,
        confusion=cm,
        n_examples=total,
    )


def evaluate(model: Classifier, X, y) -> EvaluationReport:
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise EmptyTestSet("no examples to evaluate")
    return report_from_confusion(confusion_matrix(y, model.predict(X)))


def _top3(scores: np.ndarray) -> list[str]:
    # stable sort on -score keeps feature order among ties
    order = np.argsort(-scores, kind="stable")[:3]
    return [FEATURE_NAMES[i] for i in order]


def importance_report(raw: Optional[np.ndarray], method: str) -> ImportanceReport:
    """Floor at zero, sum-normalize; all-zero input becomes a flagged uniform vector."""
    if raw is None:
        scores, degenerate = np.full(N_FEATURES, 1.0 / N_FEATURES), True
    else:
        clipped = np.maximum(np.asarray(raw, dtype=float), 0.0)
        total = clipped.sum()
        degenerate = not total > 0
        scores = clipped / total if not degenerate else np.full(N_FEATURES, 1.0 / N_FEATURES)
    return ImportanceReport(
        method, scores, _top3(scores), degenerate, None if raw is None else np.asarray(raw, float)
    )


def native_importance(model: Classifier) -> ImportanceReport:
    """LR: mean |weight| over classes; trees: split-gain totals."""
    if model.kind not in ("lr", "rf", "gbt"):
        raise Unsupported(f"native importance is not available for {model.kind!r}; use permutation")
    return importance_report(model.native_importance(), "native")


def accuracy(model: Classifier, X, y) -> float:
    return float(np.mean(model.predict(X) == y))


def permutation_importance(
    model: Classifier, X, y, repeats: int = 20, seed: int = 0
) -> ImportanceReport:
    """Mean accuracy drop when one feature column is shuffled.

    Shuffles use one generator seeded with ``seed`` and consumed in
    (repeat, feature) order, so the report is reproducible.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise EmptyTestSet("no examples for permutation importance")
    if len(y) < 10:
        raise ValueError("permutation importance needs at least 10 examples")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    rng = np.random.default_rng(seed)
    base = accuracy(model, X, y)
    drops = np.zeros((repeats, N_FEATURES))
    for r in range(repeats):
        for j in range(N_FEATURES):
            Xp = X.copy()
            Xp[:, j] = X[rng.permutation(len(X)), j]
            drops[r, j] = base - accuracy(model, Xp, y)
    return importance_report(drops.mean(axis=0), "permutation")


def pick_importance(model: Classifier, method: str, X=None, y=None, repeats: int = 20, seed: int = 0):
    if method == "native":
        return native_importance(model)
    if method == "permutation":
        return permutation_importance(model, X, y, repeats, seed)
    raise ValueError(f"unknown importance method {method!r}")
