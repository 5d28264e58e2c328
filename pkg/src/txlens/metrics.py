"""Confusion matrix and the evaluation measures derived from it.

All rates come from one 5x5 grid indexed (actual, predicted) in canonical
class order. Division-by-zero cases return 0 and record which metric was
undefined instead of raising, so downstream views always have numbers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping, Sequence

import numpy as np

from .labels import CLASS_ORDER, N_CLASSES, ClassLabel

if TYPE_CHECKING:
    from .pnn import Prediction


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # (5, 5) ints, rows = actual, cols = predicted
    total: int

    def __post_init__(self):
        if self.counts.shape != (N_CLASSES, N_CLASSES):
            raise ValueError(f"expected a {N_CLASSES}x{N_CLASSES} grid, got {self.counts.shape}")
        if (self.counts < 0).any():
            raise ValueError("negative cell count")
        if int(self.counts.sum()) != self.total:
            raise ValueError("total does not match cell sum")


@dataclass(frozen=True)
class ClassCounts:
    label: ClassLabel
    tp: int
    fp: int
    tn: int
    fn: int


@dataclass(frozen=True)
class ClassMetrics:
    label: ClassLabel
    accuracy: float
    precision: float
    recall: float
    f_measure: float
    support: int
    undefined_flags: tuple[str, ...]


@dataclass(frozen=True)
class EvaluationReport:
    model_id: str
    overall_accuracy: float
    cohen_kappa: float
    p: float  # observed agreement
    q: float  # chance agreement from marginals
    classes: tuple[ClassMetrics, ...]
    undefined_flags: tuple[str, ...]

    def for_class(self, label: ClassLabel) -> ClassMetrics:
        return self.classes[label.index]


def confusion(pairs: Sequence[tuple[ClassLabel, ClassLabel]]) -> ConfusionMatrix:
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for actual, predicted in pairs:
        counts[actual.index, predicted.index] += 1
    return ConfusionMatrix(counts=counts, total=len(pairs))


def per_class_counts(cm: ConfusionMatrix, label: ClassLabel) -> ClassCounts:
    """One-vs-rest projection of the grid for a single class."""
    k = label.index
    tp = int(cm.counts[k, k])
    fp = int(cm.counts[:, k].sum()) - tp
    fn = int(cm.counts[k, :].sum()) - tp
    tn = cm.total - tp - fp - fn
    return ClassCounts(label=label, tp=tp, fp=fp, tn=tn, fn=fn)


def _ratio(numerator: float, denominator: float, flag: str, flags: list[str]) -> float:
    if denominator == 0:
        flags.append(flag)
        return 0.0
    return numerator / denominator


def evaluate(cm: ConfusionMatrix, model_id: str = "") -> EvaluationReport:
    """Per-class accuracy/precision/recall/F plus overall accuracy and
    Cohen's kappa with its agreement components."""
    if cm.total == 0:
        raise ValueError("cannot evaluate an empty confusion matrix")

    total = float(cm.total)
    classes: list[ClassMetrics] = []
    for label in CLASS_ORDER:
        counts = per_class_counts(cm, label)
        flags: list[str] = []
        precision = _ratio(counts.tp, counts.tp + counts.fp, "precision", flags)
        recall = _ratio(counts.tp, counts.tp + counts.fn, "recall", flags)
        f_measure = _ratio(2.0 * precision * recall, precision + recall, "f_measure", flags)
        classes.append(ClassMetrics(
            label=label,
            accuracy=(counts.tp + counts.tn) / total,
            precision=precision,
            recall=recall,
            f_measure=f_measure,
            support=counts.tp + counts.fn,
            undefined_flags=tuple(flags),
        ))

    trace = float(np.trace(cm.counts))
    p = trace / total
    row_marginals = cm.counts.sum(axis=1).astype(np.float64)
    col_marginals = cm.counts.sum(axis=0).astype(np.float64)
    q = float(row_marginals @ col_marginals) / (total * total)
    report_flags: list[str] = []
    if q == 1.0:
        # Degenerate marginals: all mass in one class. Perfect agreement is
        # still kappa 1; anything else has no defined chance correction.
        if p == 1.0:
            kappa = 1.0
        else:
            report_flags.append("cohen_kappa")
            kappa = 0.0
    else:
        kappa = (p - q) / (1.0 - q)

    return EvaluationReport(
        model_id=model_id,
        overall_accuracy=p,
        cohen_kappa=kappa,
        p=p,
        q=q,
        classes=tuple(classes),
        undefined_flags=tuple(report_flags),
    )


def macro_f1(cm: ConfusionMatrix) -> float:
    """Unweighted mean of per-class F measures (undefined classes count 0)."""
    report = evaluate(cm)
    return sum(c.f_measure for c in report.classes) / N_CLASSES


def overall_accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise ValueError("cannot evaluate an empty confusion matrix")
    return float(np.trace(cm.counts)) / cm.total


def segregate(predictions: Sequence["Prediction"],
              actuals: Mapping[str, ClassLabel]) -> dict[str, list[str]]:
    """Partition prediction shas into correct/incorrect against actual labels.

    The sha sets must match exactly; anything present on one side only is an
    error listing the offenders.
    """
    shas = [p.sha for p in predictions]
    if len(set(shas)) != len(shas):
        duplicates = sorted({s for s in shas if shas.count(s) > 1})
        raise ValueError(f"duplicate prediction sha(s): {', '.join(duplicates)}")
    missing = sorted(set(shas) - set(actuals))
    extra = sorted(set(actuals) - set(shas))
    if missing or extra:
        raise ValueError(
            "sha sets do not align: "
            f"without actuals [{', '.join(missing)}]; without predictions [{', '.join(extra)}]")

    result: dict[str, list[str]] = {"correct": [], "incorrect": []}
    for prediction in predictions:
        key = "correct" if prediction.final == actuals[prediction.sha] else "incorrect"
        result[key].append(prediction.sha)
    return result


# --------------------------------------------------------------------------
# Persistence
# --------------------------------------------------------------------------

def class_metrics_to_dict(cm: ClassMetrics) -> dict:
    return {
        "label": cm.label.value,
        "accuracy": cm.accuracy,
        "precision": cm.precision,
        "recall": cm.recall,
        "f_measure": cm.f_measure,
        "support": cm.support,
        "undefined_flags": list(cm.undefined_flags),
    }


def report_to_dict(report: EvaluationReport) -> dict:
    return {
        "model_id": report.model_id,
        "overall_accuracy": report.overall_accuracy,
        "cohen_kappa": report.cohen_kappa,
        "p": report.p,
        "q": report.q,
        "undefined_flags": list(report.undefined_flags),
        "classes": [class_metrics_to_dict(c) for c in report.classes],
    }


def report_to_json(report: EvaluationReport) -> str:
    return json.dumps(report_to_dict(report), indent=2)


def report_from_json(text: str) -> EvaluationReport:
    doc = json.loads(text)
    classes = tuple(
        ClassMetrics(
            label=ClassLabel.from_name(c["label"]),
            accuracy=float(c["accuracy"]),
            precision=float(c["precision"]),
            recall=float(c["recall"]),
            f_measure=float(c["f_measure"]),
            support=int(c["support"]),
            undefined_flags=tuple(c.get("undefined_flags", ())),
        )
        for c in doc["classes"]
    )
    return EvaluationReport(
        model_id=doc.get("model_id", ""),
        overall_accuracy=float(doc["overall_accuracy"]),
        cohen_kappa=float(doc["cohen_kappa"]),
        p=float(doc["p"]),
        q=float(doc["q"]),
        classes=classes,
        undefined_flags=tuple(doc.get("undefined_flags", ())),
    )
