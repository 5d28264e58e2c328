"""Evidence store: joined transactions, feature vectors, and predictions,
with the discovery queries the analyst dashboard is built on.

Records are kept sorted by sha so every query result is stable regardless of
insertion order. The store is immutable once built; a retrain builds a new
store rather than mutating a published one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import metrics
from .featurize import FeatureVector, clean_tokenize, vector_from_record, vector_to_record
from .ingest import (EnrichedTransaction, ShaConflictError, transaction_from_record,
                     transaction_to_record)
from .labels import CLASS_ORDER, ClassLabel
from .metrics import ClassMetrics, EvaluationReport
from .pnn import Prediction

OUTCOMES = ("TP", "FP", "TN", "FN")
MATCH_MODES = ("contains", "exact")


@dataclass(frozen=True)
class EvidenceRecord:
    tx: EnrichedTransaction
    features: FeatureVector
    prediction: Prediction
    actual: ClassLabel | None = None

    @property
    def sha(self) -> str:
        return self.tx.raw.sha

    @property
    def correct(self) -> bool | None:
        if self.actual is None:
            return None
        return self.prediction.final == self.actual

    def outcome_for(self, focus: ClassLabel) -> str:
        """One-vs-rest outcome relative to a focus class."""
        if self.actual is None:
            raise ValueError(f"record {self.sha} has no actual label")
        if self.actual == focus:
            return "TP" if self.prediction.final == focus else "FN"
        return "FP" if self.prediction.final == focus else "TN"


@dataclass(frozen=True)
class VisualizationPoint:
    sha: str
    x: float
    outcome: str
    probability_of_focus: float


def _check_duplicates(shas: Sequence[str], source: str):
    if len(set(shas)) != len(shas):
        duplicates = sorted({s for s in shas if shas.count(s) > 1})
        raise ShaConflictError(f"duplicate sha(s) in {source}: {', '.join(duplicates)}")


def load_join(
    transactions: Sequence[EnrichedTransaction],
    features: Sequence[FeatureVector],
    predictions: Sequence[Prediction],
    actuals: Mapping[str, ClassLabel] | None = None,
) -> "EvidenceStore":
    """Join the three artifact streams on sha into an indexed store.

    The three sha sets must be identical; actuals may cover any subset (the
    rest stay unlabeled). The evaluation report is precomputed over the
    labeled records.
    """
    tx_shas = [tx.raw.sha for tx in transactions]
    fv_shas = [fv.sha for fv in features]
    pr_shas = [p.sha for p in predictions]
    _check_duplicates(tx_shas, "transactions")
    _check_duplicates(fv_shas, "features")
    _check_duplicates(pr_shas, "predictions")

    tx_set, fv_set, pr_set = set(tx_shas), set(fv_shas), set(pr_shas)
    if not (tx_set == fv_set == pr_set):
        problems = []
        for name, have in (("features", fv_set), ("predictions", pr_set)):
            missing = sorted(tx_set - have)
            if missing:
                problems.append(f"{name} missing [{', '.join(missing)}]")
            orphaned = sorted(have - tx_set)
            if orphaned:
                problems.append(f"{name} without transactions [{', '.join(orphaned)}]")
        raise ValueError("sha sets misaligned: " + "; ".join(problems))
    unknown_actuals = sorted(set(actuals or {}) - tx_set)
    if unknown_actuals:
        raise ValueError(f"actuals for unknown sha(s): {', '.join(unknown_actuals)}")

    by_sha_fv = {fv.sha: fv for fv in features}
    by_sha_pred = {p.sha: p for p in predictions}
    actuals = actuals or {}
    records = [
        EvidenceRecord(
            tx=tx,
            features=by_sha_fv[tx.raw.sha],
            prediction=by_sha_pred[tx.raw.sha],
            actual=actuals.get(tx.raw.sha),
        )
        for tx in transactions
    ]
    return EvidenceStore(records)


class EvidenceStore:
    """Immutable joined store with sha/class/token indexes.

    Queries run over a snapshot; building a new store is how state changes.
    """

    def __init__(self, records: Iterable[EvidenceRecord]):
        self._records: list[EvidenceRecord] = sorted(records, key=lambda r: r.sha)
        _check_duplicates([r.sha for r in self._records], "records")
        self._by_sha: dict[str, EvidenceRecord] = {r.sha: r for r in self._records}
        self._by_predicted: dict[ClassLabel, list[EvidenceRecord]] = {
            label: [] for label in CLASS_ORDER}
        self._token_index: dict[str, set[str]] = {}
        for record in self._records:
            self._by_predicted[record.prediction.final].append(record)
            for token in clean_tokenize(record.tx.raw.description):
                self._token_index.setdefault(token, set()).add(record.sha)

        labeled = [r for r in self._records if r.actual is not None]
        self._report: EvaluationReport | None = None
        self._segregation: dict[str, list[str]] = {"correct": [], "incorrect": []}
        if labeled:
            pairs = [(r.actual, r.prediction.final) for r in labeled]
            self._report = metrics.evaluate(metrics.confusion(pairs),
                                            model_id=labeled[0].prediction.model_id)
            self._segregation = metrics.segregate(
                [r.prediction for r in labeled], {r.sha: r.actual for r in labeled})

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, sha: str) -> bool:
        return sha in self._by_sha

    @property
    def records(self) -> list[EvidenceRecord]:
        return list(self._records)

    @property
    def report(self) -> EvaluationReport | None:
        """Evaluation over the labeled records; None when nothing is labeled."""
        return self._report

    @property
    def segregation(self) -> dict[str, list[str]]:
        return {key: list(value) for key, value in self._segregation.items()}

    def get(self, sha: str) -> EvidenceRecord:
        try:
            return self._by_sha[sha]
        except KeyError:
            raise KeyError(f"unknown sha {sha}") from None

    def records_with_token(self, token: str) -> list[EvidenceRecord]:
        shas = self._token_index.get(token.lower(), set())
        return [self._by_sha[sha] for sha in sorted(shas)]

    # -- queries ------------------------------------------------------------

    def filter_by_classification(
        self, label: ClassLabel, correctness: str | None = None,
    ) -> tuple[list[EvidenceRecord], ClassMetrics | None]:
        """Records PREDICTED as the given class, optionally narrowed to the
        correct or incorrect ones, plus that class's metrics when available."""
        if correctness not in (None, "correct", "incorrect"):
            raise ValueError(f"correctness must be correct|incorrect, got {correctness!r}")
        records = list(self._by_predicted[label])
        if correctness == "correct":
            records = [r for r in records if r.correct is True]
        elif correctness == "incorrect":
            records = [r for r in records if r.correct is False]
        class_metrics = self._report.for_class(label) if self._report else None
        return records, class_metrics

    def search(self, term: str, match: str = "contains") -> dict[str, list[EvidenceRecord]]:
        """Description search over labeled records, split by correctness.

        contains: case-insensitive substring of the raw description.
        exact: case-insensitive whole-description equality.
        """
        if not term:
            raise ValueError("search term must be non-empty")
        if match not in MATCH_MODES:
            raise ValueError(f"match must be one of {MATCH_MODES}, got {match!r}")
        needle = term.lower()
        hits: dict[str, list[EvidenceRecord]] = {"correct": [], "incorrect": []}
        for record in self._records:
            if record.actual is None:
                continue
            haystack = record.tx.raw.description.lower()
            matched = needle in haystack if match == "contains" else haystack == needle
            if matched:
                hits["correct" if record.correct else "incorrect"].append(record)
        return hits

    def neighbors(
        self, sha: str, feature_groups: Sequence[str] | None = None, k: int = 5,
    ) -> list[tuple[EvidenceRecord, float]]:
        """k nearest records by Euclidean distance restricted to the selected
        feature groups. The query record itself is excluded; ties break by sha."""
        if k < 1:
            raise ValueError("k must be at least 1")
        query = self.get(sha)
        group_index = query.features.group_index
        if feature_groups is None:
            feature_groups = list(group_index)
        unknown = [g for g in feature_groups if g not in group_index]
        if unknown:
            raise ValueError(f"unknown feature group(s): {', '.join(sorted(unknown))}")
        spans = [group_index[g] for g in feature_groups]

        def restrict(values: np.ndarray) -> np.ndarray:
            return np.concatenate([values[start:stop] for start, stop in spans])

        origin = restrict(query.features.values)
        scored = []
        for record in self._records:
            if record.sha == sha:
                continue
            delta = restrict(record.features.values) - origin
            scored.append((float(np.sqrt(delta @ delta)), record.sha, record))
        scored.sort(key=lambda item: (item[0], item[1]))
        return [(record, distance) for distance, _, record in scored[:k]]

    def visualization_data(
        self, focus_class: ClassLabel, feature_axis: str,
    ) -> list[VisualizationPoint]:
        """One point per record: position on the chosen feature axis, one-vs-
        rest outcome for the focus class, and the focus-class probability.

        Scalar axes (amount, year, day) use the stored value directly; vector
        axes use the group's L2 norm.
        """
        if not self._records:
            return []
        unlabeled = [r.sha for r in self._records if r.actual is None]
        if unlabeled:
            raise ValueError(
                f"visualization requires actual labels; missing for [{', '.join(unlabeled)}]")
        group_index = self._records[0].features.group_index
        if feature_axis not in group_index:
            raise ValueError(f"unknown feature group(s): {feature_axis}")
        points = []
        for record in self._records:
            block = record.features.group_values(feature_axis)
            x = float(block[0]) if block.shape[0] == 1 else float(np.sqrt(block @ block))
            points.append(VisualizationPoint(
                sha=record.sha,
                x=x,
                outcome=record.outcome_for(focus_class),
                probability_of_focus=float(record.prediction.probabilities[focus_class]),
            ))
        return points

    # -- prediction cache ---------------------------------------------------

    def cached_prediction(self, sha: str, model_id: str) -> Prediction | None:
        """Stored prediction for the sha, valid only while the model matches.
        A retrain changes model_id, which invalidates every cache entry."""
        record = self._by_sha.get(sha)
        if record is None or record.prediction.model_id != model_id:
            return None
        return record.prediction


# --------------------------------------------------------------------------
# Persistence
# --------------------------------------------------------------------------

def _prediction_to_record(prediction: Prediction) -> dict:
    return {
        "sha": prediction.sha,
        "model_id": prediction.model_id,
        "final": prediction.final.value,
        "probabilities": prediction.as_wire(),
    }


def _prediction_from_record(record: Mapping) -> Prediction:
    return Prediction(
        sha=record["sha"],
        probabilities={label: float(record["probabilities"][label.wire_key])
                       for label in CLASS_ORDER},
        final=ClassLabel.from_name(record["final"]),
        model_id=record["model_id"],
    )


def store_to_jsonl(store: EvidenceStore) -> str:
    lines = []
    for record in store.records:
        lines.append(json.dumps({
            "tx": transaction_to_record(record.tx),
            "features": vector_to_record(record.features),
            "prediction": _prediction_to_record(record.prediction),
            "actual": record.actual.value if record.actual else None,
        }, sort_keys=True))
    return "\n".join(lines) + ("\n" if lines else "")


def store_from_jsonl(text: str) -> EvidenceStore:
    records = []
    for line in text.splitlines():
        if not line.strip():
            continue
        doc = json.loads(line)
        tx, _ = transaction_from_record(doc["tx"])
        records.append(EvidenceRecord(
            tx=tx,
            features=vector_from_record(doc["features"]),
            prediction=_prediction_from_record(doc["prediction"]),
            actual=ClassLabel.from_name(doc["actual"]) if doc.get("actual") else None,
        ))
    return EvidenceStore(records)
