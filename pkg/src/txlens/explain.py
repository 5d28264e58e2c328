"""Model explanation: permutation importance per feature group and
single-instance what-if probing.

Importance permutes whole groups (bank, industry, amount, year, month, day,
text) rather than single columns; individual hashed text dimensions mean
nothing to an analyst. Rows are sorted by sha before shuffling so the result
does not depend on dataset order, and every (group, repeat) draws its own
sub-seed, so repeats are order-free too.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from datetime import datetime
from typing import Mapping, Sequence

import numpy as np

from . import metrics
from .featurize import FEATURE_GROUPS, FeatureSchema, FeatureVector, build_feature_vector
from .ingest import EnrichedTransaction, parse_timestamp
from .labels import CLASS_ORDER, ClassLabel
from .pnn import PnnModel, Prediction, predict_proba, predict_proba_batch

IMPORTANCE_METRICS = ("macro_f1", "accuracy")
DEFAULT_REPEATS = 5

WHATIF_FIELDS = ("amount", "description", "bank", "industry", "date")


@dataclass(frozen=True)
class GroupImportance:
    group: str
    mean_drop: float
    std_drop: float
    repeats: int


@dataclass(frozen=True)
class ImportanceReport:
    model_id: str
    metric: str
    baseline: float
    groups: tuple[GroupImportance, ...]
    seed: int


@dataclass(frozen=True)
class WhatIfResult:
    sha: str
    baseline: Prediction
    modified: Prediction
    overrides: Mapping[str, object]
    delta: Mapping[ClassLabel, float]


def _score(model: PnnModel, rows: np.ndarray, actuals: Sequence[ClassLabel],
           metric: str) -> float:
    probs = predict_proba_batch(model, rows)
    finals = np.argmax(probs, axis=1)
    pairs = [(actual, CLASS_ORDER[int(finals[i])]) for i, actual in enumerate(actuals)]
    cm = metrics.confusion(pairs)
    if metric == "macro_f1":
        return metrics.macro_f1(cm)
    return metrics.overall_accuracy(cm)


def permutation_importance(
    model: PnnModel,
    dataset: Sequence[tuple[FeatureVector, ClassLabel]],
    metric: str = "macro_f1",
    repeats: int = DEFAULT_REPEATS,
    seed: int = 0,
) -> ImportanceReport:
    """Mean and std of the metric drop when each group's columns are shuffled
    jointly across rows. Negative drops (noise) are reported as-is."""
    if metric not in IMPORTANCE_METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {IMPORTANCE_METRICS}")
    if len(dataset) < 2:
        raise ValueError("permutation importance needs at least 2 rows")
    if repeats < 1:
        raise ValueError("repeats must be at least 1")

    ordered = sorted(dataset, key=lambda pair: pair[0].sha)
    rows = np.vstack([fv.values for fv, _ in ordered])
    actuals = [label for _, label in ordered]
    group_index = ordered[0][0].group_index

    baseline = _score(model, rows, actuals, metric)
    groups: list[GroupImportance] = []
    for gi, name in enumerate(FEATURE_GROUPS):
        start, stop = group_index[name]
        drops = np.empty(repeats)
        for repeat in range(repeats):
            rng = np.random.default_rng([seed, gi, repeat])
            perm = rng.permutation(rows.shape[0])
            shuffled = rows.copy()
            shuffled[:, start:stop] = rows[perm, start:stop]
            drops[repeat] = baseline - _score(model, shuffled, actuals, metric)
        groups.append(GroupImportance(
            group=name,
            mean_drop=float(drops.mean()),
            std_drop=float(drops.std()),
            repeats=repeats,
        ))
    return ImportanceReport(
        model_id=model.model_id,
        metric=metric,
        baseline=baseline,
        groups=tuple(groups),
        seed=seed,
    )


def importance_feedback(report: ImportanceReport, threshold: float) -> list[str]:
    """Groups worth keeping: mean_drop >= threshold, strongest first, ties in
    canonical group order."""
    order = {name: i for i, name in enumerate(FEATURE_GROUPS)}
    kept = [g for g in report.groups if g.mean_drop >= threshold]
    kept.sort(key=lambda g: (-g.mean_drop, order[g.group]))
    return [g.group for g in kept]


def what_if(
    model: PnnModel,
    schema: FeatureSchema,
    base: EnrichedTransaction,
    overrides: Mapping[str, object],
) -> WhatIfResult:
    """Re-predict a transaction with some fields replaced. Pure probe: the
    result is returned to the caller and never stored."""
    unknown = [key for key in overrides if key not in WHATIF_FIELDS]
    if unknown:
        raise ValueError(f"unknown what-if field(s): {', '.join(sorted(unknown))}")

    raw = base.raw
    if "amount" in overrides:
        raw = dataclasses.replace(raw, amount=float(overrides["amount"]))  # type: ignore[arg-type]
    if "description" in overrides:
        raw = dataclasses.replace(raw, description=str(overrides["description"]))
    if "date" in overrides:
        value = overrides["date"]
        when = value if isinstance(value, datetime) else parse_timestamp(str(value), "date")
        raw = dataclasses.replace(raw, date=when)
    modified_tx = dataclasses.replace(
        base,
        raw=raw,
        bank=str(overrides.get("bank", base.bank)),
        industry=str(overrides.get("industry", base.industry)),
    )

    baseline = predict_proba(model, build_feature_vector(base, schema).values, sha=base.sha)
    modified = predict_proba(model, build_feature_vector(modified_tx, schema).values, sha=base.sha)
    delta = {label: modified.probabilities[label] - baseline.probabilities[label]
             for label in CLASS_ORDER}
    return WhatIfResult(
        sha=base.sha,
        baseline=baseline,
        modified=modified,
        overrides=dict(overrides),
        delta=delta,
    )


# --------------------------------------------------------------------------
# Persistence
# --------------------------------------------------------------------------

def importance_to_dict(report: ImportanceReport) -> dict:
    return {
        "model_id": report.model_id,
        "metric": report.metric,
        "baseline": report.baseline,
        "seed": report.seed,
        "groups": [
            {
                "group": g.group,
                "mean_drop": g.mean_drop,
                "std_drop": g.std_drop,
                "repeats": g.repeats,
            }
            for g in report.groups
        ],
    }


def importance_to_json(report: ImportanceReport) -> str:
    return json.dumps(importance_to_dict(report), indent=2)


def importance_from_json(text: str) -> ImportanceReport:
    doc = json.loads(text)
    return ImportanceReport(
        model_id=doc["model_id"],
        metric=doc["metric"],
        baseline=float(doc["baseline"]),
        groups=tuple(
            GroupImportance(
                group=g["group"],
                mean_drop=float(g["mean_drop"]),
                std_drop=float(g["std_drop"]),
                repeats=int(g["repeats"]),
            )
            for g in doc["groups"]
        ),
        seed=int(doc["seed"]),
    )
