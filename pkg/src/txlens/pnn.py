"""Probabilistic neural network over the five credit classes.

Training stores exemplars verbatim (no iterative fitting). Prediction runs a
Gaussian kernel against every exemplar, averages per class, weights by the
class priors, and normalizes. Two density paths exist on purpose: a scalar
path summed with math.fsum (order-independent, oracle-exact) and a batched
path on the squared-norm expansion (fast enough for whole-dataset scoring).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .featurize import FeatureVector
from .labels import CLASS_ORDER, N_CLASSES, ClassLabel

DEFAULT_SIGMA = 0.2
SIGMA_GRID = (0.05, 0.1, 0.2, 0.5, 1.0)

PRIOR_MODES = ("empirical", "uniform")


@dataclass(frozen=True)
class Prediction:
    sha: str
    probabilities: Mapping[ClassLabel, float]
    final: ClassLabel
    model_id: str

    def as_wire(self) -> dict[str, float]:
        return {label.wire_key: float(self.probabilities[label]) for label in CLASS_ORDER}


@dataclass(frozen=True)
class PnnModel:
    schema_version: int
    exemplars: Mapping[ClassLabel, np.ndarray]  # (n_k, d) per class
    sigma: float
    priors: np.ndarray  # canonical order, sums to 1
    model_id: str

    @property
    def dimension(self) -> int:
        return next(iter(self.exemplars.values())).shape[1]

    @property
    def n_exemplars(self) -> int:
        return sum(block.shape[0] for block in self.exemplars.values())


def _model_content(schema_version: int, exemplars: Mapping[ClassLabel, np.ndarray],
                   sigma: float, priors: np.ndarray) -> dict:
    return {
        "schema_version": schema_version,
        "sigma": sigma,
        "priors": {label.wire_key: float(priors[label.index]) for label in CLASS_ORDER},
        "exemplars": {label.wire_key: [[float(v) for v in row] for row in exemplars[label]]
                      for label in CLASS_ORDER},
    }


def _content_id(content: dict) -> str:
    digest = hashlib.sha256(json.dumps(content, sort_keys=True).encode("utf-8")).hexdigest()
    return f"pnn-{digest[:12]}"


def train(labeled: Sequence[tuple[FeatureVector, ClassLabel]],
          sigma: float = DEFAULT_SIGMA,
          prior_mode: str = "empirical") -> PnnModel:
    """Build a model from labeled feature vectors.

    Every class must be represented and all vectors must share one length and
    schema version. The model id is a content hash, so retraining on identical
    inputs reproduces the same id.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if prior_mode not in PRIOR_MODES:
        raise ValueError(f"unknown prior_mode {prior_mode!r}; expected one of {PRIOR_MODES}")
    if not labeled:
        raise ValueError("no training data")

    lengths = {fv.values.shape[0] for fv, _ in labeled}
    if len(lengths) != 1:
        raise ValueError(f"inconsistent feature vector lengths: {sorted(lengths)}")
    versions = {fv.schema_version for fv, _ in labeled}
    if len(versions) != 1:
        raise ValueError(f"mixed schema versions in training data: {sorted(versions)}")

    by_class: dict[ClassLabel, list[np.ndarray]] = {label: [] for label in CLASS_ORDER}
    for fv, label in labeled:
        by_class[label].append(np.asarray(fv.values, dtype=np.float64))
    for label in CLASS_ORDER:
        if not by_class[label]:
            raise ValueError(f"class {label.value} has no exemplars")

    exemplars = {label: np.vstack(rows) for label, rows in by_class.items()}
    counts = np.array([exemplars[label].shape[0] for label in CLASS_ORDER], dtype=np.float64)
    if prior_mode == "uniform":
        priors = np.full(N_CLASSES, 1.0 / N_CLASSES)
    else:
        priors = counts / counts.sum()

    content = _model_content(versions.pop(), exemplars, sigma, priors)
    return PnnModel(
        schema_version=content["schema_version"],
        exemplars=exemplars,
        sigma=sigma,
        priors=priors,
        model_id=_content_id(content),
    )


def _check_length(model: PnnModel, x: np.ndarray):
    if x.shape[-1] != model.dimension:
        raise ValueError(
            f"feature vector length {x.shape[-1]} does not match model dimension {model.dimension}")


def class_densities(model: PnnModel, x: np.ndarray) -> np.ndarray:
    """f_k(x) = mean over class exemplars of exp(-|x - e|^2 / (2 sigma^2)).

    Scalar path: exact per-exemplar distances and fsum, so the result is
    independent of exemplar order and matches a direct oracle to the bit.
    """
    x = np.asarray(x, dtype=np.float64)
    _check_length(model, x)
    inv = 1.0 / (2.0 * model.sigma * model.sigma)
    densities = np.empty(N_CLASSES)
    for label in CLASS_ORDER:
        block = model.exemplars[label]
        d2 = ((block - x) ** 2).sum(axis=1)
        densities[label.index] = math.fsum(math.exp(-float(v) * inv) for v in d2) / block.shape[0]
    return densities


def predict_proba(model: PnnModel, x: np.ndarray, sha: str = "") -> Prediction:
    """Posterior over classes. If every kernel underflows to zero the priors
    are returned, so callers always get a usable distribution."""
    weighted = model.priors * class_densities(model, x)
    denominator = math.fsum(weighted)
    if denominator == 0.0:
        probs = model.priors.copy()
    else:
        probs = weighted / denominator
    return _to_prediction(probs, sha, model.model_id)


def predict(model: PnnModel, x: np.ndarray) -> ClassLabel:
    return predict_proba(model, x).final


def _to_prediction(probs: np.ndarray, sha: str, model_id: str) -> Prediction:
    final = CLASS_ORDER[int(np.argmax(probs))]  # argmax takes the first max: canonical tie-break
    return Prediction(
        sha=sha,
        probabilities={label: float(probs[label.index]) for label in CLASS_ORDER},
        final=final,
        model_id=model_id,
    )


def predict_proba_batch(model: PnnModel, rows: np.ndarray) -> np.ndarray:
    """Vectorized posteriors, one row of class probabilities per input row.

    Uses the |q|^2 + |e|^2 - 2 q.e expansion (clipped at zero) for speed; this
    can differ from the scalar path in the last couple of bits.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2:
        raise ValueError("expected a 2-D array of feature rows")
    _check_length(model, rows)
    inv = 1.0 / (2.0 * model.sigma * model.sigma)
    q_sq = (rows * rows).sum(axis=1)
    weighted = np.empty((rows.shape[0], N_CLASSES))
    for label in CLASS_ORDER:
        block = model.exemplars[label]
        e_sq = (block * block).sum(axis=1)
        d2 = q_sq[:, None] + e_sq[None, :] - 2.0 * (rows @ block.T)
        np.maximum(d2, 0.0, out=d2)
        weighted[:, label.index] = model.priors[label.index] * np.exp(-d2 * inv).mean(axis=1)
    denominators = weighted.sum(axis=1)
    underflow = denominators == 0.0
    probs = np.empty_like(weighted)
    if underflow.any():
        probs[underflow] = model.priors
    ok = ~underflow
    probs[ok] = weighted[ok] / denominators[ok, None]
    return probs


def predict_batch(model: PnnModel, vectors: Sequence[FeatureVector]) -> list[Prediction]:
    if not vectors:
        return []
    probs = predict_proba_batch(model, np.vstack([fv.values for fv in vectors]))
    return [_to_prediction(probs[i], fv.sha, model.model_id) for i, fv in enumerate(vectors)]


def select_sigma(
    train_split: Sequence[tuple[FeatureVector, ClassLabel]],
    validation_split: Sequence[tuple[FeatureVector, ClassLabel]],
    grid: Sequence[float] = SIGMA_GRID,
    prior_mode: str = "empirical",
) -> tuple[float, dict[float, float]]:
    """Grid-search sigma by macro-F1 on a held-out split. Ties keep the first
    (smallest) grid value. Returns the winner plus the full score table."""
    from . import metrics

    if not validation_split:
        raise ValueError("no validation data for sigma selection")
    scores: dict[float, float] = {}
    best_sigma, best_score = None, -1.0
    for sigma in grid:
        model = train(train_split, sigma=sigma, prior_mode=prior_mode)
        probs = predict_proba_batch(model, np.vstack([fv.values for fv, _ in validation_split]))
        finals = np.argmax(probs, axis=1)
        pairs = [(actual, CLASS_ORDER[int(finals[i])])
                 for i, (_, actual) in enumerate(validation_split)]
        score = metrics.macro_f1(metrics.confusion(pairs))
        scores[sigma] = score
        if score > best_score:
            best_sigma, best_score = sigma, score
    return best_sigma, scores


# --------------------------------------------------------------------------
# Wire formats and persistence
# --------------------------------------------------------------------------

def decisions_to_wire(predictions: Sequence[Prediction]) -> dict:
    """Final classifications in their transport shape."""
    return {
        "Transactions": [
            {"Sha": p.sha, "FinalClassification": p.final.value} for p in predictions
        ],
    }


def probabilities_to_wire(predictions: Sequence[Prediction]) -> dict:
    """Per-transaction class probabilities in their transport shape: one flat
    object per transaction with Sha plus the canonical snake_case class keys."""
    return {
        "Transactions": [{"Sha": p.sha, **p.as_wire()} for p in predictions],
    }


def decisions_from_wire(doc: Mapping) -> dict[str, ClassLabel]:
    """Parse a decisions document into a sha -> label map."""
    try:
        entries = doc["Transactions"]
    except (KeyError, TypeError):
        raise ValueError("decisions document lacks a Transactions list") from None
    decisions: dict[str, ClassLabel] = {}
    for i, entry in enumerate(entries):
        try:
            sha, final = entry["Sha"], entry["FinalClassification"]
        except (KeyError, TypeError):
            raise ValueError(f"Transactions[{i}] lacks Sha/FinalClassification") from None
        decisions[str(sha)] = ClassLabel.from_name(str(final))
    return decisions


def model_to_json(model: PnnModel) -> str:
    content = _model_content(model.schema_version, model.exemplars, model.sigma, model.priors)
    return json.dumps({"model_id": model.model_id, **content}, sort_keys=True)


def model_from_json(text: str) -> PnnModel:
    doc = json.loads(text)
    exemplars = {label: np.asarray(doc["exemplars"][label.wire_key], dtype=np.float64)
                 for label in CLASS_ORDER}
    priors = np.array([float(doc["priors"][label.wire_key]) for label in CLASS_ORDER])
    return PnnModel(
        schema_version=int(doc["schema_version"]),
        exemplars=exemplars,
        sigma=float(doc["sigma"]),
        priors=priors,
        model_id=doc["model_id"],
    )
