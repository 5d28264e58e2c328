"""Pipeline orchestration, file persistence, and the HTTP API.

The pipeline is ingest -> fit schema -> featurize -> train -> classify ->
evaluate -> evidence store, with every stage's artifact persisted as a plain
file under the data directory. The HTTP layer serves immutable session
snapshots; a retrain builds a complete new snapshot and swaps it in one
assignment, so no reader ever sees a half-updated model/store pair.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import random
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import evidence, explain, featurize, ingest, metrics, pnn
from .labels import CLASS_ORDER, ClassLabel

logger = logging.getLogger(__name__)

DATA_DIR_ENV = "EVIDENCE_DATA_DIR"

RAW_FILE = "raw.jsonl"
SPLIT_FILE = "split.json"
SCHEMA_FILE = "schema.json"
FEATURES_FILE = "features.jsonl"
MODEL_FILE = "model.json"
EVIDENCE_FILE = "evidence.jsonl"
REPORT_FILE = "report.json"
IMPORTANCE_FILE = "importance.json"


@dataclass(frozen=True)
class ServiceConfig:
    data_dir: Path = Path("data")
    listen_address: str = "127.0.0.1:8000"
    text_dim: int = featurize.DEFAULT_TEXT_DIM
    sigma: float | None = None  # None selects by grid search
    prior_mode: str = "empirical"
    seed: int = 42
    eval_fraction: float = 0.2
    schema_version: int = 1


def resolve_data_dir(explicit: Path | str | None = None) -> Path:
    """The data directory, with the environment override taking precedence."""
    env = os.environ.get(DATA_DIR_ENV)
    if env:
        return Path(env)
    return Path(explicit) if explicit else Path("data")


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"pipeline stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


Dataset = list[tuple[ingest.EnrichedTransaction, ClassLabel | None]]
LabeledPairs = list[tuple[ingest.EnrichedTransaction, ClassLabel]]


@dataclass(frozen=True)
class SplitSpec:
    seed: int
    eval_fraction: float
    train: tuple[str, ...]
    eval: tuple[str, ...]


@dataclass(frozen=True)
class SessionState:
    schema: featurize.FeatureSchema
    model: pnn.PnnModel
    store: evidence.EvidenceStore
    split: SplitSpec
    importance: explain.ImportanceReport | None = None

    @property
    def model_id(self) -> str:
        return self.model.model_id


def stratified_split(labeled: LabeledPairs, eval_fraction: float,
                     seed: int) -> tuple[LabeledPairs, LabeledPairs]:
    """Per-class seeded split. Rows are sorted by sha before shuffling, so the
    split depends only on content, not input order. Every class keeps at
    least one training exemplar."""
    if not 0.0 <= eval_fraction < 1.0:
        raise ValueError(f"eval_fraction must be in [0, 1), got {eval_fraction}")
    train: LabeledPairs = []
    held: LabeledPairs = []
    for label in CLASS_ORDER:
        items = sorted((pair for pair in labeled if pair[1] == label),
                       key=lambda pair: pair[0].raw.sha)
        if not items:
            continue
        rng = random.Random(f"{seed}:{label.value}")
        rng.shuffle(items)
        n_eval = min(round(len(items) * eval_fraction), len(items) - 1)
        held.extend(items[:n_eval])
        train.extend(items[n_eval:])
    train.sort(key=lambda pair: pair[0].raw.sha)
    held.sort(key=lambda pair: pair[0].raw.sha)
    return train, held


def _stage(name: str):
    class _StageGuard:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and not isinstance(exc, PipelineError):
                raise PipelineError(name, exc) from exc
            return False

    return _StageGuard()


def build_state(dataset: Dataset, config: ServiceConfig) -> SessionState:
    """Run the in-memory pipeline over an ingested dataset.

    Training uses the stratified train split; the evidence store holds the
    held-out records (plus any unlabeled ones), so its report measures
    generalization rather than memorization.
    """
    with _stage("split"):
        labeled = [(tx, label) for tx, label in dataset if label is not None]
        unlabeled = [tx for tx, label in dataset if label is None]
        if not labeled:
            raise ValueError("no labeled transactions to train on")
        train_pairs, eval_pairs = stratified_split(labeled, config.eval_fraction, config.seed)

    with _stage("fit_schema"):
        schema = featurize.fit_schema([tx for tx, _ in train_pairs],
                                      text_dim=config.text_dim,
                                      version=config.schema_version)

    with _stage("featurize"):
        vectors = {tx.raw.sha: featurize.build_feature_vector(tx, schema)
                   for tx, _ in dataset}

    with _stage("train"):
        train_fvs = [(vectors[tx.raw.sha], label) for tx, label in train_pairs]
        sigma = config.sigma
        if sigma is None:
            fit_pairs, val_pairs = stratified_split(train_pairs, 0.25, config.seed + 1)
            fit_fvs = [(vectors[tx.raw.sha], label) for tx, label in fit_pairs]
            val_fvs = [(vectors[tx.raw.sha], label) for tx, label in val_pairs]
            sigma, scores = pnn.select_sigma(fit_fvs, val_fvs, prior_mode=config.prior_mode)
            logger.info("sigma grid search: %s -> %s",
                        {s: round(v, 4) for s, v in scores.items()}, sigma)
        model = pnn.train(train_fvs, sigma=sigma, prior_mode=config.prior_mode)

    with _stage("classify"):
        store_txs = [tx for tx, _ in eval_pairs] + unlabeled
        store_fvs = [vectors[tx.raw.sha] for tx in store_txs]
        predictions = pnn.predict_batch(model, store_fvs)

    with _stage("evidence"):
        actuals = {tx.raw.sha: label for tx, label in eval_pairs}
        store = evidence.load_join(store_txs, store_fvs, predictions, actuals)

    split = SplitSpec(
        seed=config.seed,
        eval_fraction=config.eval_fraction,
        train=tuple(tx.raw.sha for tx, _ in train_pairs),
        eval=tuple(tx.raw.sha for tx, _ in eval_pairs),
    )
    return SessionState(schema=schema, model=model, store=store, split=split)


# --------------------------------------------------------------------------
# Persistence
# --------------------------------------------------------------------------

def write_files(data_dir: Path, contents: Mapping[str, str]):
    """Write every file through a temp name, then rename all. On any failure
    the temps are removed and nothing is replaced, so a crashed run never
    leaves a torn artifact set."""
    data_dir.mkdir(parents=True, exist_ok=True)
    temps: list[tuple[Path, Path]] = []
    try:
        for name, text in contents.items():
            final = data_dir / name
            temp = data_dir / f".{name}.tmp"
            temp.write_text(text, encoding="utf-8")
            temps.append((temp, final))
        for temp, final in temps:
            os.replace(temp, final)
    except BaseException:
        for temp, _ in temps:
            temp.unlink(missing_ok=True)
        raise


def split_to_json(split: SplitSpec) -> str:
    return json.dumps({
        "seed": split.seed,
        "eval_fraction": split.eval_fraction,
        "train": list(split.train),
        "eval": list(split.eval),
    }, indent=2)


def split_from_json(text: str) -> SplitSpec:
    doc = json.loads(text)
    return SplitSpec(
        seed=int(doc["seed"]),
        eval_fraction=float(doc["eval_fraction"]),
        train=tuple(doc["train"]),
        eval=tuple(doc["eval"]),
    )


def write_raw(data_dir: Path, dataset: Dataset):
    write_files(data_dir, {RAW_FILE: ingest.dataset_to_jsonl(dataset)})


def read_raw(data_dir: Path) -> Dataset:
    path = data_dir / RAW_FILE
    if not path.exists():
        return []
    return ingest.dataset_from_jsonl(path.read_text(encoding="utf-8"))


def persist_state(data_dir: Path, dataset: Dataset, state: SessionState):
    schema = state.schema
    vectors = [featurize.build_feature_vector(tx, schema) for tx, _ in dataset]
    contents = {
        RAW_FILE: ingest.dataset_to_jsonl(dataset),
        SPLIT_FILE: split_to_json(state.split),
        SCHEMA_FILE: featurize.schema_to_json(schema),
        FEATURES_FILE: featurize.vectors_to_jsonl(vectors),
        MODEL_FILE: pnn.model_to_json(state.model),
        EVIDENCE_FILE: evidence.store_to_jsonl(state.store),
    }
    if state.store.report is not None:
        contents[REPORT_FILE] = metrics.report_to_json(state.store.report)
    if state.importance is not None:
        contents[IMPORTANCE_FILE] = explain.importance_to_json(state.importance)
    write_files(data_dir, contents)


def run_pipeline(dataset: Dataset, config: ServiceConfig) -> SessionState:
    """Full pipeline plus persistence of every stage artifact."""
    state = build_state(dataset, config)
    with _stage("persist"):
        persist_state(config.data_dir, dataset, state)
    return state


def load_state(data_dir: Path) -> SessionState | None:
    """Rebuild a session from persisted artifacts; None when incomplete."""
    needed = [SCHEMA_FILE, MODEL_FILE, EVIDENCE_FILE, SPLIT_FILE]
    if not all((data_dir / name).exists() for name in needed):
        return None
    schema = featurize.schema_from_json((data_dir / SCHEMA_FILE).read_text(encoding="utf-8"))
    model = pnn.model_from_json((data_dir / MODEL_FILE).read_text(encoding="utf-8"))
    store = evidence.store_from_jsonl((data_dir / EVIDENCE_FILE).read_text(encoding="utf-8"))
    split = split_from_json((data_dir / SPLIT_FILE).read_text(encoding="utf-8"))
    importance = None
    importance_path = data_dir / IMPORTANCE_FILE
    if importance_path.exists():
        candidate = explain.importance_from_json(importance_path.read_text(encoding="utf-8"))
        if candidate.model_id == model.model_id:
            importance = candidate
        else:
            logger.warning("ignoring stale importance report for model %s", candidate.model_id)
    return SessionState(schema=schema, model=model, store=store, split=split,
                        importance=importance)


# --------------------------------------------------------------------------
# Service facade
# --------------------------------------------------------------------------

class WorkbenchService:
    """Owns the active session snapshot and the single-writer gate.

    Reads take `self.state` once and work on that immutable snapshot; writes
    (ingest, retrain) serialize through a lock and end with one snapshot
    assignment.
    """

    def __init__(self, config: ServiceConfig, state: SessionState | None = None):
        self.config = dataclasses.replace(config, data_dir=resolve_data_dir(config.data_dir))
        self._state = state
        self._write_lock = threading.Lock()

    @property
    def state(self) -> SessionState | None:
        return self._state

    def load_persisted(self) -> SessionState | None:
        with self._write_lock:
            self._state = load_state(self.config.data_dir) or self._state
            return self._state

    def ingest_document(self, payload: bytes | str) -> dict:
        """Parse an application document and merge its transactions into the
        raw store. Does not retrain."""
        app = ingest.parse_application(payload)
        contexts = ingest.application_to_contexts(app)
        incoming: Dataset = [(ingest.without_enrichment(ctx), None) for ctx in contexts]
        with self._write_lock:
            existing = read_raw(self.config.data_dir)
            merged = ingest.merge_batch(existing, incoming)
            write_raw(self.config.data_dir, merged)
        return {
            "application_id": app.application_id,
            "ingested": len(merged) - len(existing),
            "total": len(merged),
        }

    def retrain(self, sigma: float | None = None, prior_mode: str | None = None) -> SessionState:
        """Rebuild everything from the persisted raw data and swap the
        snapshot atomically."""
        with self._write_lock:
            dataset = read_raw(self.config.data_dir)
            if not dataset:
                raise PipelineError("split", ValueError("no ingested transactions"))
            version = self._state.schema.version + 1 if self._state else self.config.schema_version
            config = dataclasses.replace(
                self.config,
                sigma=self.config.sigma if sigma is None else sigma,
                prior_mode=prior_mode or self.config.prior_mode,
                schema_version=version,
            )
            state = build_state(dataset, config)
            with _stage("persist"):
                persist_state(config.data_dir, dataset, state)
            self._state = state
            return state

    def classify_document(self, payload: bytes | str) -> dict:
        """Classify every transaction in an application document, reusing
        cached predictions where the sha and model still match."""
        state = self._state
        if state is None:
            raise ValueError("no trained model; train first")
        app = ingest.parse_application(payload)
        contexts = ingest.application_to_contexts(app)
        predictions: dict[str, pnn.Prediction] = {}
        fresh: list[ingest.TransactionContext] = []
        for ctx in contexts:
            cached = state.store.cached_prediction(ctx.raw.sha, state.model.model_id)
            if cached is not None:
                predictions[ctx.raw.sha] = cached
            else:
                fresh.append(ctx)
        if fresh:
            vectors = [featurize.build_feature_vector(ingest.without_enrichment(ctx), state.schema)
                       for ctx in fresh]
            for prediction in pnn.predict_batch(state.model, vectors):
                predictions[prediction.sha] = prediction
        ordered = [predictions[ctx.raw.sha] for ctx in contexts]
        return {
            "Decisions": pnn.decisions_to_wire(ordered),
            "Probabilities": pnn.probabilities_to_wire(ordered),
        }


# --------------------------------------------------------------------------
# HTTP API
# --------------------------------------------------------------------------

class TrainRequest(BaseModel):
    sigma: float | None = None
    prior_mode: str | None = None


class WhatIfRequest(BaseModel):
    sha: str
    overrides: dict = {}


def _meta(state: SessionState | None) -> dict:
    return {
        "model_id": state.model.model_id if state else None,
        "schema_version": state.schema.version if state else None,
    }


def _record_view(record: evidence.EvidenceRecord) -> dict:
    tx = record.tx
    return {
        "sha": record.sha,
        "date": tx.raw.date.strftime("%Y-%m-%dT%H:%M:%S"),
        "amount": tx.raw.amount,
        "description": tx.raw.description,
        "customer_id": tx.customer_id,
        "bank": tx.bank,
        "industry": tx.industry,
        "enrichment_tags": {k: list(v) for k, v in sorted(tx.enrichment_tags.items())},
        "predicted": record.prediction.final.value,
        "actual": record.actual.value if record.actual else None,
        "correct": record.correct,
        "probabilities": record.prediction.as_wire(),
    }


def _parse_class(name: str) -> ClassLabel:
    try:
        return ClassLabel.from_name(name)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


def create_app(service: WorkbenchService) -> FastAPI:
    app = FastAPI(title="transaction evidence workbench")
    # the dashboard is served statically, usually from another origin
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    def require_state() -> SessionState:
        state = service.state
        if state is None:
            raise HTTPException(status_code=409, detail="no trained session; POST /train first")
        return state

    @app.post("/ingest")
    async def ingest_endpoint(request: Request):
        payload = await request.body()
        try:
            result = service.ingest_document(payload)
        except ingest.ShaConflictError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except ingest.IngestError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {**result, **_meta(service.state)}

    @app.post("/train")
    def train_endpoint(body: TrainRequest):
        try:
            state = service.retrain(sigma=body.sigma, prior_mode=body.prior_mode)
        except PipelineError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        report = state.store.report
        return {
            "trained": state.model.n_exemplars,
            "sigma": state.model.sigma,
            "overall_accuracy": report.overall_accuracy if report else None,
            **_meta(state),
        }

    @app.post("/classify")
    async def classify_endpoint(request: Request):
        state = require_state()
        payload = await request.body()
        try:
            wire = service.classify_document(payload)
        except ingest.IngestError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return {**wire, **_meta(state)}

    @app.get("/metrics")
    def metrics_endpoint(class_name: str | None = Query(default=None, alias="class")):
        state = require_state()
        report = state.store.report
        if report is None:
            raise HTTPException(status_code=404, detail="no evaluation report: store has no labels")
        payload = metrics.report_to_dict(report)
        payload["segregation"] = state.store.segregation
        if class_name:
            label = _parse_class(class_name)
            payload = {"class": metrics.class_metrics_to_dict(report.for_class(label))}
        return {**payload, **_meta(state)}

    @app.get("/transactions")
    def transactions_endpoint(class_name: str | None = Query(default=None, alias="class"),
                              correct: str | None = None):
        state = require_state()
        if not class_name:
            raise HTTPException(status_code=400, detail="query parameter class is required")
        label = _parse_class(class_name)
        correctness = None
        if correct is not None:
            if correct.lower() not in ("true", "false"):
                raise HTTPException(status_code=400, detail="correct must be true or false")
            correctness = "correct" if correct.lower() == "true" else "incorrect"
        records, class_metrics = state.store.filter_by_classification(label, correctness)
        return {
            "class": label.value,
            "correct": None if correctness is None else correctness == "correct",
            "records": [_record_view(r) for r in records],
            "metrics": metrics.class_metrics_to_dict(class_metrics) if class_metrics else None,
            **_meta(state),
        }

    @app.get("/search")
    def search_endpoint(term: str = "", match: str = "contains"):
        state = require_state()
        try:
            hits = state.store.search(term, match)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {
            "term": term,
            "match": match,
            "correct": [_record_view(r) for r in hits["correct"]],
            "incorrect": [_record_view(r) for r in hits["incorrect"]],
            **_meta(state),
        }

    @app.get("/neighbors")
    def neighbors_endpoint(sha: str = "", groups: str = "", k: int = 5):
        state = require_state()
        selected = [g for g in groups.split(",") if g] or None
        try:
            found = state.store.neighbors(sha, selected, k)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc.args[0])) from exc
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {
            "sha": sha,
            "groups": selected or list(featurize.FEATURE_GROUPS),
            "neighbors": [
                {**_record_view(record), "distance": distance}
                for record, distance in found
            ],
            **_meta(state),
        }

    @app.get("/visualization")
    def visualization_endpoint(class_name: str | None = Query(default=None, alias="class"),
                               axis: str | None = None):
        state = require_state()
        if not class_name or not axis:
            raise HTTPException(status_code=400,
                                detail="query parameters class and axis are required")
        label = _parse_class(class_name)
        try:
            points = state.store.visualization_data(label, axis)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {
            "focus_class": label.value,
            "axis": axis,
            "points": [
                {
                    "sha": point.sha,
                    "x": point.x,
                    "outcome": point.outcome,
                    "probability_of_focus": point.probability_of_focus,
                }
                for point in points
            ],
            **_meta(state),
        }

    @app.post("/whatif")
    def whatif_endpoint(body: WhatIfRequest):
        state = require_state()
        try:
            record = state.store.get(body.sha)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc.args[0])) from exc
        try:
            result = explain.what_if(state.model, state.schema, record.tx, body.overrides)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {
            "sha": result.sha,
            "overrides": result.overrides,
            "baseline": {
                "final": result.baseline.final.value,
                "probabilities": result.baseline.as_wire(),
            },
            "modified": {
                "final": result.modified.final.value,
                "probabilities": result.modified.as_wire(),
            },
            "delta": {label.wire_key: result.delta[label] for label in CLASS_ORDER},
            **_meta(state),
        }

    @app.get("/importance")
    def importance_endpoint():
        state = require_state()
        if state.importance is None:
            raise HTTPException(status_code=404,
                                detail="no importance report for the active model; "
                                       "run the importance command")
        return {**explain.importance_to_dict(state.importance), **_meta(state)}

    return app


def serve(config: ServiceConfig, state: SessionState | None = None):
    """Run the API under uvicorn until interrupted."""
    import uvicorn

    service = WorkbenchService(config, state=state)
    if service.state is None:
        service.load_persisted()
    if service.state is None:
        logger.warning("serving without a trained session; only /ingest and /train will work")
    host, _, port = config.listen_address.rpartition(":")
    uvicorn.run(create_app(service), host=host or "127.0.0.1", port=int(port))
