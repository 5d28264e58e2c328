"""Command-line entry points: one subcommand per pipeline stage plus serve.

Stages communicate through plain files in the data directory, so each command
can be run, inspected, and rerun independently. The EVIDENCE_DATA_DIR
environment variable overrides --data-dir everywhere.
"""

from __future__ import annotations

import json
from pathlib import Path

import click

from . import evidence, explain, featurize, ingest, metrics, pnn, service
from .labels import CLASS_ORDER


def _data_dir(option_value: Path | None) -> Path:
    return service.resolve_data_dir(option_value)


def _read(path: Path, hint: str) -> str:
    if not path.exists():
        raise click.ClickException(f"{path} not found; {hint}")
    return path.read_text(encoding="utf-8")


data_dir_option = click.option(
    "--data-dir", type=click.Path(path_type=Path), default=None,
    help=f"Artifact directory (default ./data, env {service.DATA_DIR_ENV} wins).")


@click.group()
def main():
    """Evidence workbench for the credit transaction classifier."""


@main.command("ingest")
@click.argument("file", type=click.Path(exists=True, path_type=Path))
@click.option("--labels", type=click.Path(exists=True, path_type=Path), default=None,
              help="Decisions document assigning a FinalClassification per Sha.")
@click.option("--tags", type=click.Path(exists=True, path_type=Path), default=None,
              help="JSON lookup table for the mock enrichment provider.")
@data_dir_option
def ingest_cmd(file: Path, labels: Path | None, tags: Path | None, data_dir: Path | None):
    """Parse an application document (.json) or flat export (.csv) and merge
    its transactions into the raw store."""
    directory = _data_dir(data_dir)
    payload = file.read_bytes()
    try:
        if file.suffix.lower() == ".csv":
            contexts = ingest.parse_raw_csv(payload)
        else:
            contexts = ingest.application_to_contexts(ingest.parse_application(payload))

        label_map = {}
        if labels:
            label_map = pnn.decisions_from_wire(json.loads(labels.read_text(encoding="utf-8")))
            unknown = sorted(set(label_map) - {ctx.raw.sha for ctx in contexts})
            if unknown:
                raise click.ClickException(
                    f"labels reference sha(s) not in {file.name}: {', '.join(unknown)}")

        provider = ingest.MockProvider.from_file(tags) if tags else None
        incoming = [
            (ingest.enrich(ctx, provider) if provider else ingest.without_enrichment(ctx),
             label_map.get(ctx.raw.sha))
            for ctx in contexts
        ]
        existing = service.read_raw(directory)
        merged = ingest.merge_batch(existing, incoming)
    except (ingest.IngestError, ValueError) as exc:
        raise click.ClickException(str(exc)) from exc
    service.write_raw(directory, merged)
    click.echo(f"ingested {len(merged) - len(existing)} new transactions "
               f"({len(merged)} total) into {directory}")


@main.command("generate")
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--n", type=int, default=1000, show_default=True,
              help="Number of transactions.")
@click.option("--customers", type=int, default=200, show_default=True)
@data_dir_option
def generate_cmd(seed: int, n: int, customers: int, data_dir: Path | None):
    """Write a fresh labeled synthetic dataset (replaces the raw store)."""
    directory = _data_dir(data_dir)
    try:
        dataset = ingest.generate_synthetic(ingest.SyntheticConfig(
            seed=seed, n_transactions=n, n_customers=customers))
    except ingest.IngestError as exc:
        raise click.ClickException(str(exc)) from exc
    service.write_raw(directory, dataset)
    counts = {label.value: sum(1 for _, l in dataset if l == label) for label in CLASS_ORDER}
    click.echo(f"generated {len(dataset)} transactions (seed {seed}) into {directory}")
    for name, count in counts.items():
        click.echo(f"  {name:15s} {count}")


@main.command("featurize")
@click.option("--text-dim", type=int, default=featurize.DEFAULT_TEXT_DIM, show_default=True)
@click.option("--seed", type=int, default=42, show_default=True,
              help="Seed for the train/eval split.")
@click.option("--eval-fraction", type=float, default=0.2, show_default=True)
@data_dir_option
def featurize_cmd(text_dim: int, seed: int, eval_fraction: float, data_dir: Path | None):
    """Fit the feature schema on the training split and vectorize everything.

    Refitting bumps the schema version."""
    directory = _data_dir(data_dir)
    dataset = service.read_raw(directory)
    if not dataset:
        raise click.ClickException(f"no raw data under {directory}; run ingest or generate first")

    version = 1
    schema_path = directory / service.SCHEMA_FILE
    if schema_path.exists():
        version = featurize.schema_from_json(
            schema_path.read_text(encoding="utf-8")).version + 1

    labeled = [(tx, label) for tx, label in dataset if label is not None]
    try:
        train_pairs, eval_pairs = service.stratified_split(labeled, eval_fraction, seed)
        fit_on = [tx for tx, _ in train_pairs] if train_pairs else [tx for tx, _ in dataset]
        schema = featurize.fit_schema(fit_on, text_dim=text_dim, version=version)
        vectors = [featurize.build_feature_vector(tx, schema) for tx, _ in dataset]
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc

    split = service.SplitSpec(
        seed=seed, eval_fraction=eval_fraction,
        train=tuple(tx.raw.sha for tx, _ in train_pairs),
        eval=tuple(tx.raw.sha for tx, _ in eval_pairs),
    )
    service.write_files(directory, {
        service.SCHEMA_FILE: featurize.schema_to_json(schema),
        service.FEATURES_FILE: featurize.vectors_to_jsonl(vectors),
        service.SPLIT_FILE: service.split_to_json(split),
    })
    click.echo(f"schema v{schema.version}: {schema.length} dimensions "
               f"({len(schema.bank_vocab)} banks, {len(schema.industry_vocab)} industries)")
    click.echo(f"wrote {len(vectors)} feature vectors; "
               f"split train={len(split.train)} eval={len(split.eval)}")


def _load_features(directory: Path) -> dict[str, featurize.FeatureVector]:
    text = _read(directory / service.FEATURES_FILE, "run featurize first")
    return {fv.sha: fv for fv in featurize.vectors_from_jsonl(text)}


def _load_split(directory: Path) -> service.SplitSpec:
    return service.split_from_json(_read(directory / service.SPLIT_FILE, "run featurize first"))


@main.command("train")
@click.option("--sigma", type=float, default=None,
              help="Kernel width; omit to grid-search on a validation split.")
@click.option("--priors", type=click.Choice(list(pnn.PRIOR_MODES)), default="empirical",
              show_default=True)
@data_dir_option
def train_cmd(sigma: float | None, priors: str, data_dir: Path | None):
    """Train the classifier on the training split."""
    directory = _data_dir(data_dir)
    dataset = service.read_raw(directory)
    labels = {tx.raw.sha: label for tx, label in dataset if label is not None}
    txs = {tx.raw.sha: tx for tx, _ in dataset}
    vectors = _load_features(directory)
    split = _load_split(directory)

    try:
        train_fvs = [(vectors[sha], labels[sha]) for sha in split.train]
        if sigma is None:
            fit_pairs, val_pairs = service.stratified_split(
                [(txs[sha], labels[sha]) for sha in split.train], 0.25, split.seed + 1)
            sigma, scores = pnn.select_sigma(
                [(vectors[tx.raw.sha], label) for tx, label in fit_pairs],
                [(vectors[tx.raw.sha], label) for tx, label in val_pairs],
                prior_mode=priors)
            for value, score in scores.items():
                click.echo(f"  sigma {value:<5g} macro-F1 {score:.4f}")
        model = pnn.train(train_fvs, sigma=sigma, prior_mode=priors)
    except (KeyError, ValueError) as exc:
        raise click.ClickException(f"training failed: {exc}") from exc

    service.write_files(directory, {service.MODEL_FILE: pnn.model_to_json(model)})
    click.echo(f"trained {model.model_id} on {model.n_exemplars} exemplars "
               f"(sigma {model.sigma:g}, priors {priors})")


@main.command("evaluate")
@data_dir_option
def evaluate_cmd(data_dir: Path | None):
    """Score the held-out split and rebuild the evidence store."""
    directory = _data_dir(data_dir)
    dataset = service.read_raw(directory)
    txs = {tx.raw.sha: tx for tx, _ in dataset}
    labels = {tx.raw.sha: label for tx, label in dataset if label is not None}
    vectors = _load_features(directory)
    split = _load_split(directory)
    model = pnn.model_from_json(_read(directory / service.MODEL_FILE, "run train first"))

    try:
        store_txs = [txs[sha] for sha in split.eval]
        store_txs += [tx for tx, label in dataset if label is None]
        store_fvs = [vectors[tx.raw.sha] for tx in store_txs]
        predictions = pnn.predict_batch(model, store_fvs)
        actuals = {sha: labels[sha] for sha in split.eval}
        store = evidence.load_join(store_txs, store_fvs, predictions, actuals)
    except (KeyError, ValueError) as exc:
        raise click.ClickException(f"evaluation failed: {exc}") from exc

    contents = {service.EVIDENCE_FILE: evidence.store_to_jsonl(store)}
    report = store.report
    if report is not None:
        contents[service.REPORT_FILE] = metrics.report_to_json(report)
    service.write_files(directory, contents)

    click.echo(f"evidence store: {len(store)} records")
    if report is None:
        click.echo("no labeled records held out; no evaluation report")
        return
    click.echo(f"overall accuracy {report.overall_accuracy:.4f}   "
               f"cohen kappa {report.cohen_kappa:.4f}")
    for c in report.classes:
        click.echo(f"  {c.label.value:15s} precision {c.precision:.4f}  "
                   f"recall {c.recall:.4f}  f {c.f_measure:.4f}  support {c.support}")


@main.command("importance")
@click.option("--repeats", type=int, default=explain.DEFAULT_REPEATS, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--metric", type=click.Choice(list(explain.IMPORTANCE_METRICS)),
              default="macro_f1", show_default=True)
@data_dir_option
def importance_cmd(repeats: int, seed: int, metric: str, data_dir: Path | None):
    """Permutation importance per feature group over the evidence store."""
    directory = _data_dir(data_dir)
    model = pnn.model_from_json(_read(directory / service.MODEL_FILE, "run train first"))
    store = evidence.store_from_jsonl(
        _read(directory / service.EVIDENCE_FILE, "run evaluate first"))
    pairs = [(r.features, r.actual) for r in store.records if r.actual is not None]
    try:
        report = explain.permutation_importance(model, pairs, metric=metric,
                                                repeats=repeats, seed=seed)
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc
    service.write_files(directory, {service.IMPORTANCE_FILE: explain.importance_to_json(report)})
    click.echo(f"baseline {report.metric} {report.baseline:.4f} (model {report.model_id})")
    for group in sorted(report.groups, key=lambda g: -g.mean_drop):
        click.echo(f"  {group.group:10s} drop {group.mean_drop:+.4f} "
                   f"(std {group.std_drop:.4f}, {group.repeats} repeats)")


@main.command("serve")
@click.option("--listen", default="127.0.0.1:8000", show_default=True,
              help="host:port to bind.")
@data_dir_option
def serve_cmd(listen: str, data_dir: Path | None):
    """Serve the HTTP API over the persisted session."""
    directory = _data_dir(data_dir)
    config = service.ServiceConfig(data_dir=directory, listen_address=listen)
    service.serve(config)


if __name__ == "__main__":
    main()
