"""Command-line interface: batch counterpart of the HTTP service."""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from .counterfactual import CfConstraints, find_counterfactuals
from .errors import DataError, RiskscopeError
from .forest import ForestConfig, evaluate_auroc, load_model, save_model, train_forest
from .lime import LimeConfig, explain_lime
from .modelcard import CardConfig, build_model_card, render_html, render_markdown
from .schema import Dataset, default_schema, load_csv, load_schema, save_csv
from .shap import explain_shap_tree
from .similarity import SimilarityCriteria, cohort_summary
from .synth import default_generator_config, generate_synthetic_cohort


def _fail(exc: RiskscopeError) -> None:
    click.echo(json.dumps(exc.envelope()), err=True)
    sys.exit(1)


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except RiskscopeError as exc:
            _fail(exc)
        except OSError as exc:
            click.echo(
                json.dumps({"code": "io_error", "message": str(exc), "field": None}), err=True
            )
            sys.exit(1)

    return wrapper


def _load_schema(path: str | None):
    return default_schema() if path is None else load_schema(path)


def _load_data(path: str, schema, labeled: bool | None = None) -> Dataset:
    if labeled is None:
        import csv as _csv

        with Path(path).open(newline="", encoding="utf-8") as fh:
            header = next(_csv.reader(fh), [])
        labeled = all(o in header for o in schema.outcomes)
    return load_csv(path, schema, has_labels=labeled)


def _pick_record(dataset: Dataset, record_id: str | None, record_json: str | None):
    if (record_id is None) == (record_json is None):
        raise DataError("provide exactly one of --record-id or --record-json")
    if record_id is not None:
        for record in dataset.records:
            if record.id == record_id:
                return record
        raise DataError(f"unknown record id {record_id!r}", field="record-id")
    try:
        mapping = json.loads(record_json)
    except json.JSONDecodeError as exc:
        raise DataError(f"--record-json is not valid JSON: {exc}", field="record-json")
    if not isinstance(mapping, dict):
        raise DataError("--record-json must be an object of feature values", field="record-json")
    return dataset.schema.record_from_mapping(str(mapping.pop("id", "inline")), mapping)


def _emit(document: dict, as_json: bool, text_lines: list[str]) -> None:
    if as_json:
        click.echo(json.dumps(document, indent=2))
    else:
        for line in text_lines:
            click.echo(line)


@click.group()
def main():
    """Explainable surgical-risk models: train, explain, and serve."""


@main.command()
@click.option("--schema", "schema_path", type=click.Path(), default=None, help="Schema YAML; bundled default if omitted.")
@click.option("--n", "n_records", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--id-prefix", default="P", show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@handle_errors
def synth(schema_path, n_records, seed, id_prefix, out_path):
    """Generate a labeled synthetic cohort CSV."""
    schema = _load_schema(schema_path)
    config = default_generator_config(schema)
    dataset = generate_synthetic_cohort(schema, config, n_records, seed=seed, id_prefix=id_prefix)
    save_csv(dataset, out_path)
    click.echo(f"wrote {len(dataset)} records to {out_path}")


@main.command()
@click.option("--schema", "schema_path", type=click.Path(), default=None)
@click.option("--data", "data_path", type=click.Path(), required=True, help="Labeled cohort CSV.")
@click.option("--out", "out_path", type=click.Path(), required=True, help="Model artifact path.")
@click.option("--trees", type=int, default=300, show_default=True)
@click.option("--max-depth", type=int, default=16, show_default=True)
@click.option("--min-leaf", type=int, default=5, show_default=True)
@click.option("--features-per-split", type=float, default=None, help="Count (>1) or fraction (0,1]; default sqrt.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@handle_errors
def train(schema_path, data_path, out_path, trees, max_depth, min_leaf, features_per_split, seed, jobs):
    """Train a random forest on a labeled cohort and save the artifact."""
    schema = _load_schema(schema_path)
    dataset = _load_data(data_path, schema, labeled=True)
    fps = features_per_split
    if fps is not None and fps > 1:
        fps = int(fps)
    config = ForestConfig(
        n_trees=trees, max_depth=max_depth, min_leaf=min_leaf, features_per_split=fps
    )
    model = train_forest(dataset, config, seed=seed, n_jobs=jobs)
    save_model(model, out_path)
    click.echo(f"trained {trees} trees on {len(dataset)} records")
    click.echo(f"model fingerprint: {model.fingerprint()}")


@main.command()
@click.option("--model", "model_path", type=click.Path(), required=True)
@click.option("--data", "data_path", type=click.Path(), required=True)
@click.option("--json", "as_json", is_flag=True)
@handle_errors
def evaluate(model_path, data_path, as_json):
    """Report per-outcome AUROC on a labeled cohort."""
    model = load_model(model_path)
    dataset = _load_data(data_path, model.schema, labeled=True)
    curves = evaluate_auroc(model, dataset)
    document = {
        "model_fingerprint": model.fingerprint(),
        "n_records": len(dataset),
        "auroc": {name: curve.auroc for name, curve in curves.items()},
    }
    lines = [f"AUROC over {len(dataset)} records:"]
    for name, curve in curves.items():
        shown = "undefined (single class)" if curve.auroc is None else f"{curve.auroc:.4f}"
        lines.append(f"  {name}: {shown}")
    _emit(document, as_json, lines)


def _attribution_lines(attribution) -> list[str]:
    lines = [
        f"{attribution.method} explanation for outcome {attribution.outcome!r}",
        f"  prediction: {attribution.prediction:.4f}  base: {attribution.base_value:.4f}",
    ]
    for c in attribution.contributions:
        lines.append(f"  {c.value:+.4f}  {c.condition}")
    return lines


@main.command()
@click.argument("method", type=click.Choice(["lime", "shap"]))
@click.option("--model", "model_path", type=click.Path(), required=True)
@click.option("--data", "data_path", type=click.Path(), required=True, help="Reference cohort CSV.")
@click.option("--record-id", default=None)
@click.option("--record-json", default=None, help="Inline record as a JSON object.")
@click.option("--outcome", required=True)
@click.option("--top-k", type=int, default=10, show_default=True, help="LIME only.")
@click.option("--n-samples", type=int, default=5000, show_default=True, help="LIME only.")
@click.option("--seed", type=int, default=0, show_default=True, help="LIME only.")
@click.option("--json", "as_json", is_flag=True)
@handle_errors
def explain(method, model_path, data_path, record_id, record_json, outcome, top_k, n_samples, seed, as_json):
    """Explain one record's risk with LIME or SHAP."""
    model = load_model(model_path)
    dataset = _load_data(data_path, model.schema)
    record = _pick_record(dataset, record_id, record_json)
    if method == "lime":
        config = LimeConfig(n_samples=n_samples, top_k=top_k, seed=seed)
        attribution = explain_lime(model, record, outcome, config, dataset=dataset)
    else:
        attribution = explain_shap_tree(model, record, outcome)
    document = {
        "model_fingerprint": model.fingerprint(),
        "attribution": attribution.as_dict(),
    }
    _emit(document, as_json, _attribution_lines(attribution))


@main.command()
@click.option("--model", "model_path", type=click.Path(), required=True)
@click.option("--data", "data_path", type=click.Path(), required=True, help="Training cohort CSV (for bounds).")
@click.option("--record-id", default=None)
@click.option("--record-json", default=None)
@click.option("--outcome", required=True)
@click.option("--k", type=int, default=3, show_default=True)
@click.option("--threshold", type=float, default=0.5, show_default=True)
@click.option("--direction", type=click.Choice(["decrease", "increase"]), default="decrease", show_default=True)
@click.option("--budget", type=int, default=20000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--json", "as_json", is_flag=True)
@handle_errors
def counterfactual(model_path, data_path, record_id, record_json, outcome, k, threshold, direction, budget, seed, as_json):
    """Search for minimal lab changes that move a risk across a threshold."""
    model = load_model(model_path)
    dataset = _load_data(data_path, model.schema)
    record = _pick_record(dataset, record_id, record_json)
    constraints = CfConstraints.from_training(dataset, threshold=threshold, direction=direction)
    results = find_counterfactuals(
        model, record, outcome, constraints, k=k, budget=budget, seed=seed
    )
    document = {
        "model_fingerprint": model.fingerprint(),
        "outcome": outcome,
        "results": [r.as_dict() for r in results],
    }
    if not results:
        lines = ["no counterfactual found within budget"]
    else:
        lines = [f"{len(results)} suggestion(s) for outcome {outcome!r}:"]
        for i, result in enumerate(results, 1):
            lines.append(
                f"  [{i}] risk {result.original_risk:.4f} -> {result.new_risk:.4f} "
                f"({len(result.changes)} change(s))"
            )
            for change in result.changes:
                lines.append(
                    f"      {change.feature}: {change.raw_display} -> {change.new_display}"
                )
    _emit(document, as_json, lines)


@main.command()
@click.option("--model", "model_path", type=click.Path(), required=True)
@click.option("--data", "data_path", type=click.Path(), default=None, help="Labeled cohort; 70/30 in-order split.")
@click.option("--dev-data", type=click.Path(), default=None)
@click.option("--val-data", type=click.Path(), default=None)
@click.option("--sample", type=int, default=None, help="Importance sample size.")
@click.option("--seed", type=int, default=0, show_default=True, help="Importance sampling seed.")
@click.option("--out", "out_path", type=click.Path(), default=None, help=".md or .html by extension; stdout markdown if omitted.")
@click.option("--json", "as_json", is_flag=True)
@handle_errors
def card(model_path, data_path, dev_data, val_data, sample, seed, out_path, as_json):
    """Build the model card from development and validation cohorts."""
    model = load_model(model_path)
    if data_path is not None:
        if dev_data or val_data:
            raise DataError("use either --data or --dev-data/--val-data, not both")
        dataset = _load_data(data_path, model.schema, labeled=True)
        if len(dataset) < 2:
            raise DataError("need at least 2 records to split")
        split = max(1, min(len(dataset) - 1, int(len(dataset) * 0.7)))
        dev = dataset.subset(range(split))
        val = dataset.subset(range(split, len(dataset)))
    elif dev_data and val_data:
        dev = _load_data(dev_data, model.schema, labeled=True)
        val = _load_data(val_data, model.schema, labeled=True)
    else:
        raise DataError("provide --data or both --dev-data and --val-data")
    config = CardConfig(importance_sample=sample, importance_seed=seed)
    model_card = build_model_card(model, dev, val, config)
    if as_json:
        click.echo(json.dumps(model_card.as_dict(), indent=2))
        return
    if out_path is None:
        click.echo(render_markdown(model_card))
        return
    text = render_html(model_card) if out_path.endswith(".html") else render_markdown(model_card)
    Path(out_path).write_text(text, encoding="utf-8")
    click.echo(f"wrote model card to {out_path}")


@main.command()
@click.option("--model", "model_path", type=click.Path(), required=True)
@click.option("--data", "data_path", type=click.Path(), required=True)
@click.option("--record-id", default=None)
@click.option("--record-json", default=None)
@click.option("--age-tolerance", type=float, default=5.0, show_default=True)
@click.option("--comorbidity-threshold", type=float, default=0.6, show_default=True)
@click.option("--exact-match", default="race,sex,surgery_type", show_default=True, help="Comma-separated feature names.")
@click.option("--json", "as_json", is_flag=True)
@handle_errors
def similar(model_path, data_path, record_id, record_json, age_tolerance, comorbidity_threshold, exact_match, as_json):
    """Find similar patients in a cohort and summarize their risks."""
    model = load_model(model_path)
    dataset = _load_data(data_path, model.schema)
    record = _pick_record(dataset, record_id, record_json)
    names = tuple(n.strip() for n in exact_match.split(",") if n.strip())
    criteria = SimilarityCriteria(
        age_tolerance=age_tolerance,
        exact_match=names,
        comorbidity_threshold=comorbidity_threshold,
    )
    summary = cohort_summary(model, dataset, record, criteria)
    document = {"model_fingerprint": model.fingerprint(), "summary": summary.as_dict()}
    lines = [f"{summary.count} similar patient(s) found"]
    if summary.count:
        lines.append("  outcome: cohort mean risk | index risk" + (" | observed" if summary.observed_prevalence else ""))
        for outcome, mean in (summary.mean_predicted or {}).items():
            row = f"  {outcome}: {mean:.4f} | {summary.index_risks[outcome]:.4f}"
            if summary.observed_prevalence:
                row += f" | {summary.observed_prevalence[outcome]:.4f}"
            lines.append(row)
    _emit(document, as_json, lines)


@main.command()
@click.option("--model", "model_path", type=click.Path(), required=True)
@click.option("--data", "data_path", type=click.Path(), required=True, help="Reference cohort CSV.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--workers", "max_heavy", type=int, default=2, show_default=True, help="Concurrent heavy explanations.")
@handle_errors
def serve(model_path, data_path, host, port, max_heavy):
    """Serve the HTTP JSON API over a model and reference cohort."""
    import uvicorn

    from .service import create_app

    app = create_app(model_path=model_path, dataset_path=data_path, max_heavy=max_heavy)
    click.echo(f"model fingerprint: {app.state.engine.model.fingerprint()}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
