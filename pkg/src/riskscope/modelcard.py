"""Model cards: the bundle that answers "how does this model work".

A card collects intended-use text, cohort statistics for the development
and validation splits, per-outcome prevalence and AUROC, and global
feature importance overall and across configured subgroup pairs. Given
the same model, datasets, and config the card is identical except for
its generation timestamp.
"""

from __future__ import annotations

import datetime as _dt
import html as _html
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, SchemaError
from .forest import AurocCurve, RandomForest, evaluate_auroc
from .importance import Grouping, default_groupings, rank_features, sample_indices, shap_abs_matrix
from .schema import CohortSchema, Dataset


@dataclass(frozen=True)
class CardText:
    overview: str
    data_source: str
    intended_users: tuple[str, ...]
    use_cases: tuple[str, ...]
    limitations: tuple[str, ...]

    def as_dict(self) -> dict:
        return {
            "overview": self.overview,
            "data_source": self.data_source,
            "intended_users": list(self.intended_users),
            "use_cases": list(self.use_cases),
            "limitations": list(self.limitations),
        }


DEFAULT_CARD_TEXT = CardText(
    overview=(
        "Random-forest risk model that scores a surgical encounter for each "
        "configured postoperative complication. Every probability comes with "
        "local explanations (LIME and SHAP), counterfactual suggestions over "
        "modifiable laboratory values, and similar-patient context."
    ),
    data_source=(
        "Synthetic cohorts drawn from a declared generator over the bundled "
        "feature schema. No real patient data is included; swap in an "
        "institution's own extract by conforming to the schema."
    ),
    intended_users=(
        "Clinical teams reviewing individual risk estimates before surgery",
        "Machine learning practitioners auditing model behavior",
    ),
    use_cases=(
        "Screening an encounter for elevated complication risk",
        "Exploring which feature changes would lower a predicted risk",
        "Comparing a patient against historically similar encounters",
    ),
    limitations=(
        "Trained on synthetic data unless retrained; absolute risks are illustrative.",
        "Probabilities are uncalibrated ensemble vote shares.",
        "Counterfactual suggestions are associations, not treatment advice.",
    ),
)


@dataclass(frozen=True)
class CardConfig:
    groupings: tuple[Grouping, ...] | None = None  # None resolves to the schema defaults
    importance_sample: int | None = None           # None resolves to min(2000, n)
    importance_seed: int = 0
    text: CardText = DEFAULT_CARD_TEXT

    def resolve_groupings(self, schema: CohortSchema) -> tuple[Grouping, ...]:
        return default_groupings(schema) if self.groupings is None else self.groupings


@dataclass(frozen=True)
class CohortTable:
    """Summary statistics for one dataset split."""

    split: str
    n_patients: int
    n_encounters: int
    age_mean: float | None
    age_sd: float | None
    sex_counts: dict[str, int] | None
    prevalence: dict[str, float]

    def as_dict(self) -> dict:
        return {
            "split": self.split,
            "n_patients": self.n_patients,
            "n_encounters": self.n_encounters,
            "age_mean": self.age_mean,
            "age_sd": self.age_sd,
            "sex_counts": self.sex_counts,
            "prevalence": self.prevalence,
        }


def cohort_table(schema: CohortSchema, dataset: Dataset, split: str) -> CohortTable:
    if not dataset.labeled:
        raise DataError(f"{split} dataset must be labeled")
    if len(dataset) == 0:
        raise DataError(f"{split} dataset is empty")
    age_mean = age_sd = None
    if schema.has_feature("age"):
        ages = dataset.numeric_column("age")
        ages = ages[~np.isnan(ages)]
        if ages.size:
            age_mean = float(ages.mean())
            age_sd = float(ages.std(ddof=1)) if ages.size > 1 else 0.0
    sex_counts = None
    if schema.has_feature("sex"):
        fi = schema.feature_index("sex")
        sex_counts = {}
        for level in schema.features[fi].levels:
            sex_counts[str(level)] = sum(1 for r in dataset.records if r.values[fi] == level)
    prevalence = {
        outcome: float(dataset.labels[:, k].mean())
        for k, outcome in enumerate(schema.outcomes)
    }
    return CohortTable(
        split=split,
        n_patients=len({r.id for r in dataset.records}),
        n_encounters=len(dataset),
        age_mean=age_mean,
        age_sd=age_sd,
        sex_counts=sex_counts,
        prevalence=prevalence,
    )


@dataclass(frozen=True)
class ModelCard:
    text: CardText
    model_info: dict
    cohorts: tuple[CohortTable, ...]
    auroc: dict[str, AurocCurve]
    importance_overall: list[tuple[str, float]]
    importance_groups: dict[str, dict[str, list[tuple[str, float]]]]
    groupings: tuple[Grouping, ...]
    provenance: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "text": self.text.as_dict(),
            "model_info": dict(self.model_info),
            "cohorts": [t.as_dict() for t in self.cohorts],
            "auroc": {name: curve.as_dict() for name, curve in self.auroc.items()},
            "importance": {
                "overall": [[name, value] for name, value in self.importance_overall],
                "groups": {
                    gname: {
                        label: [[name, value] for name, value in ranking]
                        for label, ranking in labels.items()
                    }
                    for gname, labels in self.importance_groups.items()
                },
            },
            "groupings": [g.as_dict() for g in self.groupings],
            "provenance": dict(self.provenance),
        }


def build_model_card(
    model: RandomForest,
    dev: Dataset,
    val: Dataset,
    config: CardConfig | None = None,
    generated_at: str | None = None,
) -> ModelCard:
    """Assemble a card. Pure given (model, datasets, config, timestamp)."""
    config = config or CardConfig()
    schema = model.schema
    for name, ds in (("development", dev), ("validation", val)):
        if ds.schema.to_dict() != schema.to_dict():
            raise SchemaError(f"{name} dataset schema does not match the model")
    cohorts = (cohort_table(schema, dev, "development"), cohort_table(schema, val, "validation"))
    auroc = evaluate_auroc(model, val)

    groupings = config.resolve_groupings(schema)
    idx = sample_indices(len(val), config.importance_sample, config.importance_seed)
    records = [val.records[i] for i in idx]
    matrix = shap_abs_matrix(model, records)
    importance_overall = rank_features(schema, matrix.mean(axis=0))
    importance_groups: dict[str, dict[str, list[tuple[str, float]]]] = {}
    for grouping in groupings:
        in_a = np.array([grouping.assign(schema, r) for r in records])
        if not in_a.any() or in_a.all():
            raise DataError(
                f"grouping {grouping.name!r} leaves an empty group in the card sample",
                field=grouping.feature,
            )
        importance_groups[grouping.name] = {
            grouping.label_a: rank_features(schema, matrix[in_a].mean(axis=0)),
            grouping.label_b: rank_features(schema, matrix[~in_a].mean(axis=0)),
        }

    cfg = model.config
    model_info = {
        "model_type": "random forest (multi-output probability leaves)",
        "n_trees": cfg.n_trees,
        "max_depth": cfg.max_depth,
        "min_leaf": cfg.min_leaf,
        "features_per_split": cfg.resolve_features_per_split(len(model.encoder.columns)),
        "n_features": len(schema.features),
        "n_encoded_columns": len(model.encoder.columns),
        "outcomes": list(schema.outcomes),
        "training_seed": model.seed,
    }
    if generated_at is None:
        generated_at = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    provenance = {
        "model_fingerprint": model.fingerprint(),
        "development_fingerprint": dev.fingerprint(),
        "validation_fingerprint": val.fingerprint(),
        "importance_sample": len(records),
        "importance_seed": config.importance_seed,
        "generated_at": generated_at,
    }
    return ModelCard(
        text=config.text,
        model_info=model_info,
        cohorts=cohorts,
        auroc=auroc,
        importance_overall=importance_overall,
        importance_groups=importance_groups,
        groupings=groupings,
        provenance=provenance,
    )


def _fmt(value: float | None, digits: int = 3) -> str:
    return "n/a" if value is None else f"{value:.{digits}f}"


def render_markdown(card: ModelCard) -> str:
    lines: list[str] = ["# Model Card", ""]
    lines += [card.text.overview, ""]
    lines += ["## Data Source", "", card.text.data_source, ""]
    lines += ["## Intended Users", ""]
    lines += [f"- {item}" for item in card.text.intended_users]
    lines += ["", "## Use Cases", ""]
    lines += [f"- {item}" for item in card.text.use_cases]
    lines += ["", "## Model", ""]
    for key, value in card.model_info.items():
        if key == "outcomes":
            value = ", ".join(value)
        lines.append(f"- {key.replace('_', ' ')}: {value}")
    lines += ["", "## Training Data Cohort", ""]
    header = ["statistic"] + [t.split for t in card.cohorts]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    lines.append(
        "| patients | " + " | ".join(str(t.n_patients) for t in card.cohorts) + " |"
    )
    lines.append(
        "| encounters | " + " | ".join(str(t.n_encounters) for t in card.cohorts) + " |"
    )
    lines.append(
        "| age mean (SD) | "
        + " | ".join(f"{_fmt(t.age_mean, 1)} ({_fmt(t.age_sd, 1)})" for t in card.cohorts)
        + " |"
    )
    sex_levels = sorted({lv for t in card.cohorts if t.sex_counts for lv in t.sex_counts})
    for level in sex_levels:
        cells = []
        for t in card.cohorts:
            count = (t.sex_counts or {}).get(level, 0)
            cells.append(f"{count} ({100.0 * count / t.n_encounters:.1f}%)")
        lines.append(f"| sex: {level} | " + " | ".join(cells) + " |")
    lines += ["", "## Outcome Prevalence", ""]
    lines.append("| outcome | " + " | ".join(t.split for t in card.cohorts) + " |")
    lines.append("|" + "---|" * (1 + len(card.cohorts)))
    for outcome in card.cohorts[0].prevalence:
        cells = " | ".join(f"{t.prevalence[outcome]:.4f}" for t in card.cohorts)
        lines.append(f"| {outcome} | {cells} |")
    lines += ["", "## Performance (validation AUROC)", ""]
    for outcome, curve in card.auroc.items():
        lines.append(f"- {outcome}: {_fmt(curve.auroc)}")
    lines += ["", "## Global Feature Importance (mean |SHAP|)", ""]
    for name, value in card.importance_overall[:10]:
        lines.append(f"- {name}: {value:.6f}")
    for gname, labels in card.importance_groups.items():
        lines += ["", f"### Subgroup: {gname}", ""]
        for label, ranking in labels.items():
            top = ", ".join(f"{n} ({v:.4f})" for n, v in ranking[:5])
            lines.append(f"- {label}: {top}")
    lines += ["", "## Limitations", ""]
    lines += [f"- {item}" for item in card.text.limitations]
    lines += ["", "## Provenance", ""]
    for key, value in card.provenance.items():
        lines.append(f"- {key.replace('_', ' ')}: {value}")
    lines.append("")
    return "\n".join(lines)


def _svg_roc(curve: AurocCurve, size: int = 220) -> str:
    pad = 24
    span = size - 2 * pad

    def px(x: float) -> float:
        return pad + x * span

    def py(y: float) -> float:
        return size - pad - y * span

    pts = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in curve.points)
    parts = [
        f'<svg width="{size}" height="{size}" viewBox="0 0 {size} {size}" role="img">',
        f'<rect x="{pad}" y="{pad}" width="{span}" height="{span}" fill="none" stroke="#999"/>',
        f'<line x1="{px(0):.1f}" y1="{py(0):.1f}" x2="{px(1):.1f}" y2="{py(1):.1f}" '
        'stroke="#bbb" stroke-dasharray="4 3"/>',
    ]
    if pts:
        parts.append(f'<polyline points="{pts}" fill="none" stroke="#1f6fb2" stroke-width="2"/>')
    parts.append(
        f'<text x="{size / 2:.0f}" y="{size - 4}" text-anchor="middle" font-size="11">'
        f"{_html.escape(curve.outcome)} AUROC {_fmt(curve.auroc)}</text>"
    )
    parts.append("</svg>")
    return "".join(parts)


def _svg_bars(ranking: list[tuple[str, float]], top: int = 10, width: int = 420) -> str:
    rows = ranking[:top]
    bar_h, gap, label_w = 16, 6, 170
    height = len(rows) * (bar_h + gap) + gap
    vmax = max((v for _, v in rows), default=0.0) or 1.0
    parts = [f'<svg width="{width}" height="{height}" viewBox="0 0 {width} {height}" role="img">']
    for i, (name, value) in enumerate(rows):
        y = gap + i * (bar_h + gap)
        w = (width - label_w - 60) * value / vmax
        parts.append(
            f'<text x="{label_w - 6}" y="{y + bar_h - 4}" text-anchor="end" font-size="11">'
            f"{_html.escape(name)}</text>"
        )
        parts.append(
            f'<rect x="{label_w}" y="{y}" width="{w:.1f}" height="{bar_h}" fill="#1f6fb2"/>'
        )
        parts.append(
            f'<text x="{label_w + w + 4:.1f}" y="{y + bar_h - 4}" font-size="10">{value:.4f}</text>'
        )
    parts.append("</svg>")
    return "".join(parts)


def render_html(card: ModelCard) -> str:
    e = _html.escape
    parts = [
        "<!doctype html>",
        "<html><head><meta charset='utf-8'><title>Model Card</title>",
        "<style>body{font-family:sans-serif;max-width:900px;margin:2em auto;padding:0 1em}"
        "table{border-collapse:collapse}td,th{border:1px solid #ccc;padding:4px 10px}"
        "h2{border-bottom:1px solid #ddd;padding-bottom:4px}.charts{display:flex;flex-wrap:wrap;gap:1em}"
        "</style></head><body>",
        "<h1>Model Card</h1>",
        f"<p>{e(card.text.overview)}</p>",
        "<h2>Data Source</h2>",
        f"<p>{e(card.text.data_source)}</p>",
        "<h2>Intended Users</h2><ul>",
    ]
    parts += [f"<li>{e(item)}</li>" for item in card.text.intended_users]
    parts += ["</ul>", "<h2>Use Cases</h2><ul>"]
    parts += [f"<li>{e(item)}</li>" for item in card.text.use_cases]
    parts += ["</ul>", "<h2>Model</h2><ul>"]
    for key, value in card.model_info.items():
        if key == "outcomes":
            value = ", ".join(value)
        parts.append(f"<li>{e(key.replace('_', ' '))}: {e(str(value))}</li>")
    parts += ["</ul>", "<h2>Training Data Cohort</h2>", "<table><tr><th>statistic</th>"]
    parts += [f"<th>{e(t.split)}</th>" for t in card.cohorts]
    parts.append("</tr>")
    parts.append(
        "<tr><td>patients</td>"
        + "".join(f"<td>{t.n_patients}</td>" for t in card.cohorts)
        + "</tr>"
    )
    parts.append(
        "<tr><td>encounters</td>"
        + "".join(f"<td>{t.n_encounters}</td>" for t in card.cohorts)
        + "</tr>"
    )
    parts.append(
        "<tr><td>age mean (SD)</td>"
        + "".join(
            f"<td>{_fmt(t.age_mean, 1)} ({_fmt(t.age_sd, 1)})</td>" for t in card.cohorts
        )
        + "</tr>"
    )
    sex_levels = sorted({lv for t in card.cohorts if t.sex_counts for lv in t.sex_counts})
    for level in sex_levels:
        cells = "".join(
            f"<td>{(t.sex_counts or {}).get(level, 0)} "
            f"({100.0 * (t.sex_counts or {}).get(level, 0) / t.n_encounters:.1f}%)</td>"
            for t in card.cohorts
        )
        parts.append(f"<tr><td>sex: {e(level)}</td>{cells}</tr>")
    parts += ["</table>", "<h2>Outcome Prevalence</h2>", "<table><tr><th>outcome</th>"]
    parts += [f"<th>{e(t.split)}</th>" for t in card.cohorts]
    parts.append("</tr>")
    for outcome in card.cohorts[0].prevalence:
        cells = "".join(f"<td>{t.prevalence[outcome]:.4f}</td>" for t in card.cohorts)
        parts.append(f"<tr><td>{e(outcome)}</td>{cells}</tr>")
    parts += ["</table>", "<h2>Performance (validation AUROC)</h2>", "<div class='charts'>"]
    for curve in card.auroc.values():
        parts.append(_svg_roc(curve))
    parts += ["</div>", "<h2>Global Feature Importance (mean |SHAP|)</h2>"]
    parts.append(_svg_bars(card.importance_overall))
    for gname, labels in card.importance_groups.items():
        parts.append(f"<h3>Subgroup: {e(gname)}</h3><div class='charts'>")
        for label, ranking in labels.items():
            parts.append(f"<div><h4>{e(label)}</h4>{_svg_bars(ranking, top=8, width=360)}</div>")
        parts.append("</div>")
    parts += ["<h2>Limitations</h2><ul>"]
    parts += [f"<li>{e(item)}</li>" for item in card.text.limitations]
    parts += ["</ul>", "<h2>Provenance</h2><ul>"]
    for key, value in card.provenance.items():
        parts.append(f"<li>{e(key.replace('_', ' '))}: {e(str(value))}</li>")
    parts += ["</ul>", "</body></html>"]
    return "\n".join(parts)
