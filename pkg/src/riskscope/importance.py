"""Global and subgroup feature importance.

The primary route is mean |SHAP| over a seeded record sample, which
inherits the explainer's guarantees (a feature no tree uses scores
exactly zero). Permutation importance (mean |AUROC drop| over shuffles)
is available as an independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ExplainError, SchemaError
from .forest import RandomForest, auroc_score
from .schema import CohortSchema, Dataset, PatientRecord
from .shap import forest_shap_encoded


@dataclass(frozen=True)
class Grouping:
    """Declarative binary partition of a dataset.

    ``level`` partitions by equality on a categorical/binary feature;
    ``threshold`` by <= on a numerical one. Exactly one must be set.
    """

    name: str
    feature: str
    level: str | int | None = None
    threshold: float | None = None
    label_a: str = ""
    label_b: str = ""

    def __post_init__(self):
        if (self.level is None) == (self.threshold is None):
            raise SchemaError(f"grouping {self.name!r}: set exactly one of level/threshold")
        if not self.label_a or not self.label_b:
            a, b = self._default_labels()
            object.__setattr__(self, "label_a", self.label_a or a)
            object.__setattr__(self, "label_b", self.label_b or b)

    def _default_labels(self) -> tuple[str, str]:
        if self.level is not None:
            return (str(self.level), f"not_{self.level}")
        return (f"{self.feature}<={self.threshold:g}", f"{self.feature}>{self.threshold:g}")

    def assign(self, schema: CohortSchema, record: PatientRecord) -> bool:
        """True for group A."""
        value = record.values[schema.feature_index(self.feature)]
        if self.level is not None:
            return value == self.level
        if value is None:
            raise DataError(
                f"grouping {self.name!r}: record has no value for {self.feature!r}",
                field=self.feature,
            )
        return value <= self.threshold

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "feature": self.feature,
            "level": self.level,
            "threshold": self.threshold,
            "label_a": self.label_a,
            "label_b": self.label_b,
        }


def default_groupings(schema: CohortSchema) -> tuple[Grouping, ...]:
    """Sex, race, and age partitions, kept to features the schema has."""
    candidates = []
    if schema.has_feature("sex"):
        candidates.append(Grouping(name="sex", feature="sex", level="female", label_b="male"))
    if schema.has_feature("race"):
        candidates.append(
            Grouping(
                name="race",
                feature="race",
                level="african_american",
                label_a="african_american",
                label_b="non_african_american",
            )
        )
    if schema.has_feature("age"):
        candidates.append(Grouping(name="age", feature="age", threshold=65.0))
    return tuple(candidates)


@dataclass(frozen=True)
class ImportanceConfig:
    sample_size: int | None = None  # None resolves to min(2000, dataset size)
    seed: int = 0
    outcome: str | None = None      # None averages over all outcomes
    method: str = "shap"
    permutation_repeats: int = 5

    def __post_init__(self):
        if self.method not in ("shap", "permutation"):
            raise ExplainError(f"unknown importance method {self.method!r}")
        if self.sample_size is not None and self.sample_size < 1:
            raise ExplainError("sample_size must be >= 1")
        if self.permutation_repeats < 1:
            raise ExplainError("permutation_repeats must be >= 1")


def sample_indices(n: int, sample_size: int | None, seed: int) -> np.ndarray:
    size = min(2000 if sample_size is None else sample_size, n)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=size, replace=False))


def shap_abs_matrix(
    model: RandomForest, records: list[PatientRecord], outcome: str | None = None
) -> np.ndarray:
    """Per-record |SHAP| per schema feature, shape (n_records, n_features)."""
    k = model.schema.outcome_index(outcome) if outcome is not None else None
    rows = []
    X = model.encoder.encode_many(records)
    for i in range(len(records)):
        phi_enc, _ = forest_shap_encoded(model, X[i])
        per_feature = model.encoder.aggregate(phi_enc.T)  # (K, F)
        absval = np.abs(per_feature)
        rows.append(absval.mean(axis=0) if k is None else absval[k])
    return np.asarray(rows)


def rank_features(schema: CohortSchema, values: np.ndarray) -> list[tuple[str, float]]:
    """Descending by importance; ties keep schema order."""
    order = sorted(range(len(schema.features)), key=lambda i: (-values[i], i))
    return [(schema.features[i].name, float(values[i])) for i in order]


def permutation_importance(
    model: RandomForest, dataset: Dataset, config: ImportanceConfig
) -> np.ndarray:
    """Mean |AUROC drop| per schema feature when its columns are shuffled."""
    if not dataset.labeled:
        raise DataError("permutation importance requires labels")
    idx = sample_indices(len(dataset), config.sample_size, config.seed)
    records = [dataset.records[i] for i in idx]
    labels = dataset.labels[idx]
    X = model.encoder.encode_many(records)
    outcome_ids = (
        [model.schema.outcome_index(config.outcome)]
        if config.outcome is not None
        else list(range(len(model.outcomes)))
    )
    base_scores = model.predict_matrix(X)
    base_auc = {}
    for k in outcome_ids:
        auc = auroc_score(base_scores[:, k], labels[:, k])
        if auc is None:
            raise DataError(f"outcome {model.outcomes[k]!r} is single-class in the sample")
        base_auc[k] = auc

    rng = np.random.default_rng(config.seed)
    out = np.zeros(len(model.schema.features))
    for fi, group in enumerate(model.encoder.groups):
        drops = []
        for _ in range(config.permutation_repeats):
            perm = rng.permutation(len(records))
            Xp = X.copy()
            Xp[:, list(group)] = X[perm][:, list(group)]
            scores = model.predict_matrix(Xp)
            per_outcome = []
            for k in outcome_ids:
                auc = auroc_score(scores[:, k], labels[:, k])
                per_outcome.append(abs(base_auc[k] - (auc if auc is not None else 0.5)))
            drops.append(np.mean(per_outcome))
        out[fi] = float(np.mean(drops))
    return out


def global_importance(
    model: RandomForest,
    dataset: Dataset,
    grouping: Grouping | None = None,
    config: ImportanceConfig | None = None,
) -> dict[str, list[tuple[str, float]]]:
    """Ranked (feature, importance) lists: 'overall' plus both group labels.

    Importance is the mean over sampled records of the per-feature |SHAP|
    (or the permutation drop), averaged over outcomes unless one is named.
    """
    config = config or ImportanceConfig()
    if len(dataset) == 0:
        raise DataError("dataset is empty")
    schema = model.schema

    if config.method == "permutation":
        values = permutation_importance(model, dataset, config)
        result = {"overall": rank_features(schema, values)}
        if grouping is not None:
            raise ExplainError("subgroup partitions are only supported with the shap method")
        return result

    idx = sample_indices(len(dataset), config.sample_size, config.seed)
    records = [dataset.records[i] for i in idx]
    matrix = shap_abs_matrix(model, records, outcome=config.outcome)
    result = {"overall": rank_features(schema, matrix.mean(axis=0))}
    if grouping is not None:
        in_a = np.array([grouping.assign(schema, r) for r in records])
        if not in_a.any() or in_a.all():
            raise DataError(
                f"grouping {grouping.name!r} leaves an empty group in the sample",
                field=grouping.feature,
            )
        result[grouping.label_a] = rank_features(schema, matrix[in_a].mean(axis=0))
        result[grouping.label_b] = rank_features(schema, matrix[~in_a].mean(axis=0))
    return result
