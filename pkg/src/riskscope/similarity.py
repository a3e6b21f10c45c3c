"""Similar-patient retrieval and cohort summaries.

A record matches the index patient when age is within tolerance, every
exact-match feature is equal, and the fraction of comorbidity flags in
agreement (same presence or absence) clears the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, SchemaError
from .forest import RandomForest
from .schema import CohortSchema, Dataset, PatientRecord


@dataclass(frozen=True)
class SimilarityCriteria:
    age_feature: str = "age"
    age_tolerance: float = 5.0
    exact_match: tuple[str, ...] = ("race", "sex", "surgery_type")
    comorbidity_threshold: float = 0.6

    def __post_init__(self):
        if self.age_tolerance < 0:
            raise SchemaError("age_tolerance must be >= 0")
        if not (0.0 <= self.comorbidity_threshold <= 1.0):
            raise SchemaError("comorbidity_threshold must be in [0, 1]")

    def validate_against(self, schema: CohortSchema) -> None:
        age = schema.feature(self.age_feature)  # raises on unknown
        if age.kind != "numerical":
            raise SchemaError(f"age feature {self.age_feature!r} must be numerical")
        for name in self.exact_match:
            schema.feature(name)

    def as_dict(self) -> dict:
        return {
            "age_feature": self.age_feature,
            "age_tolerance": self.age_tolerance,
            "exact_match": list(self.exact_match),
            "comorbidity_threshold": self.comorbidity_threshold,
        }


def comorbidity_agreement(schema: CohortSchema, a: PatientRecord, b: PatientRecord) -> float:
    """Fraction of comorbidity-tagged binary flags with equal values.

    Vacuously 1.0 when the schema declares no comorbidity flags.
    """
    flags = schema.comorbidity_features
    if not flags:
        return 1.0
    equal = sum(
        1 for f in flags if a.values[schema.feature_index(f.name)] == b.values[schema.feature_index(f.name)]
    )
    return equal / len(flags)


def _similar_indices(
    dataset: Dataset, index: PatientRecord, criteria: SimilarityCriteria
) -> list[int]:
    schema = dataset.schema
    criteria.validate_against(schema)
    age_idx = schema.feature_index(criteria.age_feature)
    index_age = index.values[age_idx]
    if index_age is None:
        raise DataError(f"index patient is missing {criteria.age_feature!r}", field=criteria.age_feature)
    exact_idx = [schema.feature_index(name) for name in criteria.exact_match]

    rows = []
    for i, rec in enumerate(dataset.records):
        if rec.id == index.id:
            continue
        age = rec.values[age_idx]
        if age is None or abs(age - index_age) > criteria.age_tolerance:
            continue
        if any(rec.values[j] != index.values[j] for j in exact_idx):
            continue
        if comorbidity_agreement(schema, index, rec) < criteria.comorbidity_threshold:
            continue
        rows.append(i)
    return rows


def find_similar(
    dataset: Dataset, index: PatientRecord, criteria: SimilarityCriteria | None = None
) -> list[PatientRecord]:
    """Matching records in dataset order; the index id itself is excluded."""
    criteria = criteria or SimilarityCriteria()
    return [dataset.records[i] for i in _similar_indices(dataset, index, criteria)]


@dataclass(frozen=True)
class CohortSummary:
    count: int
    criteria: SimilarityCriteria
    index_risks: dict[str, float]
    mean_predicted: dict[str, float] | None
    observed_prevalence: dict[str, float] | None
    matched_ids: tuple[str, ...]

    def as_dict(self) -> dict:
        return {
            "count": self.count,
            "criteria": self.criteria.as_dict(),
            "index_risks": self.index_risks,
            "mean_predicted": self.mean_predicted,
            "observed_prevalence": self.observed_prevalence,
            "matched_ids": list(self.matched_ids),
        }


def cohort_summary(
    model: RandomForest,
    dataset: Dataset,
    index: PatientRecord,
    criteria: SimilarityCriteria | None = None,
) -> CohortSummary:
    """Risk profile of the matched cohort next to the index patient's own.

    Zero matches yields count 0 with the aggregates explicitly absent.
    """
    criteria = criteria or SimilarityCriteria()
    rows = _similar_indices(dataset, index, criteria)
    matches = [dataset.records[i] for i in rows]
    outcomes = model.outcomes
    index_risks = dict(zip(outcomes, model.predict_records([index])[0].tolist()))
    if not matches:
        return CohortSummary(
            count=0,
            criteria=criteria,
            index_risks=index_risks,
            mean_predicted=None,
            observed_prevalence=None,
            matched_ids=(),
        )
    risks = model.predict_records(matches)
    mean_predicted = dict(zip(outcomes, risks.mean(axis=0).tolist()))
    observed = None
    if dataset.labeled:
        observed = dict(zip(outcomes, dataset.labels[rows].mean(axis=0).tolist()))
    return CohortSummary(
        count=len(matches),
        criteria=criteria,
        index_risks=index_risks,
        mean_predicted=mean_predicted,
        observed_prevalence=observed,
        matched_ids=tuple(rec.id for rec in matches),
    )
