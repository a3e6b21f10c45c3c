"""Synthetic cohort generation with known ground-truth risk.

Feature marginals are sampled independently (Bernoulli for binaries,
weighted choice for categoricals, truncated normals for numericals via
inverse-CDF so draws are reproducible across platforms). Outcome labels
come from per-outcome logistic risk models over the raw features, so
tests can compare fitted model behaviour against analytic truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import DataError, SchemaError
from .schema import CohortSchema, Dataset, FeatureSpec, PatientRecord


@dataclass(frozen=True)
class NumericalMarginal:
    """Truncated normal over [spec.min, spec.max]; sd=0 collapses to a constant."""

    mean: float
    sd: float
    missing_rate: float = 0.0

    def sample(self, spec: FeatureSpec, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.sd == 0.0:
            out = np.full(n, float(np.clip(self.mean, spec.minimum, spec.maximum)))
        else:
            a = ndtr((spec.minimum - self.mean) / self.sd)
            b = ndtr((spec.maximum - self.mean) / self.sd)
            u = rng.uniform(a, b, size=n)
            out = self.mean + self.sd * ndtri(u)
            out = np.clip(out, spec.minimum, spec.maximum)
        return out


@dataclass(frozen=True)
class BinaryMarginal:
    rate: float

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return (rng.random(n) < self.rate).astype(np.int64)


@dataclass(frozen=True)
class CategoricalMarginal:
    weights: tuple[float, ...]

    def sample(self, spec: FeatureSpec, rng: np.random.Generator, n: int) -> np.ndarray:
        w = np.asarray(self.weights, dtype=np.float64)
        return rng.choice(len(spec.levels), size=n, p=w / w.sum())


@dataclass(frozen=True)
class RiskTerm:
    """One additive logit contribution.

    Numerical features contribute ``weight * (x - center) / scale``;
    binary features ``weight * x``; categorical features ``weight`` when
    the sampled level equals ``level``.
    """

    feature: str
    weight: float
    center: float = 0.0
    scale: float = 1.0
    level: str | None = None

    def logit(self, spec: FeatureSpec, column: np.ndarray) -> np.ndarray:
        if spec.kind == "numerical":
            return self.weight * (column.astype(np.float64) - self.center) / self.scale
        if spec.kind == "binary":
            return self.weight * column.astype(np.float64)
        if self.level is None:
            raise SchemaError(f"categorical risk term on {spec.name!r} needs a level")
        codes = np.array([spec.levels.index(self.level)])
        return self.weight * (column == codes[0]).astype(np.float64)


@dataclass(frozen=True)
class OutcomeModel:
    name: str
    intercept: float
    terms: tuple[RiskTerm, ...] = ()

    def risk(self, schema: CohortSchema, columns: Mapping[str, np.ndarray]) -> np.ndarray:
        n = len(next(iter(columns.values())))
        logit = np.full(n, self.intercept, dtype=np.float64)
        for term in self.terms:
            spec = schema.feature(term.feature)
            logit += term.logit(spec, columns[term.feature])
        return 1.0 / (1.0 + np.exp(-logit))


@dataclass(frozen=True)
class GeneratorConfig:
    """Marginals plus outcome models; retained on generated datasets."""

    marginals: Mapping[str, object]
    outcome_models: tuple[OutcomeModel, ...]

    def model_for(self, outcome: str) -> OutcomeModel:
        for m in self.outcome_models:
            if m.name == outcome:
                return m
        raise SchemaError(f"no outcome model for {outcome!r}", field=outcome)


def generate_synthetic_cohort(
    schema: CohortSchema,
    config: GeneratorConfig,
    n: int,
    seed: int,
    id_prefix: str = "p",
) -> Dataset:
    """Draw ``n`` labelled records; identical output for identical seeds."""
    if n <= 0:
        raise DataError("cohort size must be positive")
    missing_marginals = [f.name for f in schema.features if f.name not in config.marginals]
    if missing_marginals:
        raise SchemaError(f"no marginal for feature {missing_marginals[0]!r}", field=missing_marginals[0])
    for outcome in schema.outcomes:
        config.model_for(outcome)

    rng = np.random.default_rng(np.random.SeedSequence(seed))

    # Sample feature columns in schema order so the draw sequence is fixed.
    columns: dict[str, np.ndarray] = {}
    missing_masks: dict[str, np.ndarray] = {}
    for spec in schema.features:
        marginal = config.marginals[spec.name]
        if spec.kind == "numerical":
            if not isinstance(marginal, NumericalMarginal):
                raise SchemaError(f"feature {spec.name!r} needs a NumericalMarginal", field=spec.name)
            columns[spec.name] = marginal.sample(spec, rng, n)
            if marginal.missing_rate > 0.0:
                if not spec.is_lab:
                    raise SchemaError(
                        f"feature {spec.name!r}: missing_rate is only valid for labs", field=spec.name
                    )
                missing_masks[spec.name] = rng.random(n) < marginal.missing_rate
        elif spec.kind == "binary":
            if not isinstance(marginal, BinaryMarginal):
                raise SchemaError(f"feature {spec.name!r} needs a BinaryMarginal", field=spec.name)
            columns[spec.name] = marginal.sample(rng, n)
        else:
            if not isinstance(marginal, CategoricalMarginal):
                raise SchemaError(f"feature {spec.name!r} needs a CategoricalMarginal", field=spec.name)
            if len(marginal.weights) != len(spec.levels):
                raise SchemaError(
                    f"feature {spec.name!r}: {len(marginal.weights)} weights for "
                    f"{len(spec.levels)} levels",
                    field=spec.name,
                )
            columns[spec.name] = marginal.sample(spec, rng, n)

    # Labels from ground-truth risk; missingness is applied after risk so
    # the generating process sees complete data.
    risks = np.stack(
        [config.model_for(o).risk(schema, columns) for o in schema.outcomes], axis=1
    )
    labels = (rng.random(risks.shape) < risks).astype(np.int8)

    records = []
    width = len(str(max(n - 1, 1)))
    for i in range(n):
        values = []
        for spec in schema.features:
            col = columns[spec.name]
            if spec.name in missing_masks and missing_masks[spec.name][i]:
                values.append(None)
            elif spec.kind == "numerical":
                values.append(float(col[i]))
            elif spec.kind == "binary":
                values.append(int(col[i]))
            else:
                values.append(spec.levels[int(col[i])])
        records.append(PatientRecord(id=f"{id_prefix}{i:0{width}d}", values=tuple(values)))

    return Dataset(schema=schema, records=tuple(records), labels=labels, generator=config)


def true_risk(dataset: Dataset, record: PatientRecord, outcome: str) -> float:
    """Ground-truth risk for one record (requires a retained generator config)."""
    config = dataset.generator
    if not isinstance(config, GeneratorConfig):
        raise DataError("dataset has no retained generator config")
    schema = dataset.schema
    columns = {}
    for spec, value in zip(schema.features, record.values):
        if value is None:
            raise DataError(f"record has missing {spec.name!r}; ground truth undefined", field=spec.name)
        if spec.kind == "categorical":
            columns[spec.name] = np.array([spec.levels.index(value)])
        else:
            columns[spec.name] = np.array([value], dtype=np.float64)
    return float(config.model_for(outcome).risk(schema, columns)[0])


def default_generator_config(schema: CohortSchema) -> GeneratorConfig:
    """Plausible marginals and risk models for the bundled schema."""
    marginals: dict[str, object] = {}
    for spec in schema.features:
        if spec.kind == "binary":
            marginals[spec.name] = BinaryMarginal(rate=_DEFAULT_BINARY_RATES.get(spec.name, 0.15))
        elif spec.kind == "categorical":
            weights = _DEFAULT_CATEGORICAL_WEIGHTS.get(
                spec.name, tuple(1.0 for _ in spec.levels)
            )
            marginals[spec.name] = CategoricalMarginal(weights=weights)
        else:
            mean, sd, miss = _DEFAULT_NUMERICAL_PARAMS.get(
                spec.name,
                ((spec.minimum + spec.maximum) / 2.0, (spec.maximum - spec.minimum) / 6.0, 0.0),
            )
            marginals[spec.name] = NumericalMarginal(mean=mean, sd=sd, missing_rate=miss)

    models = tuple(_default_outcome_model(schema, o) for o in schema.outcomes)
    return GeneratorConfig(marginals=marginals, outcome_models=models)


_DEFAULT_BINARY_RATES = {
    "emergency_admission": 0.22,
    "diabetes": 0.28,
    "hypertension": 0.52,
    "chf": 0.09,
    "copd": 0.12,
    "ckd": 0.14,
    "cad": 0.18,
    "cancer_history": 0.11,
    "anemia_history": 0.17,
    "obesity": 0.31,
    "smoker": 0.24,
}

_DEFAULT_CATEGORICAL_WEIGHTS = {
    "sex": (0.54, 0.46),
    "race": (0.62, 0.23, 0.09, 0.06),
    "admission_source": (0.66, 0.21, 0.13),
    "surgery_type": (0.20, 0.17, 0.15, 0.13, 0.12, 0.09, 0.08, 0.06),
    "anesthesia_class": (0.08, 0.34, 0.41, 0.17),
    "primary_procedure_code": (0.16, 0.14, 0.13, 0.12, 0.11, 0.10, 0.09, 0.08, 0.07),
    "attending_surgeon_id": (0.11, 0.10, 0.10, 0.09, 0.09, 0.09, 0.09, 0.11, 0.11, 0.11),
}

_DEFAULT_NUMERICAL_PARAMS = {
    # name: (mean, sd, missing_rate)
    "age": (56.0, 17.0, 0.0),
    "bmi": (28.6, 6.2, 0.0),
    "surgery_duration_hours": (3.1, 1.6, 0.0),
    "days_from_admission_to_surgery": (1.2, 1.8, 0.0),
    "hemoglobin": (12.6, 2.1, 0.06),
    "wbc": (8.6, 3.1, 0.06),
    "platelets": (242.0, 74.0, 0.07),
    "sodium": (138.5, 3.4, 0.05),
    "potassium": (4.1, 0.5, 0.05),
    "calcium": (9.1, 0.7, 0.08),
    "creatinine": (1.05, 0.55, 0.05),
    "glucose": (124.0, 46.0, 0.05),
    "scheduled_constant": (1.0, 0.0, 0.0),
}


def _default_outcome_model(schema: CohortSchema, outcome: str) -> OutcomeModel:
    """Risk models keyed by outcome name, with a generic fallback."""
    t = RiskTerm
    by_name: dict[str, tuple[float, tuple[RiskTerm, ...]]] = {
        "acute_kidney_injury": (
            -2.6,
            (
                t("creatinine", 1.1, center=1.0, scale=0.6),
                t("age", 0.5, center=56.0, scale=17.0),
                t("ckd", 1.2),
                t("diabetes", 0.5),
                t("emergency_admission", 0.6),
                t("surgery_duration_hours", 0.4, center=3.0, scale=1.6),
            ),
        ),
        "wound_complication": (
            -2.9,
            (
                t("glucose", 0.8, center=124.0, scale=46.0),
                t("bmi", 0.6, center=28.6, scale=6.2),
                t("obesity", 0.5),
                t("smoker", 0.6),
                t("albumin", -0.5, center=3.9, scale=0.5) if schema.has_feature("albumin")
                else t("hemoglobin", -0.3, center=12.6, scale=2.1),
            ),
        ),
        "sepsis": (
            -3.1,
            (
                t("wbc", 0.9, center=8.6, scale=3.1),
                t("emergency_admission", 0.9),
                t("age", 0.4, center=56.0, scale=17.0),
                t("cancer_history", 0.5),
                t("surgery_type", 0.7, level="cardiac"),
            ),
        ),
        "pneumonia": (
            -3.2,
            (
                t("copd", 1.3),
                t("smoker", 0.7),
                t("age", 0.6, center=56.0, scale=17.0),
                t("surgery_duration_hours", 0.4, center=3.0, scale=1.6),
            ),
        ),
        "venous_thromboembolism": (
            -3.4,
            (
                t("cancer_history", 0.9),
                t("obesity", 0.6),
                t("surgery_duration_hours", 0.6, center=3.0, scale=1.6),
                t("age", 0.3, center=56.0, scale=17.0),
            ),
        ),
        "cardiovascular_complication": (
            -3.0,
            (
                t("cad", 1.1),
                t("chf", 1.2),
                t("age", 0.7, center=56.0, scale=17.0),
                t("potassium", -0.4, center=4.1, scale=0.5),
                t("hypertension", 0.4),
            ),
        ),
        "neurologic_complication": (
            -3.6,
            (
                t("age", 0.8, center=56.0, scale=17.0),
                t("sodium", -0.4, center=138.5, scale=3.4),
                t("surgery_type", 0.6, level="neurological"),
            ),
        ),
        "prolonged_icu_stay": (
            -2.4,
            (
                t("emergency_admission", 0.8),
                t("surgery_duration_hours", 0.7, center=3.0, scale=1.6),
                t("hemoglobin", -0.5, center=12.6, scale=2.1),
                t("age", 0.4, center=56.0, scale=17.0),
                t("chf", 0.7),
            ),
        ),
        "mortality_30d": (
            -3.8,
            (
                t("age", 1.0, center=56.0, scale=17.0),
                t("emergency_admission", 0.8),
                t("hemoglobin", -0.5, center=12.6, scale=2.1),
                t("creatinine", 0.5, center=1.0, scale=0.6),
                t("cancer_history", 0.6),
                t("chf", 0.8),
            ),
        ),
        "mortality_90d": (
            -3.5,
            (
                t("age", 1.0, center=56.0, scale=17.0),
                t("cancer_history", 0.9),
                t("hemoglobin", -0.5, center=12.6, scale=2.1),
                t("ckd", 0.6),
                t("emergency_admission", 0.6),
            ),
        ),
    }
    if outcome in by_name:
        intercept, terms = by_name[outcome]
        terms = tuple(term for term in terms if schema.has_feature(term.feature))
        return OutcomeModel(name=outcome, intercept=intercept, terms=terms)
    # Generic fallback: age plus the first mutable lab.
    terms = [RiskTerm("age", 0.6, center=56.0, scale=17.0)] if schema.has_feature("age") else []
    labs = schema.mutable_features
    if labs:
        spec = labs[0]
        mid = (spec.minimum + spec.maximum) / 2.0
        terms.append(RiskTerm(spec.name, 0.5, center=mid, scale=(spec.maximum - spec.minimum) / 6.0))
    return OutcomeModel(name=outcome, intercept=-2.8, terms=tuple(terms))
