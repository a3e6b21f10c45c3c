"""Shared attribution shape for LIME and SHAP explanations."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ExplainError
from .schema import CohortSchema, FeatureSpec, PatientRecord

METHODS = ("LIME", "SHAP")


@dataclass(frozen=True)
class Contribution:
    feature: str
    condition: str
    value: float

    def as_dict(self) -> dict:
        return {"feature": self.feature, "condition": self.condition, "value": self.value}


@dataclass(frozen=True)
class Attribution:
    """Signed per-feature contributions for one record and outcome.

    ``base_value`` is the explainer's reference output (surrogate
    intercept for LIME, expected model output for SHAP); contributions
    are ordered by descending |value|, at most one per schema feature.
    """

    method: str
    outcome: str
    base_value: float
    contributions: tuple[Contribution, ...]
    prediction: float
    details: dict | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ExplainError(f"unknown attribution method {self.method!r}")
        names = [c.feature for c in self.contributions]
        if len(set(names)) != len(names):
            raise ExplainError("duplicate feature in contributions")
        values = [abs(c.value) for c in self.contributions]
        if any(a < b for a, b in zip(values, values[1:])):
            raise ExplainError("contributions must be ordered by descending |value|")

    def value_of(self, feature: str) -> float:
        for c in self.contributions:
            if c.feature == feature:
                return c.value
        return 0.0

    def top(self, k: int) -> tuple[Contribution, ...]:
        return self.contributions[:k]

    def as_dict(self) -> dict:
        doc = {
            "method": self.method,
            "outcome": self.outcome,
            "base_value": self.base_value,
            "prediction": self.prediction,
            "contributions": [c.as_dict() for c in self.contributions],
        }
        if self.details is not None:
            doc["details"] = self.details
        return doc


def format_number(spec: FeatureSpec, value: float) -> str:
    text = f"{value:.{spec.precision}f}"
    return f"{text} {spec.unit}".strip() if spec.unit else text


def describe_value(spec: FeatureSpec, value) -> str:
    """Human-readable 'feature = value' text for one observed cell."""
    if value is None:
        return f"{spec.display_name} missing"
    if spec.kind == "binary":
        return f"{spec.display_name} = {'yes' if value else 'no'}"
    if spec.kind == "categorical":
        return f"{spec.display_name} = {value}"
    return f"{spec.display_name} = {format_number(spec, float(value))}"


def rank_contributions(items: list[Contribution]) -> tuple[Contribution, ...]:
    """Descending |value|; ties broken by schema order of appearance."""
    return tuple(sorted(items, key=lambda c: -abs(c.value)))


def record_conditions(schema: CohortSchema, record: PatientRecord) -> dict[str, str]:
    return {
        spec.name: describe_value(spec, value)
        for spec, value in zip(schema.features, record.values)
    }
