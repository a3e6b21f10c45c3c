"""What-if analysis: re-score a record after user-specified overrides."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DataError, PredictionError, SchemaError
from .forest import RandomForest
from .schema import Dataset, PatientRecord


@dataclass(frozen=True)
class WhatIfRequest:
    """Base record plus a sparse map of feature overrides.

    The base is either an inline record or an id into a reference
    dataset. ``outcomes`` filters the response; None means all.
    """

    record: PatientRecord | None = None
    record_id: str | None = None
    overrides: dict[str, object] = field(default_factory=dict)
    outcomes: tuple[str, ...] | None = None

    def __post_init__(self):
        if (self.record is None) == (self.record_id is None):
            raise DataError("provide exactly one of record or record_id")


@dataclass(frozen=True)
class OverrideEcho:
    feature: str
    original: object
    new: object

    def as_dict(self) -> dict:
        return {"feature": self.feature, "original": self.original, "new": self.new}


@dataclass(frozen=True)
class WhatIfResponse:
    original: dict[str, float]
    updated: dict[str, float]
    overrides: tuple[OverrideEcho, ...]

    def as_dict(self) -> dict:
        return {
            "original": dict(self.original),
            "updated": dict(self.updated),
            "overrides": [o.as_dict() for o in self.overrides],
        }


def resolve_base_record(request: WhatIfRequest, reference: Dataset | None) -> PatientRecord:
    if request.record is not None:
        return request.record
    if reference is None:
        raise DataError("record_id given but no reference dataset is loaded", field="record_id")
    for record in reference.records:
        if record.id == request.record_id:
            return record
    raise DataError(f"unknown record id {request.record_id!r}", field="record_id")


def whatif_predict(
    model: RandomForest, request: WhatIfRequest, reference: Dataset | None = None
) -> WhatIfResponse:
    """Score the base and the overridden record. Pure and stateless."""
    schema = model.schema
    base = resolve_base_record(request, reference)
    schema.validate_values(base.values)

    echoes = []
    applied: dict[str, object] = {}
    for name in request.overrides:
        if not schema.has_feature(name):
            raise SchemaError(f"unknown feature {name!r}", field=name)
    # echo in schema order so the response is canonical regardless of request order
    ordered = sorted(request.overrides.items(), key=lambda kv: schema.feature_index(kv[0]))
    for name, raw in ordered:
        fi = schema.feature_index(name)
        value = schema.features[fi].validate_value(raw)
        applied[name] = value
        echoes.append(OverrideEcho(feature=name, original=base.values[fi], new=value))
    updated_record = base.replace(schema, applied) if applied else base

    outcomes = request.outcomes
    if outcomes is not None:
        for name in outcomes:
            if name not in schema.outcomes:
                raise PredictionError(f"unknown outcome {name!r}", field="outcomes")
    wanted = list(outcomes) if outcomes is not None else list(schema.outcomes)

    scores = model.predict_records([base, updated_record])
    original = {}
    updated = {}
    for name in wanted:
        k = schema.outcome_index(name)
        original[name] = float(scores[0, k])
        updated[name] = float(scores[1, k])
    return WhatIfResponse(original=original, updated=updated, overrides=tuple(echoes))
