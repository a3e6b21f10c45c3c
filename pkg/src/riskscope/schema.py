"""Feature vocabulary, cohort validation, and percentile bounds.

A :class:`CohortSchema` declares every input feature (kind, bounds,
units, tags, mutability) plus the outcome list. Records and CSV cohorts
are validated cell-by-cell against it; all downstream modules (forest,
explainers, counterfactual search) consume only validated data.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import yaml

from .errors import DataError, SchemaError

KINDS = ("binary", "categorical", "numerical")
TAGS = ("lab", "comorbidity", "demographic", "admission", "surgery")

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class FeatureSpec:
    """One declared input feature.

    ``mutable`` marks the feature as eligible for counterfactual
    variation and is only legal on lab-tagged numerical features.
    ``normal_range`` (labs only) is the clinically normal interval in
    feature units. ``precision`` is the display precision (decimals)
    used when rendering suggested lab values.
    """

    name: str
    kind: str
    display_name: str = ""
    levels: tuple[str, ...] = ()
    minimum: float | None = None
    maximum: float | None = None
    unit: str = ""
    mutable: bool = False
    tags: frozenset[str] = frozenset()
    normal_range: tuple[float, float] | None = None
    precision: int = 1

    def __post_init__(self):
        if not self.name or not self.name.replace("_", "").isalnum():
            raise SchemaError(f"feature name {self.name!r} is not an identifier", field=self.name)
        if self.kind not in KINDS:
            raise SchemaError(f"feature {self.name!r}: unknown kind {self.kind!r}", field=self.name)
        bad_tags = set(self.tags) - set(TAGS)
        if bad_tags:
            raise SchemaError(f"feature {self.name!r}: unknown tags {sorted(bad_tags)}", field=self.name)
        if not self.display_name:
            object.__setattr__(self, "display_name", self.name.replace("_", " "))
        if self.kind == "categorical":
            if not self.levels:
                raise SchemaError(f"categorical feature {self.name!r} has no levels", field=self.name)
            if len(set(self.levels)) != len(self.levels):
                raise SchemaError(f"categorical feature {self.name!r} has duplicate levels", field=self.name)
        elif self.levels:
            raise SchemaError(f"feature {self.name!r}: levels only allowed on categorical kind", field=self.name)
        if self.kind == "numerical":
            if self.minimum is None or self.maximum is None:
                raise SchemaError(f"numerical feature {self.name!r} needs min and max", field=self.name)
            if not (np.isfinite(self.minimum) and np.isfinite(self.maximum)):
                raise SchemaError(f"numerical feature {self.name!r}: bounds must be finite", field=self.name)
            if not self.minimum < self.maximum:
                raise SchemaError(f"numerical feature {self.name!r}: min must be < max", field=self.name)
        elif self.minimum is not None or self.maximum is not None:
            raise SchemaError(f"feature {self.name!r}: min/max only allowed on numerical kind", field=self.name)
        if self.normal_range is not None:
            if "lab" not in self.tags or self.kind != "numerical":
                raise SchemaError(
                    f"feature {self.name!r}: normal_range is only allowed on lab-tagged numerical features",
                    field=self.name,
                )
            lo, hi = self.normal_range
            if not (self.minimum <= lo < hi <= self.maximum):
                raise SchemaError(
                    f"feature {self.name!r}: normal_range must lie within [min, max]", field=self.name
                )
        if self.mutable and ("lab" not in self.tags or self.kind != "numerical"):
            raise SchemaError(
                f"feature {self.name!r}: mutable=true requires a lab-tagged numerical feature",
                field=self.name,
            )
        if self.precision < 0 or self.precision > 6:
            raise SchemaError(f"feature {self.name!r}: precision out of range", field=self.name)

    @property
    def is_lab(self) -> bool:
        return "lab" in self.tags

    def validate_value(self, raw):
        """Canonicalize one cell for this feature; None marks a missing lab."""
        if raw is None:
            if self.is_lab:
                return None
            raise DataError(f"missing value for non-lab feature {self.name!r}", field=self.name)
        if self.kind == "binary":
            if raw in (0, 1):
                return int(raw)
            if isinstance(raw, float) and raw in (0.0, 1.0):
                return int(raw)
            raise DataError(f"feature {self.name!r}: binary value must be 0 or 1, got {raw!r}", field=self.name)
        if self.kind == "categorical":
            if not isinstance(raw, str) or raw not in self.levels:
                raise DataError(
                    f"feature {self.name!r}: {raw!r} is not a declared level", field=self.name
                )
            return raw
        # numerical
        try:
            value = float(raw)
        except (TypeError, ValueError):
            raise DataError(f"feature {self.name!r}: {raw!r} is not a number", field=self.name)
        if not np.isfinite(value):
            raise DataError(f"feature {self.name!r}: value must be finite", field=self.name)
        if not (self.minimum <= value <= self.maximum):
            raise DataError(
                f"feature {self.name!r}: {value} outside [{self.minimum}, {self.maximum}]",
                field=self.name,
            )
        return value

    def to_dict(self) -> dict:
        doc: dict = {"name": self.name, "display_name": self.display_name, "kind": self.kind}
        if self.kind == "categorical":
            doc["levels"] = list(self.levels)
        if self.kind == "numerical":
            doc["min"] = self.minimum
            doc["max"] = self.maximum
            if self.unit:
                doc["unit"] = self.unit
        if self.tags:
            doc["tags"] = sorted(self.tags)
        if self.mutable:
            doc["mutable"] = True
        if self.normal_range is not None:
            doc["normal_range"] = list(self.normal_range)
        if self.precision != 1:
            doc["precision"] = self.precision
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> "FeatureSpec":
        known = {
            "name", "display_name", "kind", "levels", "min", "max", "unit",
            "tags", "mutable", "normal_range", "precision",
        }
        unknown = set(doc) - known
        if unknown:
            raise SchemaError(f"feature document has unknown keys {sorted(unknown)}")
        nr = doc.get("normal_range")
        return cls(
            name=doc.get("name", ""),
            kind=doc.get("kind", ""),
            display_name=doc.get("display_name", ""),
            levels=tuple(doc.get("levels", ())),
            minimum=doc.get("min"),
            maximum=doc.get("max"),
            unit=doc.get("unit", ""),
            mutable=bool(doc.get("mutable", False)),
            tags=frozenset(doc.get("tags", ())),
            normal_range=tuple(nr) if nr is not None else None,
            precision=int(doc.get("precision", 1)),
        )


@dataclass(frozen=True)
class CohortSchema:
    """Ordered feature list plus outcome names."""

    features: tuple[FeatureSpec, ...]
    outcomes: tuple[str, ...]

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate feature names: {dupes}")
        if not self.outcomes:
            raise SchemaError("schema must declare at least one outcome")
        if len(set(self.outcomes)) != len(self.outcomes):
            raise SchemaError("duplicate outcome names")
        if set(self.outcomes) & set(names):
            raise SchemaError("outcome names collide with feature names")
        if not any(f.mutable and f.kind == "numerical" for f in self.features):
            raise SchemaError("schema needs at least one mutable numerical feature")
        object.__setattr__(self, "_index", {f.name: i for i, f in enumerate(self.features)})

    def feature(self, name: str) -> FeatureSpec:
        try:
            return self.features[self._index[name]]
        except KeyError:
            raise SchemaError(f"unknown feature {name!r}", field=name)

    def feature_index(self, name: str) -> int:
        if name not in self._index:
            raise SchemaError(f"unknown feature {name!r}", field=name)
        return self._index[name]

    def has_feature(self, name: str) -> bool:
        return name in self._index

    def outcome_index(self, name: str) -> int:
        try:
            return self.outcomes.index(name)
        except ValueError:
            raise SchemaError(f"unknown outcome {name!r}", field=name)

    def tagged(self, tag: str) -> tuple[FeatureSpec, ...]:
        return tuple(f for f in self.features if tag in f.tags)

    @property
    def mutable_features(self) -> tuple[FeatureSpec, ...]:
        return tuple(f for f in self.features if f.mutable)

    @property
    def comorbidity_features(self) -> tuple[FeatureSpec, ...]:
        return tuple(f for f in self.features if "comorbidity" in f.tags and f.kind == "binary")

    def validate_values(self, values: Sequence) -> tuple:
        if len(values) != len(self.features):
            raise DataError(
                f"record has {len(values)} values, schema declares {len(self.features)} features"
            )
        return tuple(spec.validate_value(v) for spec, v in zip(self.features, values))

    def record_from_mapping(self, record_id: str, mapping: Mapping) -> "PatientRecord":
        unknown = set(mapping) - {f.name for f in self.features}
        if unknown:
            raise DataError(f"unknown features {sorted(unknown)}", field=sorted(unknown)[0])
        values = []
        for spec in self.features:
            if spec.name not in mapping:
                if spec.is_lab:
                    values.append(None)
                    continue
                raise DataError(f"missing value for feature {spec.name!r}", field=spec.name)
            values.append(mapping[spec.name])
        return PatientRecord(id=str(record_id), values=self.validate_values(values))

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "outcomes": list(self.outcomes),
            "features": [f.to_dict() for f in self.features],
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "CohortSchema":
        if not isinstance(doc, Mapping):
            raise SchemaError("schema document must be a mapping")
        version = doc.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SchemaError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
        raw_features = doc.get("features")
        if not isinstance(raw_features, list) or not raw_features:
            raise SchemaError("schema document needs a non-empty 'features' list")
        features = tuple(FeatureSpec.from_dict(f) for f in raw_features)
        outcomes = tuple(doc.get("outcomes", ()))
        return cls(features=features, outcomes=outcomes)


@dataclass(frozen=True)
class PatientRecord:
    """One schema-conforming row; values are in schema feature order."""

    id: str
    values: tuple

    def value(self, schema: CohortSchema, name: str):
        return self.values[schema.feature_index(name)]

    def replace(self, schema: CohortSchema, overrides: Mapping) -> "PatientRecord":
        values = list(self.values)
        for name, raw in overrides.items():
            idx = schema.feature_index(name)
            values[idx] = schema.features[idx].validate_value(raw)
        return PatientRecord(id=self.id, values=tuple(values))

    def as_mapping(self, schema: CohortSchema) -> dict:
        return {f.name: v for f, v in zip(schema.features, self.values)}


@dataclass(frozen=True)
class Dataset:
    """Validated records plus an optional per-record, per-outcome label matrix."""

    schema: CohortSchema
    records: tuple[PatientRecord, ...]
    labels: np.ndarray | None = None
    generator: object | None = None  # retained synthetic ground truth, if any

    def __post_init__(self):
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int8)
            expected = (len(self.records), len(self.schema.outcomes))
            if labels.shape != expected:
                raise DataError(
                    f"label matrix shape {labels.shape} != records x outcomes {expected}"
                )
            if not np.isin(labels, (0, 1)).all():
                raise DataError("labels must be 0/1")
            object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def labeled(self) -> bool:
        return self.labels is not None

    def record_by_id(self, record_id: str) -> PatientRecord:
        for rec in self.records:
            if rec.id == record_id:
                return rec
        raise DataError(f"no record with id {record_id!r}", field="record_id")

    def numeric_column(self, name: str) -> np.ndarray:
        """Raw values of a numerical feature with NaN for missing cells."""
        spec = self.schema.feature(name)
        if spec.kind != "numerical":
            raise DataError(f"feature {name!r} is not numerical", field=name)
        idx = self.schema.feature_index(name)
        return np.array(
            [np.nan if r.values[idx] is None else r.values[idx] for r in self.records],
            dtype=np.float64,
        )

    def column(self, name: str) -> list:
        idx = self.schema.feature_index(name)
        return [r.values[idx] for r in self.records]

    def subset(self, indices: Sequence[int]) -> "Dataset":
        recs = tuple(self.records[i] for i in indices)
        labels = self.labels[list(indices)] if self.labels is not None else None
        return Dataset(schema=self.schema, records=recs, labels=labels, generator=self.generator)

    def fingerprint(self) -> str:
        payload = {
            "schema": self.schema.to_dict(),
            "records": [[r.id, list(r.values)] for r in self.records],
            "labels": self.labels.tolist() if self.labels is not None else None,
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def load_schema(path: str | Path) -> CohortSchema:
    """Load and validate a schema document (YAML key/value format)."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"schema file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise SchemaError(f"cannot parse schema document {path}: {exc}")
    return CohortSchema.from_dict(doc)


def save_schema(schema: CohortSchema, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(schema.to_dict(), sort_keys=False))


def default_schema() -> CohortSchema:
    """The bundled surgical-complication schema (~30 features, 10 outcomes)."""
    here = Path(__file__).parent / "data" / "default_schema.yaml"
    return load_schema(here)


def _parse_cell(spec: FeatureSpec, text: str, row: int, column: str):
    if text == "":
        if spec.is_lab:
            return None
        raise DataError(
            f"row {row}: empty value in non-lab column {column!r}", field=column
        )
    if spec.kind == "binary":
        if text in ("0", "1"):
            return int(text)
        raise DataError(
            f"row {row}: column {column!r} expects 0/1, got {text!r}", field=column
        )
    if spec.kind == "categorical":
        if text not in spec.levels:
            raise DataError(
                f"row {row}: column {column!r} has unknown level {text!r}", field=column
            )
        return text
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"row {row}: column {column!r} is not numeric: {text!r}", field=column)
    if not np.isfinite(value) or not (spec.minimum <= value <= spec.maximum):
        raise DataError(
            f"row {row}: column {column!r} value {text!r} outside "
            f"[{spec.minimum}, {spec.maximum}]",
            field=column,
        )
    return value


def load_csv(path: str | Path, schema: CohortSchema, has_labels: bool = False) -> Dataset:
    """Load a UTF-8 cohort CSV; every cell is validated against the schema.

    The header must name one column per feature, plus one per outcome
    when ``has_labels`` is set. An optional leading ``id`` column names
    records; otherwise row numbers are used. Missing lab cells are
    encoded as empty strings.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"cohort file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"cohort file {path} is empty")
        feature_names = [f.name for f in schema.features]
        expected = set(feature_names) | ({"id"} if "id" in header else set())
        if has_labels:
            expected |= set(schema.outcomes)
        unknown = [c for c in header if c not in expected]
        if unknown:
            raise DataError(f"unknown column {unknown[0]!r}", field=unknown[0])
        missing = [c for c in feature_names if c not in header]
        if has_labels:
            missing += [c for c in schema.outcomes if c not in header]
        if missing:
            raise DataError(f"missing column {missing[0]!r}", field=missing[0])
        col_of = {name: header.index(name) for name in header}

        records: list[PatientRecord] = []
        label_rows: list[list[int]] = []
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"row {row_no}: has {len(row)} cells, header has {len(header)}")
            rid = row[col_of["id"]] if "id" in col_of else f"r{row_no - 2:05d}"
            values = tuple(
                _parse_cell(spec, row[col_of[spec.name]], row_no, spec.name)
                for spec in schema.features
            )
            records.append(PatientRecord(id=rid, values=values))
            if has_labels:
                lab = []
                for outcome in schema.outcomes:
                    text = row[col_of[outcome]]
                    if text not in ("0", "1"):
                        raise DataError(
                            f"row {row_no}: outcome column {outcome!r} expects 0/1, got {text!r}",
                            field=outcome,
                        )
                    lab.append(int(text))
                label_rows.append(lab)

    labels = np.array(label_rows, dtype=np.int8) if has_labels else None
    return Dataset(schema=schema, records=tuple(records), labels=labels)


def save_csv(dataset: Dataset, path: str | Path) -> None:
    """Write a cohort CSV that :func:`load_csv` round-trips exactly."""
    schema = dataset.schema
    header = ["id"] + [f.name for f in schema.features]
    if dataset.labeled:
        header += list(schema.outcomes)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, rec in enumerate(dataset.records):
            row = [rec.id]
            for spec, value in zip(schema.features, rec.values):
                if value is None:
                    row.append("")
                elif spec.kind == "numerical":
                    row.append(repr(float(value)))
                else:
                    row.append(str(value))
            if dataset.labeled:
                row += [str(int(v)) for v in dataset.labels[i]]
            writer.writerow(row)


def percentile_bounds(
    dataset: Dataset, feature: str, low_q: float, high_q: float
) -> tuple[float, float]:
    """Quantile pair under linear interpolation at rank 1 + q*(n-1).

    Missing markers are excluded; errors if every value is missing.
    """
    if not (0.0 <= low_q < high_q <= 1.0):
        raise DataError(f"quantiles must satisfy 0 <= low < high <= 1, got ({low_q}, {high_q})")
    values = dataset.numeric_column(feature)
    values = values[~np.isnan(values)]
    if values.size == 0:
        raise DataError(f"feature {feature!r} has no observed values", field=feature)
    low, high = np.quantile(values, [low_q, high_q], method="linear")
    return float(low), float(high)
