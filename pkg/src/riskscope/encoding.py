"""Encoding of schema records into the numeric matrix the forest consumes.

Numerical and binary features map to single columns; categoricals are
one-hot expanded. The encoder remembers which encoded columns belong to
which schema feature so attribution methods can re-aggregate encoded
columns back to one value per declared feature. Missing lab values are
imputed with the training median, which is fixed at fit time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError, TrainingError
from .schema import CohortSchema, Dataset, PatientRecord


@dataclass(frozen=True)
class EncodedColumn:
    feature: str          # schema feature name
    feature_index: int    # index into schema.features
    level: str | None     # one-hot level for categoricals, else None

    @property
    def label(self) -> str:
        return self.feature if self.level is None else f"{self.feature}={self.level}"


class FeatureEncoder:
    """Maps records to float64 rows; fit once on training data."""

    def __init__(self, schema: CohortSchema):
        self.schema = schema
        columns: list[EncodedColumn] = []
        groups: list[list[int]] = []
        for fi, spec in enumerate(schema.features):
            group = []
            if spec.kind == "categorical":
                for level in spec.levels:
                    group.append(len(columns))
                    columns.append(EncodedColumn(spec.name, fi, level))
            else:
                group.append(len(columns))
                columns.append(EncodedColumn(spec.name, fi, None))
            groups.append(group)
        self.columns: tuple[EncodedColumn, ...] = tuple(columns)
        self.groups: tuple[tuple[int, ...], ...] = tuple(tuple(g) for g in groups)
        self.n_encoded = len(columns)
        self.medians: np.ndarray | None = None  # per-feature, NaN where undefined

    def fit(self, dataset: Dataset) -> "FeatureEncoder":
        """Record training medians for every numerical feature."""
        if dataset.schema is not self.schema and dataset.schema != self.schema:
            raise TrainingError("encoder and dataset schemas differ")
        medians = np.full(len(self.schema.features), np.nan)
        for fi, spec in enumerate(self.schema.features):
            if spec.kind != "numerical":
                continue
            col = np.array(
                [r.values[fi] for r in dataset.records if r.values[fi] is not None],
                dtype=np.float64,
            )
            if col.size == 0:
                raise TrainingError(
                    f"feature {spec.name!r} has no observed training values", field=spec.name
                )
            medians[fi] = np.median(col)
        self.medians = medians
        return self

    @property
    def fitted(self) -> bool:
        return self.medians is not None

    def _require_fit(self):
        if self.medians is None:
            raise TrainingError("encoder has not been fit")

    def impute(self, feature_index: int) -> float:
        """Training median used in place of a missing lab value."""
        self._require_fit()
        value = self.medians[feature_index]
        if np.isnan(value):
            raise DataError("no imputation value for non-numerical feature")
        return float(value)

    def encode_record(self, record: PatientRecord) -> np.ndarray:
        return self.encode_many([record])[0]

    def encode_many(self, records: Sequence[PatientRecord]) -> np.ndarray:
        self._require_fit()
        n = len(records)
        out = np.zeros((n, self.n_encoded), dtype=np.float64)
        for ci, col in enumerate(self.columns):
            spec = self.schema.features[col.feature_index]
            if spec.kind == "categorical":
                level = col.level
                out[:, ci] = [1.0 if r.values[col.feature_index] == level else 0.0 for r in records]
            elif spec.kind == "binary":
                out[:, ci] = [float(r.values[col.feature_index]) for r in records]
            else:
                med = self.medians[col.feature_index]
                out[:, ci] = [
                    med if r.values[col.feature_index] is None else float(r.values[col.feature_index])
                    for r in records
                ]
        return out

    def encode_dataset(self, dataset: Dataset) -> np.ndarray:
        return self.encode_many(dataset.records)

    def aggregate(self, per_column: np.ndarray) -> np.ndarray:
        """Sum encoded-column scores into one score per schema feature.

        Accepts shape (..., n_encoded); returns (..., n_features).
        """
        per_column = np.asarray(per_column, dtype=np.float64)
        if per_column.shape[-1] != self.n_encoded:
            raise DataError(
                f"expected {self.n_encoded} encoded columns, got {per_column.shape[-1]}"
            )
        out = np.zeros(per_column.shape[:-1] + (len(self.schema.features),), dtype=np.float64)
        for fi, group in enumerate(self.groups):
            out[..., fi] = per_column[..., list(group)].sum(axis=-1)
        return out

    def to_dict(self) -> dict:
        self._require_fit()
        return {
            "medians": [None if np.isnan(m) else float(m) for m in self.medians],
        }

    @classmethod
    def from_dict(cls, schema: CohortSchema, doc: dict) -> "FeatureEncoder":
        enc = cls(schema)
        medians = np.array(
            [np.nan if m is None else float(m) for m in doc["medians"]], dtype=np.float64
        )
        if medians.shape != (len(schema.features),):
            raise DataError("encoder medians length does not match schema")
        enc.medians = medians
        return enc
