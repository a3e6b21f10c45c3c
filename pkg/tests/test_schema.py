import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskscope.errors import DataError, SchemaError
from riskscope.schema import (
    CohortSchema,
    Dataset,
    FeatureSpec,
    PatientRecord,
    default_schema,
    load_csv,
    load_schema,
    percentile_bounds,
    save_csv,
    save_schema,
)
from util import tiny_dataset, tiny_schema


class TestFeatureSpec:
    def test_categorical_needs_levels(self):
        with pytest.raises(SchemaError):
            FeatureSpec(name="c", kind="categorical")

    def test_duplicate_levels_rejected(self):
        with pytest.raises(SchemaError):
            FeatureSpec(name="c", kind="categorical", levels=("a", "a"))

    def test_numerical_needs_ordered_bounds(self):
        with pytest.raises(SchemaError):
            FeatureSpec(name="x", kind="numerical", minimum=5.0, maximum=5.0)
        with pytest.raises(SchemaError):
            FeatureSpec(name="x", kind="numerical", minimum=None, maximum=1.0)

    def test_normal_range_must_be_inside_bounds(self):
        with pytest.raises(SchemaError):
            FeatureSpec(
                name="lab", kind="numerical", minimum=0.0, maximum=10.0,
                tags=frozenset({"lab"}), normal_range=(5.0, 11.0),
            )

    def test_normal_range_only_on_labs(self):
        with pytest.raises(SchemaError):
            FeatureSpec(
                name="x", kind="numerical", minimum=0.0, maximum=10.0, normal_range=(1.0, 2.0)
            )

    def test_mutable_requires_lab_numerical(self):
        with pytest.raises(SchemaError):
            FeatureSpec(name="flag", kind="binary", mutable=True)
        with pytest.raises(SchemaError):
            FeatureSpec(name="x", kind="numerical", minimum=0.0, maximum=1.0, mutable=True)
        FeatureSpec(
            name="lab", kind="numerical", minimum=0.0, maximum=1.0,
            tags=frozenset({"lab"}), mutable=True,
        )

    def test_display_name_defaults_from_name(self):
        spec = FeatureSpec(name="serum_sodium", kind="numerical", minimum=0.0, maximum=1.0)
        assert spec.display_name == "serum sodium"

    def test_unknown_kind_and_tags(self):
        with pytest.raises(SchemaError):
            FeatureSpec(name="x", kind="ordinal")
        with pytest.raises(SchemaError):
            FeatureSpec(name="x", kind="binary", tags=frozenset({"weird"}))

    def test_validate_value_binary(self):
        spec = FeatureSpec(name="flag", kind="binary")
        assert spec.validate_value(1) == 1
        assert spec.validate_value(0.0) == 0
        with pytest.raises(DataError):
            spec.validate_value(2)
        with pytest.raises(DataError):
            spec.validate_value(None)

    def test_validate_value_categorical(self):
        spec = FeatureSpec(name="c", kind="categorical", levels=("a", "b"))
        assert spec.validate_value("b") == "b"
        with pytest.raises(DataError):
            spec.validate_value("z")

    def test_validate_value_numerical_bounds(self):
        spec = FeatureSpec(name="x", kind="numerical", minimum=0.0, maximum=10.0)
        assert spec.validate_value("3") == 3.0
        with pytest.raises(DataError):
            spec.validate_value(11.0)
        with pytest.raises(DataError):
            spec.validate_value(float("nan"))

    def test_missing_only_for_labs(self):
        lab = FeatureSpec(
            name="lab", kind="numerical", minimum=0.0, maximum=10.0, tags=frozenset({"lab"})
        )
        assert lab.validate_value(None) is None
        nonlab = FeatureSpec(name="x", kind="numerical", minimum=0.0, maximum=10.0)
        with pytest.raises(DataError):
            nonlab.validate_value(None)

    @given(st.floats(min_value=0.0, max_value=10.0, allow_nan=False))
    def test_validate_value_accepts_everything_in_bounds(self, value):
        spec = FeatureSpec(name="x", kind="numerical", minimum=0.0, maximum=10.0)
        assert spec.validate_value(value) == value


class TestCohortSchema:
    def test_unique_feature_names(self):
        f = FeatureSpec(name="x", kind="binary")
        with pytest.raises(SchemaError):
            CohortSchema(features=(f, f), outcomes=("y",))

    def test_needs_an_outcome(self):
        f = FeatureSpec(name="x", kind="binary")
        with pytest.raises(SchemaError):
            CohortSchema(features=(f,), outcomes=())

    def test_needs_a_mutable_numerical(self):
        f = FeatureSpec(name="x", kind="binary")
        with pytest.raises(SchemaError):
            CohortSchema(features=(f,), outcomes=("y",))

    def test_lookup_helpers(self):
        schema = tiny_schema()
        assert schema.feature("lab").unit == "mg/dL"
        assert schema.feature_index("age") == 0
        assert schema.outcome_index("worse") == 1
        assert schema.has_feature("flag") and not schema.has_feature("nope")
        with pytest.raises(SchemaError):
            schema.feature("nope")
        with pytest.raises(SchemaError):
            schema.outcome_index("nope")

    def test_mutable_and_comorbidity_views(self):
        schema = tiny_schema()
        assert [f.name for f in schema.mutable_features] == ["lab"]
        assert [f.name for f in schema.comorbidity_features] == ["flag"]

    def test_roundtrip_dict(self):
        schema = tiny_schema()
        assert CohortSchema.from_dict(schema.to_dict()) == schema

    def test_yaml_roundtrip(self, tmp_path):
        schema = default_schema()
        path = tmp_path / "schema.yaml"
        save_schema(schema, path)
        assert load_schema(path) == schema

    def test_default_schema_shape(self, schema):
        assert len(schema.features) == 30
        assert len(schema.outcomes) == 10
        assert all(f.mutable for f in schema.tagged("lab"))

    def test_record_from_mapping_validates(self):
        schema = tiny_schema()
        record = schema.record_from_mapping(
            "r1", {"age": 40, "flag": 1, "color": "red", "lab": 3.3}
        )
        assert record.values == (40.0, 1, "red", 3.3)
        # a missing lab key reads as an explicitly missing measurement
        partial = schema.record_from_mapping("r2", {"age": 40, "flag": 1, "color": "red"})
        assert partial.value(schema, "lab") is None
        with pytest.raises(DataError):
            schema.record_from_mapping("r1", {"age": 40, "flag": 1, "lab": 3.3})
        with pytest.raises(DataError):
            schema.record_from_mapping(
                "r1", {"age": 40, "flag": 1, "color": "red", "lab": 3.3, "extra": 1}
            )


class TestRecordAndDataset:
    def test_replace_validates(self):
        schema = tiny_schema()
        dataset = tiny_dataset(5)
        record = dataset.records[0]
        updated = record.replace(schema, {"lab": 9.9})
        assert updated.value(schema, "lab") == 9.9
        assert record.value(schema, "lab") != 9.9
        with pytest.raises(DataError):
            record.replace(schema, {"lab": 99.0})

    def test_labels_shape_checked(self):
        schema = tiny_schema()
        dataset = tiny_dataset(4)
        with pytest.raises(DataError):
            Dataset(schema=schema, records=dataset.records, labels=dataset.labels[:, :1])
        with pytest.raises(DataError):
            Dataset(schema=schema, records=dataset.records, labels=dataset.labels[:2])

    def test_labels_binary_checked(self):
        schema = tiny_schema()
        dataset = tiny_dataset(4)
        bad = dataset.labels.copy()
        bad[0, 0] = 3
        with pytest.raises(DataError):
            Dataset(schema=schema, records=dataset.records, labels=bad)

    def test_subset_keeps_alignment(self):
        dataset = tiny_dataset(10)
        sub = dataset.subset([2, 5, 7])
        assert [r.id for r in sub.records] == ["T002", "T005", "T007"]
        assert (sub.labels == dataset.labels[[2, 5, 7]]).all()

    def test_fingerprint_changes_with_content(self):
        a, b = tiny_dataset(6, seed=1), tiny_dataset(6, seed=2)
        assert a.fingerprint() == tiny_dataset(6, seed=1).fingerprint()
        assert a.fingerprint() != b.fingerprint()


class TestCsv:
    def test_roundtrip_exact(self, tmp_path):
        dataset = tiny_dataset(30, seed=3)
        path = tmp_path / "cohort.csv"
        save_csv(dataset, path)
        loaded = load_csv(path, dataset.schema, has_labels=True)
        assert [r.values for r in loaded.records] == [r.values for r in dataset.records]
        assert (loaded.labels == dataset.labels).all()

    def test_missing_lab_roundtrip(self, tmp_path):
        dataset = tiny_dataset(5, seed=4)
        schema = dataset.schema
        records = list(dataset.records)
        records[2] = records[2].replace(schema, {"lab": None})
        dataset = Dataset(schema=schema, records=tuple(records), labels=dataset.labels)
        path = tmp_path / "cohort.csv"
        save_csv(dataset, path)
        loaded = load_csv(path, schema, has_labels=True)
        assert loaded.records[2].value(schema, "lab") is None

    def test_bad_cell_names_row_and_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,age,flag,color,lab\nr1,40,1,purple,3.0\n")
        with pytest.raises(DataError) as err:
            load_csv(path, tiny_schema())
        assert "row 2" in str(err.value) and "color" in str(err.value)

    def test_missing_column_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,age,flag,color\nr1,40,1,red\n")
        with pytest.raises(DataError):
            load_csv(path, tiny_schema())

    def test_bad_label_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,age,flag,color,lab,bad,worse\nr1,40,1,red,3.0,2,0\n")
        with pytest.raises(DataError):
            load_csv(path, tiny_schema(), has_labels=True)

    def test_file_not_found(self, tmp_path):
        with pytest.raises(DataError):
            load_csv(tmp_path / "nope.csv", tiny_schema())


class TestPercentileBounds:
    def test_one_to_hundred_oracle(self):
        schema = CohortSchema(
            features=(
                FeatureSpec(name="age", kind="numerical", minimum=0.0, maximum=200.0),
                FeatureSpec(name="flag", kind="binary"),
                FeatureSpec(name="color", kind="categorical", levels=("red",)),
                FeatureSpec(
                    name="lab", kind="numerical", minimum=0.0, maximum=10.0,
                    tags=frozenset({"lab"}), mutable=True,
                ),
            ),
            outcomes=("bad",),
        )
        records = tuple(
            PatientRecord(id=f"r{i}", values=schema.validate_values((float(i + 1), 0, "red", None)))
            for i in range(100)
        )
        dataset = Dataset(schema=schema, records=records)
        low, high = percentile_bounds(dataset, "age", 0.01, 0.99)
        assert low == pytest.approx(1.99)
        assert high == pytest.approx(99.01)

    def test_missing_cells_excluded(self):
        dataset = tiny_dataset(20, seed=5)
        schema = dataset.schema
        records = [r.replace(schema, {"lab": None}) for r in dataset.records[:10]]
        records += list(dataset.records[10:])
        mixed = Dataset(schema=schema, records=tuple(records))
        observed = sorted(
            r.value(schema, "lab") for r in records if r.value(schema, "lab") is not None
        )
        low, high = percentile_bounds(mixed, "lab", 0.0, 1.0)
        assert low == pytest.approx(observed[0])
        assert high == pytest.approx(observed[-1])

    def test_all_missing_errors(self):
        dataset = tiny_dataset(5, seed=6)
        schema = dataset.schema
        records = tuple(r.replace(schema, {"lab": None}) for r in dataset.records)
        empty = Dataset(schema=schema, records=records)
        with pytest.raises(DataError):
            percentile_bounds(empty, "lab", 0.01, 0.99)

    @settings(max_examples=30)
    @given(st.lists(st.floats(min_value=0.0, max_value=10.0, allow_nan=False), min_size=2, max_size=40))
    def test_bounds_bracket_all_quantiles(self, values):
        schema = tiny_schema()
        records = tuple(
            PatientRecord(id=f"r{i}", values=schema.validate_values((50.0, 0, "red", v)))
            for i, v in enumerate(values)
        )
        dataset = Dataset(schema=schema, records=records)
        low, high = percentile_bounds(dataset, "lab", 0.01, 0.99)
        assert min(values) <= low <= high <= max(values)
