import numpy as np
import pytest

from riskscope.errors import DataError, SchemaError
from riskscope.similarity import (
    SimilarityCriteria,
    cohort_summary,
    comorbidity_agreement,
    find_similar,
)
from util import constant_model, similar_bruteforce, tiny_dataset


def tiny_criteria(**kw):
    kw.setdefault("exact_match", ("color",))
    kw.setdefault("age_tolerance", 10.0)
    kw.setdefault("comorbidity_threshold", 0.5)
    return SimilarityCriteria(**kw)


class TestCriteria:
    def test_validation(self):
        with pytest.raises(SchemaError):
            SimilarityCriteria(age_tolerance=-1.0)
        with pytest.raises(SchemaError):
            SimilarityCriteria(comorbidity_threshold=1.5)

    def test_validate_against_schema(self):
        schema = tiny_dataset(10, seed=0).schema
        with pytest.raises(SchemaError):
            tiny_criteria(age_feature="nope").validate_against(schema)
        with pytest.raises(SchemaError):
            tiny_criteria(age_feature="lab", exact_match=("nope",)).validate_against(schema)
        with pytest.raises(SchemaError):
            tiny_criteria(age_feature="color").validate_against(schema)
        tiny_criteria().validate_against(schema)

    def test_missing_index_age(self):
        ds = tiny_dataset(30, seed=1)
        index = ds.records[0].replace(ds.schema, {"lab": None})
        criteria = tiny_criteria(age_feature="lab")
        with pytest.raises(DataError):
            find_similar(ds, index, criteria)


class TestMatching:
    def test_bruteforce_equality_randomized(self):
        for trial in range(15):
            ds = tiny_dataset(80, seed=500 + trial)
            rng = np.random.default_rng(trial)
            index = ds.records[int(rng.integers(0, len(ds)))]
            criteria = tiny_criteria(
                age_tolerance=float(rng.choice([2.0, 5.0, 15.0])),
                comorbidity_threshold=float(rng.choice([0.0, 0.5, 1.0])),
            )
            got = find_similar(ds, index, criteria)
            want = similar_bruteforce(ds, index, criteria)
            assert [r.id for r in got] == [r.id for r in want]

    def test_default_schema_bruteforce(self, cohort):
        for i in (0, 17, 111):
            index = cohort.records[i]
            got = find_similar(cohort, index)
            want = similar_bruteforce(cohort, index, SimilarityCriteria())
            assert [r.id for r in got] == [r.id for r in want]

    def test_index_id_excluded(self):
        ds = tiny_dataset(50, seed=3)
        index = ds.records[5]
        criteria = tiny_criteria(age_tolerance=1000.0, comorbidity_threshold=0.0,
                                 exact_match=())
        matches = find_similar(ds, index, criteria)
        ids = [r.id for r in matches]
        assert index.id not in ids
        assert len(ids) == len(ds) - 1  # everything else matches under no-op criteria

    def test_agreement_symmetry(self):
        ds = tiny_dataset(40, seed=4)
        schema = ds.schema
        for a in ds.records[:8]:
            for b in ds.records[8:16]:
                assert comorbidity_agreement(schema, a, b) == comorbidity_agreement(
                    schema, b, a
                )

    def test_agreement_bounds_and_identity(self):
        ds = tiny_dataset(40, seed=5)
        schema = ds.schema
        for rec in ds.records[:10]:
            assert comorbidity_agreement(schema, rec, rec) == 1.0
        flipped = ds.records[0].replace(
            schema, {"flag": 1 - ds.records[0].value(schema, "flag")}
        )
        assert comorbidity_agreement(schema, ds.records[0], flipped) == 0.0


class TestSummary:
    def test_aggregates_match_manual(self, desk_model, cohort):
        index = cohort.records[4]
        summary = cohort_summary(desk_model, cohort, index)
        want = similar_bruteforce(cohort, index, SimilarityCriteria())
        assert summary.count == len(want)
        assert summary.matched_ids == tuple(r.id for r in want)
        if want:
            risks = desk_model.predict_records(want)
            for k, outcome in enumerate(desk_model.outcomes):
                assert summary.mean_predicted[outcome] == pytest.approx(
                    float(risks[:, k].mean())
                )
            rows = [i for i, r in enumerate(cohort.records) if r.id in summary.matched_ids]
            for k, outcome in enumerate(desk_model.outcomes):
                assert summary.observed_prevalence[outcome] == pytest.approx(
                    float(cohort.labels[rows, k].mean())
                )
        index_risk = desk_model.predict_records([index])[0]
        for k, outcome in enumerate(desk_model.outcomes):
            assert summary.index_risks[outcome] == pytest.approx(float(index_risk[k]))

    def test_zero_matches_absent_aggregates(self):
        ds = tiny_dataset(50, seed=6)
        model = constant_model(ds)
        index = ds.records[0]
        criteria = tiny_criteria(age_tolerance=0.0, comorbidity_threshold=1.0)
        impossible = index.replace(ds.schema, {"age": 89.9})
        matches = find_similar(ds, impossible, criteria)
        if matches:  # force emptiness by shrinking tolerance around a unique age
            pytest.skip("cohort accidentally contains an exact clone")
        summary = cohort_summary(model, ds, impossible, criteria)
        assert summary.count == 0
        assert summary.mean_predicted is None
        assert summary.observed_prevalence is None
        assert summary.matched_ids == ()
        assert set(summary.index_risks) == set(model.outcomes)

    def test_unlabeled_dataset_omits_observed(self):
        ds = tiny_dataset(60, seed=7, labeled=False)
        model = constant_model(ds)
        criteria = tiny_criteria(age_tolerance=1000.0, comorbidity_threshold=0.0,
                                 exact_match=())
        summary = cohort_summary(model, ds, ds.records[0], criteria)
        assert summary.count == len(ds) - 1
        assert summary.observed_prevalence is None
        assert summary.mean_predicted is not None

    def test_as_dict_round(self, desk_model, cohort):
        summary = cohort_summary(desk_model, cohort, cohort.records[0])
        d = summary.as_dict()
        assert d["count"] == summary.count
        assert d["criteria"]["age_tolerance"] == 5.0
        assert isinstance(d["matched_ids"], list)
