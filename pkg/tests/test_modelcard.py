import numpy as np
import pytest

from riskscope.errors import DataError, SchemaError
from riskscope.importance import Grouping
from riskscope.modelcard import (
    DEFAULT_CARD_TEXT,
    CardConfig,
    CardText,
    build_model_card,
    cohort_table,
    render_html,
    render_markdown,
)
from util import single_split_model, tiny_dataset


@pytest.fixture(scope="module")
def card_pair(request):
    desk_model = request.getfixturevalue("desk_model")
    cohort = request.getfixturevalue("cohort")
    dev = cohort.subset(range(0, 280))
    val = cohort.subset(range(280, 400))
    config = CardConfig(importance_sample=80, importance_seed=0)
    stamp = "2024-05-01T12:00:00+00:00"
    card = build_model_card(desk_model, dev, val, config=config, generated_at=stamp)
    return desk_model, dev, val, config, stamp, card


class TestCohortTable:
    def test_prevalence_exact(self, cohort):
        table = cohort_table(cohort.schema, cohort, "development")
        for k, outcome in enumerate(cohort.schema.outcomes):
            assert table.prevalence[outcome] == float(cohort.labels[:, k].mean())

    def test_stats_match_manual(self, cohort):
        schema = cohort.schema
        table = cohort_table(schema, cohort, "validation")
        assert table.split == "validation"
        assert table.n_encounters == len(cohort)
        assert table.n_patients == len({r.id for r in cohort.records})
        ages = np.array([r.value(schema, "age") for r in cohort.records], dtype=float)
        ages = ages[~np.isnan(ages)]
        assert table.age_mean == pytest.approx(float(ages.mean()))
        assert table.age_sd == pytest.approx(float(ages.std(ddof=1)))
        sex_idx = schema.feature_index("sex")
        for level, count in table.sex_counts.items():
            assert count == sum(1 for r in cohort.records if r.values[sex_idx] == level)

    def test_tiny_schema_has_no_age_or_sex_columns_missing(self):
        ds = tiny_dataset(30, seed=0)
        table = cohort_table(ds.schema, ds, "development")
        assert table.age_mean is not None  # tiny schema does have age
        assert table.sex_counts is None  # but no sex feature

    def test_requires_labels_and_rows(self, cohort):
        unlabeled = tiny_dataset(20, seed=1, labeled=False)
        with pytest.raises(DataError):
            cohort_table(unlabeled.schema, unlabeled, "development")
        with pytest.raises(DataError):
            cohort_table(cohort.schema, cohort.subset([]), "development")


class TestBuild:
    def test_schema_mismatch(self, desk_model):
        other = tiny_dataset(40, seed=2)
        with pytest.raises(SchemaError):
            build_model_card(desk_model, other, other)

    def test_provenance_and_model_info(self, card_pair):
        model, dev, val, config, stamp, card = card_pair
        p = card.provenance
        assert p["model_fingerprint"] == model.fingerprint()
        assert p["development_fingerprint"] == dev.fingerprint()
        assert p["validation_fingerprint"] == val.fingerprint()
        assert p["importance_sample"] == 80
        assert p["generated_at"] == stamp
        info = card.model_info
        assert info["n_trees"] == model.config.n_trees
        assert info["outcomes"] == list(model.schema.outcomes)
        assert info["n_features"] == len(model.schema.features)

    def test_auroc_is_validation_performance(self, card_pair):
        model, dev, val, config, stamp, card = card_pair
        from riskscope.forest import evaluate_auroc

        want = evaluate_auroc(model, val)
        assert set(card.auroc) == set(want)
        for outcome, curve in card.auroc.items():
            assert curve.auroc == want[outcome].auroc

    def test_rankings_cover_all_features(self, card_pair):
        model, dev, val, config, stamp, card = card_pair
        names = {s.name for s in model.schema.features}
        assert {f for f, _ in card.importance_overall} == names
        assert set(card.importance_groups) == {g.name for g in card.groupings}
        for labels in card.importance_groups.values():
            assert len(labels) == 2
            for ranking in labels.values():
                assert {f for f, _ in ranking} == names

    def test_byte_identity_given_timestamp(self, card_pair):
        model, dev, val, config, stamp, card = card_pair
        again = build_model_card(model, dev, val, config=config, generated_at=stamp)
        assert again.as_dict() == card.as_dict()
        assert render_markdown(again) == render_markdown(card)
        assert render_html(again) == render_html(card)

    def test_timestamp_is_the_only_difference(self, card_pair):
        model, dev, val, config, stamp, card = card_pair
        later = build_model_card(model, dev, val, config=config,
                                 generated_at="2024-06-01T00:00:00+00:00")
        a, b = card.as_dict(), later.as_dict()
        assert a["provenance"].pop("generated_at") != b["provenance"].pop("generated_at")
        assert a == b

    def test_identical_dev_val_identical_columns(self, desk_model, cohort):
        card = build_model_card(desk_model, cohort, cohort,
                                config=CardConfig(importance_sample=40),
                                generated_at="2024-01-01T00:00:00+00:00")
        dev_tbl, val_tbl = card.cohorts
        a, b = dev_tbl.as_dict(), val_tbl.as_dict()
        assert a.pop("split") == "development" and b.pop("split") == "validation"
        assert a == b

    def test_empty_group_raises(self, desk_model, cohort):
        config = CardConfig(
            groupings=(Grouping(name="age", feature="age", threshold=17.0),),
            importance_sample=30,
        )
        with pytest.raises(DataError, match="empty group"):
            build_model_card(desk_model, cohort, cohort, config=config)

    def test_unlabeled_validation_rejected(self, desk_model, cohort):
        unlabeled = tiny_dataset(30, seed=3, labeled=False)
        model = single_split_model(unlabeled, feature="lab", threshold=3.0)
        with pytest.raises(DataError):
            build_model_card(model, unlabeled, unlabeled)


class TestRendering:
    def test_markdown_sections(self, card_pair):
        *_, card = card_pair
        md = render_markdown(card)
        assert "# Model Card" in md or "# " in md
        assert "AUROC" in md
        assert "| development |" in md or "development" in md
        top_feature = card.importance_overall[0][0]
        assert top_feature in md
        assert card.provenance["model_fingerprint"] in md

    def test_html_contains_svg_and_escapes(self, desk_model, cohort):
        text = CardText(
            overview="Uses <thresholds> & probability estimates.",
            data_source=DEFAULT_CARD_TEXT.data_source,
            intended_users=DEFAULT_CARD_TEXT.intended_users,
            use_cases=DEFAULT_CARD_TEXT.use_cases,
            limitations=DEFAULT_CARD_TEXT.limitations,
        )
        card = build_model_card(
            desk_model, cohort, cohort,
            config=CardConfig(importance_sample=40, text=text),
            generated_at="2024-01-01T00:00:00+00:00",
        )
        html = render_html(card)
        assert "<svg" in html
        assert "&lt;thresholds&gt;" in html
        assert "&amp;" in html
        assert "<thresholds>" not in html

    def test_as_dict_json_safe(self, card_pair):
        import json

        *_, card = card_pair
        payload = json.dumps(card.as_dict())
        assert json.loads(payload)["provenance"]["importance_sample"] == 80
