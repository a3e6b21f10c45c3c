import pytest

from riskscope.errors import DataError, PredictionError, SchemaError
from riskscope.whatif import WhatIfRequest, whatif_predict
from util import single_split_model, tiny_dataset


@pytest.fixture(scope="module")
def setup():
    ds = tiny_dataset(60, seed=0)
    model = single_split_model(ds, feature="lab", threshold=3.0, low=0.1, high=0.9)
    return model, ds


class TestRequest:
    def test_exactly_one_record_source(self):
        with pytest.raises(DataError):
            WhatIfRequest(record=None, record_id=None, overrides={})
        with pytest.raises(DataError):
            WhatIfRequest(record={"age": 40}, record_id="T01", overrides={})


class TestPredict:
    def test_identity_no_overrides(self, setup):
        model, ds = setup
        record = ds.records[0]
        response = whatif_predict(model, WhatIfRequest(record=record, overrides={}))
        assert response.original == response.updated
        assert response.overrides == ()
        direct = model.predict_records([record])[0]
        for k, outcome in enumerate(model.outcomes):
            assert response.original[outcome] == pytest.approx(float(direct[k]), abs=1e-12)

    def test_override_crosses_split(self, setup):
        model, ds = setup
        record = ds.records[0].replace(ds.schema, {"lab": 8.0})
        response = whatif_predict(
            model, WhatIfRequest(record=record, overrides={"lab": 1.0})
        )
        assert response.original["bad"] == pytest.approx(0.9, abs=1e-12)
        assert response.updated["bad"] == pytest.approx(0.1, abs=1e-12)
        (echo,) = response.overrides
        assert echo.feature == "lab"
        assert echo.original == 8.0
        assert echo.new == 1.0

    def test_multiple_overrides_echoed_in_schema_order(self, setup):
        model, ds = setup
        record = ds.records[0]
        response = whatif_predict(
            model,
            WhatIfRequest(record=record, overrides={"lab": 2.0, "age": 70.0, "flag": 1}),
        )
        assert [e.feature for e in response.overrides] == ["age", "flag", "lab"]

    def test_unknown_feature(self, setup):
        model, ds = setup
        with pytest.raises(SchemaError) as err:
            whatif_predict(
                model, WhatIfRequest(record=ds.records[0], overrides={"bogus": 1})
            )
        assert err.value.field == "bogus"

    def test_invalid_value(self, setup):
        model, ds = setup
        with pytest.raises(Exception) as err:
            whatif_predict(
                model, WhatIfRequest(record=ds.records[0], overrides={"age": 500.0})
            )
        assert getattr(err.value, "field", None) == "age"

    def test_outcome_filter(self, setup):
        model, ds = setup
        response = whatif_predict(
            model,
            WhatIfRequest(record=ds.records[0], overrides={"lab": 1.0},
                          outcomes=("worse",)),
        )
        assert set(response.original) == {"worse"}
        assert set(response.updated) == {"worse"}

    def test_unknown_outcome(self, setup):
        model, ds = setup
        with pytest.raises(PredictionError) as err:
            whatif_predict(
                model,
                WhatIfRequest(record=ds.records[0], overrides={}, outcomes=("nope",)),
            )
        assert err.value.field == "outcomes"

    def test_record_id_resolution(self, setup):
        model, ds = setup
        target = ds.records[7]
        response = whatif_predict(
            model, WhatIfRequest(record_id=target.id, overrides={}), reference=ds
        )
        direct = model.predict_records([target])[0]
        for k, outcome in enumerate(model.outcomes):
            assert response.original[outcome] == pytest.approx(float(direct[k]), abs=1e-12)

    def test_record_id_without_reference(self, setup):
        model, ds = setup
        with pytest.raises(DataError):
            whatif_predict(model, WhatIfRequest(record_id="T007", overrides={}))

    def test_unknown_record_id(self, setup):
        model, ds = setup
        with pytest.raises(DataError):
            whatif_predict(
                model, WhatIfRequest(record_id="ZZZ", overrides={}), reference=ds
            )

    def test_statelessness(self, setup):
        """The same request gives the same answer regardless of what ran before."""
        model, ds = setup
        record = ds.records[3]
        request = WhatIfRequest(record=record, overrides={"lab": 2.5})
        first = whatif_predict(model, request).as_dict()
        for other in ds.records[4:10]:
            whatif_predict(model, WhatIfRequest(record=other, overrides={"lab": 9.0}))
        assert whatif_predict(model, request).as_dict() == first

    def test_original_record_not_mutated(self, setup):
        model, ds = setup
        record = ds.records[0]
        before = tuple(record.values)
        whatif_predict(model, WhatIfRequest(record=record, overrides={"lab": 1.0}))
        assert tuple(record.values) == before

    def test_as_dict_shape(self, setup):
        model, ds = setup
        response = whatif_predict(
            model, WhatIfRequest(record=ds.records[0], overrides={"lab": 2.0})
        )
        d = response.as_dict()
        assert set(d) == {"original", "updated", "overrides"}
        assert d["overrides"][0]["feature"] == "lab"
