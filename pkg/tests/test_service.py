import json
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from fastapi.testclient import TestClient

from riskscope.forest import save_model
from riskscope.schema import save_csv
from riskscope.service import create_app, derived_seed


@pytest.fixture(scope="module")
def artifacts(request, tmp_path_factory):
    model = request.getfixturevalue("desk_model")
    cohort = request.getfixturevalue("cohort")
    root = tmp_path_factory.mktemp("svc")
    model_path = root / "model.rsf"
    data_path = root / "cohort.csv"
    save_model(model, model_path)
    save_csv(cohort, data_path)
    return model, cohort, str(model_path), str(data_path)


@pytest.fixture(scope="module")
def client(artifacts):
    model, cohort, model_path, data_path = artifacts
    app = create_app(model=model, reference=cohort, model_path=model_path,
                     dataset_path=data_path)
    with TestClient(app) as c:
        yield c


def record_payload(cohort, i):
    schema = cohort.schema
    rec = cohort.records[i]
    values = {}
    for fi, spec in enumerate(schema.features):
        if rec.values[fi] is not None:
            values[spec.name] = rec.values[fi]
    return {"values": values, "id": rec.id}


class TestReads:
    def test_schema(self, client, artifacts):
        model = artifacts[0]
        r = client.get("/schema")
        assert r.status_code == 200
        body = r.json()
        assert body["schema"] == model.schema.to_dict()
        assert body["model_fingerprint"] == model.fingerprint()

    def test_records_listing(self, client, artifacts):
        _, cohort, _, _ = artifacts
        r = client.get("/records")
        assert r.status_code == 200
        body = r.json()
        assert body["ids"] == [rec.id for rec in cohort.records]
        assert body["count"] == len(cohort)
        assert body["labeled"] is True
        assert "model_fingerprint" in body

    def test_record_fetch_round_trips_values(self, client, artifacts):
        _, cohort, _, _ = artifacts
        schema = cohort.schema
        rec = cohort.records[3]
        r = client.get(f"/record/{rec.id}")
        assert r.status_code == 200
        doc = r.json()["record"]
        assert doc["id"] == rec.id
        assert doc["values"] == {
            spec.name: rec.values[fi] for fi, spec in enumerate(schema.features)
        }
        # the returned document is accepted verbatim as an inline record
        p = client.post("/predict", json={"record": doc})
        assert p.status_code == 200
        q = client.post("/predict", json={"record": {"id": rec.id}})
        assert p.json()["risks"] == q.json()["risks"]

    def test_record_fetch_unknown_id(self, client):
        r = client.get("/record/nope")
        assert r.status_code == 400
        body = r.json()
        assert body["code"] == "data"
        assert body["field"] == "record.id"

    def test_model_card_cached_and_fingerprinted(self, client, artifacts):
        model = artifacts[0]
        a = client.get("/model-card")
        assert a.status_code == 200
        body = a.json()
        assert body["model_fingerprint"] == model.fingerprint()
        card = body["card"]
        assert card["provenance"]["model_fingerprint"] == model.fingerprint()
        b = client.get("/model-card")
        assert b.json() == body  # cached: byte-identical on repeat

    def test_model_card_html(self, client):
        r = client.get("/model-card.html")
        assert r.status_code == 200
        assert r.headers["content-type"].startswith("text/html")
        assert "<svg" in r.text


class TestPredict:
    def test_inline_record(self, client, artifacts):
        model, cohort = artifacts[0], artifacts[1]
        r = client.post("/predict", json={"record": record_payload(cohort, 0)})
        assert r.status_code == 200
        body = r.json()
        direct = model.predict_records([cohort.records[0]])[0]
        for k, outcome in enumerate(model.outcomes):
            assert body["risks"][outcome] == pytest.approx(float(direct[k]))
        assert body["record_id"] == cohort.records[0].id
        assert body["model_fingerprint"] == model.fingerprint()

    def test_by_reference_id(self, client, artifacts):
        cohort = artifacts[1]
        rec = cohort.records[7]
        r = client.post("/predict", json={"record": {"id": rec.id}})
        assert r.status_code == 200
        assert r.json()["record_id"] == rec.id

    def test_unknown_id_envelope(self, client):
        r = client.post("/predict", json={"record": {"id": "NOPE"}})
        assert r.status_code == 400
        body = r.json()
        assert set(body) == {"code", "message", "field"}
        assert body["code"] == "data"
        assert body["field"] == "record.id"

    def test_invalid_value_envelope(self, client, artifacts):
        cohort = artifacts[1]
        payload = record_payload(cohort, 0)
        payload["values"]["age"] = 500.0
        r = client.post("/predict", json={"record": payload})
        assert r.status_code == 400
        assert r.json()["field"] == "age"


class TestExplain:
    def test_lime_derived_seed_reproducible(self, client, artifacts):
        model, cohort = artifacts[0], artifacts[1]
        payload = {
            "record": {"id": cohort.records[3].id},
            "outcome": model.outcomes[0],
            "config": {"n_samples": 400, "top_k": 5},
        }
        a = client.post("/explain/lime", json=payload)
        b = client.post("/explain/lime", json=payload)
        assert a.status_code == 200
        assert a.json() == b.json()
        att = a.json()["attribution"]
        assert att["method"] == "LIME"
        assert len(att["contributions"]) == 5
        assert att["details"]["seed"] == derived_seed(payload)

    def test_lime_explicit_seed_wins(self, client, artifacts):
        model, cohort = artifacts[0], artifacts[1]
        payload = {
            "record": {"id": cohort.records[3].id},
            "outcome": model.outcomes[0],
            "config": {"n_samples": 400, "seed": 42},
        }
        r = client.post("/explain/lime", json=payload)
        assert r.json()["attribution"]["details"]["seed"] == 42

    def test_lime_config_validation(self, client, artifacts):
        model, cohort = artifacts[0], artifacts[1]
        base = {"record": {"id": cohort.records[0].id}, "outcome": model.outcomes[0]}
        r = client.post("/explain/lime", json=dict(base, config={"bogus": 1}))
        assert r.status_code == 400 and r.json()["field"] == "config"
        r = client.post("/explain/lime", json=dict(base, config={"n_samples": "many"}))
        assert r.status_code == 400 and r.json()["field"] == "config.n_samples"
        r = client.post("/explain/lime", json=dict(base, outcome="nope"))
        assert r.status_code == 400 and r.json()["field"] == "outcome"

    def test_shap_local_accuracy_over_http(self, client, artifacts):
        model, cohort = artifacts[0], artifacts[1]
        rec = cohort.records[11]
        r = client.post(
            "/explain/shap",
            json={"record": {"id": rec.id}, "outcome": model.outcomes[0]},
        )
        assert r.status_code == 200
        att = r.json()["attribution"]
        total = att["base_value"] + sum(c["value"] for c in att["contributions"])
        assert total == pytest.approx(att["prediction"], abs=1e-9)


class TestCounterfactual:
    def test_happy_path_and_derived_seed(self, client, artifacts):
        model, cohort = artifacts[0], artifacts[1]
        outcome = model.outcomes[0]
        risks = model.predict_matrix(model.encoder.encode_dataset(cohort))[:, 0]
        i = int(np.argmax(risks))
        threshold = round(max(0.05, float(risks[i]) - 0.15), 2)
        payload = {
            "record": {"id": cohort.records[i].id},
            "outcome": outcome,
            "constraints": {"threshold": threshold, "direction": "decrease"},
            "k": 2,
        }
        a = client.post("/counterfactual", json=payload)
        assert a.status_code == 200, a.text
        body = a.json()
        assert body["seed"] == derived_seed(payload)
        for result in body["results"]:
            assert result["valid"]
            assert result["new_risk"] < threshold
        b = client.post("/counterfactual", json=payload)
        bb, aa = b.json(), json.loads(json.dumps(body))
        for doc in (aa, bb):
            for result in doc["results"]:
                result.pop("elapsed_seconds")
        assert aa == bb

    def test_already_across_envelope(self, client, artifacts):
        model, cohort = artifacts[0], artifacts[1]
        risks = model.predict_matrix(model.encoder.encode_dataset(cohort))[:, 0]
        i = int(np.argmin(risks))
        threshold = min(0.95, float(risks[i]) + 0.2)
        r = client.post(
            "/counterfactual",
            json={
                "record": {"id": cohort.records[i].id},
                "outcome": model.outcomes[0],
                "constraints": {"threshold": round(threshold, 2)},
            },
        )
        assert r.status_code == 400
        assert r.json()["code"] == "counterfactual"

    def test_constraint_validation(self, client, artifacts):
        model, cohort = artifacts[0], artifacts[1]
        base = {"record": {"id": cohort.records[0].id}, "outcome": model.outcomes[0]}
        r = client.post("/counterfactual", json=dict(base, constraints={"nope": 1}))
        assert r.status_code == 400 and r.json()["field"] == "constraints"
        r = client.post("/counterfactual", json=dict(base, k="three"))
        assert r.status_code == 400 and r.json()["field"] == "k"
        r = client.post("/counterfactual", json=dict(base, budget="lots"))
        assert r.status_code == 400 and r.json()["field"] == "budget"
        r = client.post("/counterfactual", json=dict(base, budget=10**7))
        assert r.status_code == 400 and r.json()["field"] == "budget"
        r = client.post("/counterfactual", json=dict(base, budget=1))
        assert r.status_code == 400 and r.json()["code"] == "counterfactual"


class TestWhatIfAndSimilar:
    def test_whatif_by_record_id(self, client, artifacts):
        model, cohort = artifacts[0], artifacts[1]
        lab = model.schema.mutable_features[0]
        midpoint = (lab.minimum + lab.maximum) / 2
        rec = cohort.records[2]
        r = client.post(
            "/whatif",
            json={"record_id": rec.id, "overrides": {lab.name: midpoint}},
        )
        assert r.status_code == 200
        body = r.json()
        assert body["overrides"][0]["feature"] == lab.name
        assert set(body["original"]) == set(model.outcomes)

    def test_whatif_unknown_feature(self, client, artifacts):
        cohort = artifacts[1]
        r = client.post(
            "/whatif",
            json={"record_id": cohort.records[0].id, "overrides": {"bogus": 1}},
        )
        assert r.status_code == 400
        assert r.json()["field"] == "bogus"

    def test_similar_summary(self, client, artifacts):
        model, cohort = artifacts[0], artifacts[1]
        rec = cohort.records[5]
        r = client.post("/similar", json={"record": {"id": rec.id}})
        assert r.status_code == 200
        summary = r.json()["summary"]
        assert rec.id not in summary["matched_ids"]
        assert set(summary["index_risks"]) == set(model.outcomes)

    def test_similar_criteria_validation(self, client, artifacts):
        cohort = artifacts[1]
        base = {"record": {"id": cohort.records[0].id}}
        r = client.post("/similar", json=dict(base, criteria={"bogus": 1}))
        assert r.status_code == 400 and r.json()["field"] == "criteria"
        r = client.post("/similar", json=dict(base, criteria={"age_tolerance": "wide"}))
        assert r.status_code == 400
        assert r.json()["field"] == "criteria.age_tolerance"

    def test_similar_custom_criteria(self, client, artifacts):
        cohort = artifacts[1]
        r = client.post(
            "/similar",
            json={
                "record": {"id": cohort.records[0].id},
                "criteria": {"age_tolerance": 50.0, "exact_match": ["sex"],
                             "comorbidity_threshold": 0.0},
            },
        )
        assert r.status_code == 200
        assert r.json()["summary"]["criteria"]["exact_match"] == ["sex"]


class TestReloadAndConcurrency:
    def test_reload_swaps_engine(self, artifacts):
        model, cohort, model_path, data_path = artifacts
        app = create_app(model=model, reference=cohort)
        with TestClient(app) as client:
            before = app.state.engine
            r = client.post(
                "/admin/reload",
                json={"model_path": model_path, "dataset_path": data_path},
            )
            assert r.status_code == 200
            body = r.json()
            assert body["model_fingerprint"] == model.fingerprint()
            assert app.state.engine is not before
            follow = client.get("/schema")
            assert follow.json()["model_fingerprint"] == model.fingerprint()

    def test_reload_failure_keeps_engine(self, artifacts):
        model, cohort, model_path, data_path = artifacts
        app = create_app(model=model, reference=cohort)
        with TestClient(app) as client:
            before = app.state.engine
            r = client.post(
                "/admin/reload",
                json={"model_path": "/does/not/exist.rsf", "dataset_path": data_path},
            )
            assert r.status_code == 400
            assert app.state.engine is before
            assert client.get("/schema").status_code == 200

    def test_concurrent_requests_match_serial(self, client, artifacts):
        model, cohort = artifacts[0], artifacts[1]
        payloads = [
            {
                "record": {"id": cohort.records[i].id},
                "outcome": model.outcomes[i % len(model.outcomes)],
                "config": {"n_samples": 300, "seed": i},
            }
            for i in range(8)
        ]
        serial = [client.post("/explain/lime", json=p).json() for p in payloads]
        with ThreadPoolExecutor(max_workers=8) as pool:
            parallel = list(
                pool.map(lambda p: client.post("/explain/lime", json=p).json(), payloads)
            )
        assert parallel == serial
