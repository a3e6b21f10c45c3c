#!/usr/bin/env python3
"""Record API fixtures for the console's contract tests.

Builds a small deterministic model + cohort, serves them in-process, and
writes one JSON file per recorded exchange into frontend/tests/fixtures/.
The edit corpus replays every case against the live /whatif endpoint so the
committed accept/reject verdicts are server ground truth, not guesses.

Run from the repository root or frontend/:  python3 scripts/record_fixtures.py
"""

from __future__ import annotations

import json
import warnings
from pathlib import Path

from starlette.testclient import TestClient

import riskscope as rs
from riskscope.service import create_app

warnings.filterwarnings("ignore", message="Using `httpx`")

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

SEED_COHORT = 11
SEED_FOREST = 2
N_RECORDS = 300
INDEX_ID = "P005"
HIGH_RISK_ID = "P044"  # highest acute_kidney_injury risk in the first 80 records
OUTCOME = "acute_kidney_injury"

EDIT_CASES = [
    ("age", 50), ("age", 18), ("age", 100), ("age", 17.9), ("age", 101),
    ("age", 63.5), ("age", "63"), ("age", "abc"), ("age", ""), ("age", None),
    ("age", True),
    ("creatinine", None), ("creatinine", True), ("creatinine", False),
    ("creatinine", "1e0"), ("creatinine", "0_6"), ("creatinine", 9),
    ("creatinine", "2.5"), ("creatinine", 2.5),
    ("smoker", 0), ("smoker", 1), ("smoker", True), ("smoker", False),
    ("smoker", 1.0), ("smoker", 2), ("smoker", "1"), ("smoker", "yes"),
    ("smoker", None),
    ("sex", "male"), ("sex", "MALE"), ("sex", "other"), ("sex", 1), ("sex", None),
    ("bogus", 1),
]


def build_client() -> TestClient:
    schema = rs.default_schema()
    generator = rs.default_generator_config(schema)
    cohort = rs.generate_synthetic_cohort(
        schema, generator, n=N_RECORDS, seed=SEED_COHORT, id_prefix="P"
    )
    model = rs.train_forest(
        cohort.subset(range(240)),
        rs.ForestConfig(n_trees=20, max_depth=6, min_leaf=10),
        seed=SEED_FOREST,
    )
    return TestClient(create_app(model=model, reference=cohort))


def dump(name: str, body: object) -> None:
    path = FIXTURES / name
    path.write_text(json.dumps(body, indent=1, sort_keys=True) + "\n")
    print(f"wrote {path.relative_to(FIXTURES.parent.parent)}")


def scrub_cf(body: dict) -> dict:
    for result in body.get("results", []):
        result["elapsed_seconds"] = 0.0  # wall clock; keep the fixture stable
    return body


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    client = build_client()

    dump("schema.json", client.get("/schema").json())
    dump("records.json", client.get("/records").json())
    dump("record_index.json", client.get(f"/record/{INDEX_ID}").json())
    dump("record_highrisk.json", client.get(f"/record/{HIGH_RISK_ID}").json())
    dump("predict_index.json",
         client.post("/predict", json={"record": {"id": INDEX_ID}}).json())

    dump("whatif_empty.json",
         client.post("/whatif", json={"record": {"id": INDEX_ID}, "overrides": {}}).json())
    dump("whatif_edit.json",
         client.post("/whatif", json={
             "record": {"id": INDEX_ID},
             "overrides": {"creatinine": 2.5, "ckd": 1},
         }).json())

    dump("lime_index.json",
         client.post("/explain/lime", json={
             "record": {"id": INDEX_ID}, "outcome": OUTCOME,
             "config": {"n_samples": 400, "seed": 1},
         }).json())
    dump("shap_index.json",
         client.post("/explain/shap",
                     json={"record": {"id": INDEX_ID}, "outcome": OUTCOME}).json())

    high_risk = client.post("/predict", json={"record": {"id": HIGH_RISK_ID}}).json()
    threshold = round(high_risk["risks"][OUTCOME] - 0.1, 2)
    cf = client.post("/counterfactual", json={
        "record": {"id": HIGH_RISK_ID}, "outcome": OUTCOME,
        "constraints": {"threshold": threshold, "direction": "decrease"},
        "k": 2, "budget": 4000, "seed": 7,
    }).json()
    assert cf["results"], "expected a populated counterfactual fixture"
    dump("counterfactual_results.json", scrub_cf(cf))

    cf_empty = client.post("/counterfactual", json={
        "record": {"id": INDEX_ID}, "outcome": OUTCOME,
        "constraints": {"threshold": 0.9, "direction": "increase"},
        "k": 1, "budget": 300, "seed": 7,
    }).json()
    assert cf_empty["results"] == [], "expected an empty counterfactual fixture"
    dump("counterfactual_empty.json", cf_empty)

    dump("similar_default.json",
         client.post("/similar", json={"record": {"id": INDEX_ID}}).json())
    dump("similar_loose.json",
         client.post("/similar", json={
             "record": {"id": INDEX_ID},
             "criteria": {"age_tolerance": 15, "exact_match": ["sex"],
                          "comorbidity_threshold": 0.3},
         }).json())
    similar_empty = client.post("/similar", json={
        "record": {"id": INDEX_ID},
        "criteria": {"age_tolerance": 0.0, "exact_match": ["race", "sex", "surgery_type"],
                     "comorbidity_threshold": 1.0},
    }).json()
    assert similar_empty["summary"]["count"] == 0, "expected a zero-match fixture"
    dump("similar_empty.json", similar_empty)

    dump("model_card.json", client.get("/model-card").json())

    corpus = []
    for feature, value in EDIT_CASES:
        response = client.post("/whatif", json={
            "record": {"id": INDEX_ID}, "overrides": {feature: value},
        })
        entry: dict = {"feature": feature, "value": value}
        if response.status_code == 200:
            entry["expect"] = "accept"
        else:
            entry["expect"] = "reject"
            entry["field"] = response.json().get("field")
        corpus.append(entry)
    accepted = sum(1 for c in corpus if c["expect"] == "accept")
    print(f"edit corpus: {accepted} accepted, {len(corpus) - accepted} rejected")
    dump("edit_corpus.json", corpus)


if __name__ == "__main__":
    main()
