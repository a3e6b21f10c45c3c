"""HTTP JSON API over an immutable (model, reference dataset) pair.

The engine state is swapped atomically by the admin reload endpoint;
request handlers grab one reference to it and never observe a partial
swap. Every response carries the model fingerprint so clients can
detect a swap mid-session. Heavy explanation work is bounded by a
semaphore sized at construction.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import threading
from pathlib import Path

from fastapi import Body, FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import HTMLResponse, JSONResponse

from .counterfactual import CfConstraints, CfSearchConfig, find_counterfactuals
from .errors import DataError, RiskscopeError
from .forest import RandomForest, load_model
from .lime import LimeBackground, LimeConfig, explain_lime
from .modelcard import CardConfig, ModelCard, build_model_card, render_html
from .schema import Dataset, PatientRecord, load_csv
from .shap import explain_shap_tree
from .similarity import SimilarityCriteria, cohort_summary
from .whatif import WhatIfRequest, whatif_predict


def derived_seed(document: object) -> int:
    """Deterministic seed from a request body, for reproducible replies."""
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"), default=str)
    return int.from_bytes(hashlib.sha256(canonical.encode()).digest()[:4], "big")


def _csv_has_labels(path: str | Path, schema) -> bool:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), [])
    return all(outcome in header for outcome in schema.outcomes)


class EngineState:
    """One loaded model plus its reference cohort; immutable after build."""

    def __init__(
        self,
        model: RandomForest,
        reference: Dataset,
        model_path: str | None = None,
        dataset_path: str | None = None,
        card_config: CardConfig | None = None,
    ):
        if reference.schema.to_dict() != model.schema.to_dict():
            raise DataError("reference dataset schema does not match the model")
        if len(reference) == 0:
            raise DataError("reference dataset is empty")
        self.model = model
        self.reference = reference
        self.model_path = model_path
        self.dataset_path = dataset_path
        self.card_config = card_config or CardConfig()
        self.background = LimeBackground.fit(reference)
        self.constraints = CfConstraints.from_training(reference)
        self._card: ModelCard | None = None
        self._card_html: str | None = None
        self._card_lock = threading.Lock()

    @classmethod
    def from_paths(
        cls, model_path: str, dataset_path: str, card_config: CardConfig | None = None
    ) -> "EngineState":
        model = load_model(model_path)
        has_labels = _csv_has_labels(dataset_path, model.schema)
        reference = load_csv(dataset_path, model.schema, has_labels=has_labels)
        return cls(model, reference, str(model_path), str(dataset_path), card_config)

    def card(self) -> ModelCard:
        """Card over a deterministic in-order 70/30 split of the reference."""
        with self._card_lock:
            if self._card is None:
                if not self.reference.labeled:
                    raise DataError("reference dataset has no labels; model card unavailable")
                n = len(self.reference)
                split = max(1, min(n - 1, int(n * 0.7)))
                if n < 2:
                    raise DataError("reference dataset too small for a model card")
                dev = self.reference.subset(range(split))
                val = self.reference.subset(range(split, n))
                self._card = build_model_card(self.model, dev, val, self.card_config)
            return self._card

    def card_html(self) -> str:
        card = self.card()
        with self._card_lock:
            if self._card_html is None:
                self._card_html = render_html(card)
            return self._card_html

    def resolve_record(self, document: object, field: str = "record") -> PatientRecord:
        """Parse {"values": {...}, "id"?} or look up {"id": ...} in the reference."""
        if not isinstance(document, dict):
            raise DataError(f"{field} must be an object", field=field)
        if "values" in document:
            values = document["values"]
            if not isinstance(values, dict):
                raise DataError(f"{field}.values must be an object", field=f"{field}.values")
            record_id = str(document.get("id", "inline"))
            return self.model.schema.record_from_mapping(record_id, values)
        if "id" in document:
            wanted = str(document["id"])
            for record in self.reference.records:
                if record.id == wanted:
                    return record
            raise DataError(f"unknown record id {wanted!r}", field=f"{field}.id")
        raise DataError(f"{field} needs values or an id", field=field)


def create_app(
    model: RandomForest | None = None,
    reference: Dataset | None = None,
    model_path: str | None = None,
    dataset_path: str | None = None,
    card_config: CardConfig | None = None,
    max_heavy: int = 2,
) -> FastAPI:
    """App factory; pass either live objects or artifact paths."""
    if model is not None and reference is not None:
        engine = EngineState(model, reference, model_path, dataset_path, card_config)
    elif model_path is not None and dataset_path is not None:
        engine = EngineState.from_paths(model_path, dataset_path, card_config)
    else:
        raise DataError("create_app needs (model, reference) or (model_path, dataset_path)")

    app = FastAPI(title="riskscope", docs_url=None, redoc_url=None)
    # read-only, credential-free API; let browser consoles call it cross-origin
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.engine = engine
    app.state.heavy = threading.Semaphore(max(1, max_heavy))

    @app.exception_handler(RiskscopeError)
    async def _on_riskscope_error(_: Request, exc: RiskscopeError):
        return JSONResponse(status_code=400, content=exc.envelope())

    def fingerprinted(engine: EngineState, body: dict) -> dict:
        body["model_fingerprint"] = engine.model.fingerprint()
        return body

    @app.get("/schema")
    def get_schema(request: Request):
        engine: EngineState = request.app.state.engine
        return fingerprinted(engine, {"schema": engine.model.schema.to_dict()})

    @app.get("/records")
    def get_records(request: Request):
        engine: EngineState = request.app.state.engine
        ids = [record.id for record in engine.reference.records]
        body = {"ids": ids, "count": len(ids), "labeled": engine.reference.labeled}
        return fingerprinted(engine, body)

    @app.get("/record/{record_id}")
    def get_record(request: Request, record_id: str):
        engine: EngineState = request.app.state.engine
        record = engine.resolve_record({"id": record_id})
        schema = engine.model.schema
        values = {spec.name: record.values[fi] for fi, spec in enumerate(schema.features)}
        return fingerprinted(engine, {"record": {"id": record.id, "values": values}})

    @app.get("/model-card")
    def get_model_card(request: Request):
        engine: EngineState = request.app.state.engine
        return fingerprinted(engine, {"card": engine.card().as_dict()})

    @app.get("/model-card.html")
    def get_model_card_html(request: Request):
        engine: EngineState = request.app.state.engine
        return HTMLResponse(engine.card_html())

    @app.post("/predict")
    def post_predict(request: Request, payload: dict = Body(...)):
        engine: EngineState = request.app.state.engine
        record = engine.resolve_record(payload.get("record"))
        scores = engine.model.predict_records([record])[0]
        risks = {o: float(scores[k]) for k, o in enumerate(engine.model.outcomes)}
        return fingerprinted(engine, {"record_id": record.id, "risks": risks})

    def _outcome(engine: EngineState, payload: dict) -> str:
        outcome = payload.get("outcome")
        if not isinstance(outcome, str) or outcome not in engine.model.schema.outcomes:
            raise DataError(f"unknown outcome {outcome!r}", field="outcome")
        return outcome

    @app.post("/explain/lime")
    def post_explain_lime(request: Request, payload: dict = Body(...)):
        engine: EngineState = request.app.state.engine
        record = engine.resolve_record(payload.get("record"))
        outcome = _outcome(engine, payload)
        cfg_doc = payload.get("config") or {}
        if not isinstance(cfg_doc, dict):
            raise DataError("config must be an object", field="config")
        allowed = {"n_samples", "kernel_width", "top_k", "ridge_lambda", "seed"}
        unknown = set(cfg_doc) - allowed
        if unknown:
            raise DataError(f"unknown config keys {sorted(unknown)}", field="config")
        for key in ("n_samples", "top_k", "seed"):
            if key in cfg_doc and (not isinstance(cfg_doc[key], int) or isinstance(cfg_doc[key], bool)):
                raise DataError(f"{key} must be an integer", field=f"config.{key}")
        for key in ("kernel_width", "ridge_lambda"):
            value = cfg_doc.get(key)
            if value is not None and not isinstance(value, (int, float)):
                raise DataError(f"{key} must be a number", field=f"config.{key}")
        cfg_doc.setdefault("seed", derived_seed(payload))
        config = LimeConfig(**cfg_doc)
        with request.app.state.heavy:
            attribution = explain_lime(
                engine.model, record, outcome, config, background=engine.background
            )
        return fingerprinted(engine, {"attribution": attribution.as_dict()})

    @app.post("/explain/shap")
    def post_explain_shap(request: Request, payload: dict = Body(...)):
        engine: EngineState = request.app.state.engine
        record = engine.resolve_record(payload.get("record"))
        outcome = _outcome(engine, payload)
        with request.app.state.heavy:
            attribution = explain_shap_tree(engine.model, record, outcome)
        return fingerprinted(engine, {"attribution": attribution.as_dict()})

    @app.post("/counterfactual")
    def post_counterfactual(request: Request, payload: dict = Body(...)):
        engine: EngineState = request.app.state.engine
        record = engine.resolve_record(payload.get("record"))
        outcome = _outcome(engine, payload)
        constraints = engine.constraints
        doc = payload.get("constraints") or {}
        if not isinstance(doc, dict):
            raise DataError("constraints must be an object", field="constraints")
        unknown = set(doc) - {"threshold", "direction"}
        if unknown:
            raise DataError(f"unknown constraint keys {sorted(unknown)}", field="constraints")
        if "threshold" in doc and not isinstance(doc["threshold"], (int, float)):
            raise DataError("threshold must be a number", field="constraints.threshold")
        if "direction" in doc and not isinstance(doc["direction"], str):
            raise DataError("direction must be a string", field="constraints.direction")
        if doc:
            constraints = dataclasses.replace(constraints, **doc)
        k = payload.get("k", 3)
        if not isinstance(k, int) or isinstance(k, bool):
            raise DataError("k must be an integer", field="k")
        budget = payload.get("budget", 20000)
        if not isinstance(budget, int) or isinstance(budget, bool):
            raise DataError("budget must be an integer", field="budget")
        if budget > 200_000:
            raise DataError("budget must be at most 200000", field="budget")
        seed = payload.get("seed")
        if seed is None:
            seed = derived_seed(payload)
        elif not isinstance(seed, int) or isinstance(seed, bool):
            raise DataError("seed must be an integer", field="seed")
        with request.app.state.heavy:
            results = find_counterfactuals(
                engine.model, record, outcome, constraints, k=k, seed=seed, budget=budget
            )
        return fingerprinted(
            engine,
            {
                "outcome": outcome,
                "seed": seed,
                "results": [r.as_dict() for r in results],
            },
        )

    @app.post("/whatif")
    def post_whatif(request: Request, payload: dict = Body(...)):
        engine: EngineState = request.app.state.engine
        overrides = payload.get("overrides", {})
        if not isinstance(overrides, dict):
            raise DataError("overrides must be an object", field="overrides")
        outcomes = payload.get("outcomes")
        if outcomes is not None:
            if not isinstance(outcomes, list) or not all(isinstance(o, str) for o in outcomes):
                raise DataError("outcomes must be a list of names", field="outcomes")
            outcomes = tuple(outcomes)
        if "record" in payload:
            record = engine.resolve_record(payload["record"])
            wi = WhatIfRequest(record=record, overrides=overrides, outcomes=outcomes)
        elif "record_id" in payload:
            wi = WhatIfRequest(
                record_id=str(payload["record_id"]), overrides=overrides, outcomes=outcomes
            )
        else:
            raise DataError("provide record or record_id", field="record")
        response = whatif_predict(engine.model, wi, reference=engine.reference)
        return fingerprinted(engine, response.as_dict())

    @app.post("/similar")
    def post_similar(request: Request, payload: dict = Body(...)):
        engine: EngineState = request.app.state.engine
        record = engine.resolve_record(payload.get("record"))
        doc = payload.get("criteria") or {}
        if not isinstance(doc, dict):
            raise DataError("criteria must be an object", field="criteria")
        allowed = {"age_feature", "age_tolerance", "exact_match", "comorbidity_threshold"}
        unknown = set(doc) - allowed
        if unknown:
            raise DataError(f"unknown criteria keys {sorted(unknown)}", field="criteria")
        if "age_feature" in doc and not isinstance(doc["age_feature"], str):
            raise DataError("age_feature must be a name", field="criteria.age_feature")
        for key in ("age_tolerance", "comorbidity_threshold"):
            if key in doc and not isinstance(doc[key], (int, float)):
                raise DataError(f"{key} must be a number", field=f"criteria.{key}")
        if "exact_match" in doc:
            if not isinstance(doc["exact_match"], list) or not all(
                isinstance(x, str) for x in doc["exact_match"]
            ):
                raise DataError("exact_match must be a list of names", field="criteria.exact_match")
            doc["exact_match"] = tuple(doc["exact_match"])
        criteria = SimilarityCriteria(**doc)
        with request.app.state.heavy:
            summary = cohort_summary(engine.model, engine.reference, record, criteria)
        return fingerprinted(engine, {"summary": summary.as_dict()})

    @app.post("/admin/reload")
    def post_reload(request: Request, payload: dict = Body(...)):
        model_path = payload.get("model_path")
        dataset_path = payload.get("dataset_path")
        if not isinstance(model_path, str):
            raise DataError("model_path is required", field="model_path")
        if not isinstance(dataset_path, str):
            raise DataError("dataset_path is required", field="dataset_path")
        engine: EngineState = request.app.state.engine
        fresh = EngineState.from_paths(model_path, dataset_path, engine.card_config)
        request.app.state.engine = fresh
        return {
            "model_fingerprint": fresh.model.fingerprint(),
            "dataset_fingerprint": fresh.reference.fingerprint(),
        }

    return app
