/** Typed client for the riskscope HTTP JSON API.
 *
 * Every displayed number in the console is traceable to one response from
 * this client; nothing is computed locally. Server-side failures surface as
 * ApiError carrying the {code, message, field} envelope.
 */

import type {
  AttributionResponse,
  CounterfactualResponse,
  ErrorEnvelope,
  ModelCardResponse,
  PredictResponse,
  RecordResponse,
  RecordsResponse,
  SchemaResponse,
  SimilarResponse,
  SimilarityCriteria,
  WhatIfResponse,
} from "./types.js";

export class ApiError extends Error {
  readonly code: string;
  readonly field: string | null;
  readonly status: number;

  constructor(status: number, envelope: ErrorEnvelope) {
    super(envelope.message);
    this.name = "ApiError";
    this.status = status;
    this.code = envelope.code;
    this.field = envelope.field ?? null;
  }
}

export interface RecordRef {
  id?: string;
  values?: Record<string, unknown>;
}

export class ApiClient {
  readonly baseUrl: string;

  constructor(baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async request<T>(
    path: string,
    init: RequestInit = {},
    signal?: AbortSignal,
  ): Promise<T> {
    const response = await fetch(this.baseUrl + path, { ...init, signal });
    let body: unknown;
    try {
      body = await response.json();
    } catch {
      throw new ApiError(response.status, {
        code: "io_error",
        message: `non-JSON response from ${path}`,
        field: null,
      });
    }
    if (!response.ok) {
      const env = body as Partial<ErrorEnvelope>;
      throw new ApiError(response.status, {
        code: env.code ?? "io_error",
        message: env.message ?? `request to ${path} failed`,
        field: env.field ?? null,
      });
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown, signal?: AbortSignal): Promise<T> {
    return this.request<T>(
      path,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(payload),
      },
      signal,
    );
  }

  getSchema(signal?: AbortSignal): Promise<SchemaResponse> {
    return this.request("/schema", {}, signal);
  }

  getRecords(signal?: AbortSignal): Promise<RecordsResponse> {
    return this.request("/records", {}, signal);
  }

  getRecord(id: string, signal?: AbortSignal): Promise<RecordResponse> {
    return this.request(`/record/${encodeURIComponent(id)}`, {}, signal);
  }

  getModelCard(signal?: AbortSignal): Promise<ModelCardResponse> {
    return this.request("/model-card", {}, signal);
  }

  predict(record: RecordRef, signal?: AbortSignal): Promise<PredictResponse> {
    return this.post("/predict", { record }, signal);
  }

  whatIf(
    record: RecordRef,
    overrides: Record<string, unknown>,
    signal?: AbortSignal,
  ): Promise<WhatIfResponse> {
    return this.post("/whatif", { record, overrides }, signal);
  }

  explainLime(
    record: RecordRef,
    outcome: string,
    config?: Record<string, unknown>,
    signal?: AbortSignal,
  ): Promise<AttributionResponse> {
    const payload: Record<string, unknown> = { record, outcome };
    if (config) payload.config = config;
    return this.post("/explain/lime", payload, signal);
  }

  explainShap(
    record: RecordRef,
    outcome: string,
    signal?: AbortSignal,
  ): Promise<AttributionResponse> {
    return this.post("/explain/shap", { record, outcome }, signal);
  }

  counterfactual(
    record: RecordRef,
    outcome: string,
    constraints: { threshold: number; direction: "increase" | "decrease" },
    options: { k?: number; budget?: number; seed?: number } = {},
    signal?: AbortSignal,
  ): Promise<CounterfactualResponse> {
    return this.post(
      "/counterfactual",
      { record, outcome, constraints, ...options },
      signal,
    );
  }

  similar(
    record: RecordRef,
    criteria?: SimilarityCriteria,
    signal?: AbortSignal,
  ): Promise<SimilarResponse> {
    const payload: Record<string, unknown> = { record };
    if (criteria) payload.criteria = criteria;
    return this.post("/similar", payload, signal);
  }
}
