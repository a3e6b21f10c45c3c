/** Wire types for the riskscope HTTP JSON API. */

export type FeatureKind = "binary" | "categorical" | "numerical";

export interface FeatureSpec {
  name: string;
  display_name: string;
  kind: FeatureKind;
  levels?: string[];
  min?: number;
  max?: number;
  unit?: string;
  tags?: string[];
  mutable?: boolean;
  normal_range?: [number, number];
  precision?: number;
}

export interface CohortSchema {
  schema_version: number;
  outcomes: string[];
  features: FeatureSpec[];
}

/** A feature value as it travels over the wire. */
export type CellValue = number | string | null;

export interface RecordDocument {
  id: string;
  values: Record<string, CellValue>;
}

export interface ErrorEnvelope {
  code: string;
  message: string;
  field: string | null;
}

export type RiskMap = Record<string, number>;

export interface SchemaResponse {
  schema: CohortSchema;
  model_fingerprint: string;
}

export interface RecordsResponse {
  ids: string[];
  count: number;
  labeled: boolean;
  model_fingerprint: string;
}

export interface RecordResponse {
  record: RecordDocument;
  model_fingerprint: string;
}

export interface PredictResponse {
  record_id: string;
  risks: RiskMap;
  model_fingerprint: string;
}

export interface OverrideEcho {
  feature: string;
  original: CellValue;
  new: CellValue;
}

export interface WhatIfResponse {
  original: RiskMap;
  updated: RiskMap;
  overrides: OverrideEcho[];
  model_fingerprint: string;
}

export interface Contribution {
  feature: string;
  condition: string;
  value: number;
}

export interface Attribution {
  method: "LIME" | "SHAP";
  outcome: string;
  base_value: number;
  prediction: number;
  contributions: Contribution[];
  details?: Record<string, unknown>;
}

export interface AttributionResponse {
  attribution: Attribution;
  model_fingerprint: string;
}

export interface CfChange {
  feature: string;
  raw_value: number;
  new_value: number;
  unit: string;
  raw_display: string;
  new_display: string;
}

export interface CfResult {
  changes: CfChange[];
  original_risk: number;
  new_risk: number;
  valid: boolean;
  evaluations: number;
  elapsed_seconds: number;
}

export interface CounterfactualResponse {
  outcome: string;
  seed: number;
  results: CfResult[];
  model_fingerprint: string;
}

export interface SimilarityCriteria {
  age_feature?: string;
  age_tolerance?: number;
  exact_match?: string[];
  comorbidity_threshold?: number;
}

export interface CohortSummary {
  count: number;
  criteria: Required<SimilarityCriteria>;
  index_risks: RiskMap;
  mean_predicted: RiskMap | null;
  observed_prevalence: RiskMap | null;
  matched_ids: string[];
}

export interface SimilarResponse {
  summary: CohortSummary;
  model_fingerprint: string;
}

export type ImportanceRanking = Array<[string, number]>;

export interface CardGrouping {
  name: string;
  feature: string;
  level: string | null;
  threshold: number | null;
  label_a: string;
  label_b: string;
}

export interface CardCohortRow {
  split: string;
  n_patients: number;
  n_encounters: number;
  age_mean: number | null;
  age_sd: number | null;
  sex_counts: Record<string, number> | null;
  prevalence: RiskMap;
}

export interface AurocCurve {
  outcome: string;
  auroc: number | null;
  points: Array<[number, number]>;
}

export interface ModelCardDocument {
  text: Record<string, string>;
  model_info: Record<string, unknown>;
  cohorts: CardCohortRow[];
  auroc: Record<string, AurocCurve>;
  importance: {
    overall: ImportanceRanking;
    groups: Record<string, Record<string, ImportanceRanking>>;
  };
  groupings: CardGrouping[];
  provenance: Record<string, string>;
}

export interface ModelCardResponse {
  card: ModelCardDocument;
  model_fingerprint: string;
}
