/** Display formatting helpers; every number shown comes from an API response. */

import type { CellValue, FeatureSpec } from "./types.js";

export function pct(x: number): string {
  return `${(100 * x).toFixed(1)}%`;
}

export function signed(x: number): string {
  const text = x.toFixed(3);
  return x >= 0 ? `+${text}` : text;
}

export function formatValue(spec: FeatureSpec, value: CellValue): string {
  if (value === null || value === undefined) return "(missing)";
  if (spec.kind === "binary") return value === 1 || value === "1" ? "yes" : "no";
  if (spec.kind === "categorical") return String(value);
  const precision = spec.precision ?? 1;
  const num = typeof value === "number" ? value : Number(value);
  const text = Number.isFinite(num) ? num.toFixed(precision) : String(value);
  return spec.unit ? `${text} ${spec.unit}` : text;
}

export function deltaClass(delta: number): string {
  if (delta > 1e-12) return "up";
  if (delta < -1e-12) return "down";
  return "flat";
}
