/** Client-side edit validation mirroring the server's per-feature rules.
 *
 * The server canonicalizes one cell at a time: null is legal only for
 * lab-tagged features; binary accepts exactly 0/1 (boolean or numeric);
 * categorical accepts exactly a declared level string; numerical accepts
 * anything float()-coercible that lands inside [min, max]. The shared
 * fixture corpus in tests/fixtures/edit_corpus.json pins the agreement.
 */

import type { CellValue, CohortSchema, FeatureSpec } from "./types.js";

export type Verdict =
  | { ok: true; value: CellValue }
  | { ok: false; message: string };

export function isLab(spec: FeatureSpec): boolean {
  return (spec.tags ?? []).includes("lab");
}

/** Python float() grammar for strings: optional sign, inf/nan words, or a
 * decimal literal with optional exponent and underscore digit grouping. */
const FLOAT_WORDS = /^[+-]?(inf(inity)?|nan)$/i;
const FLOAT_LITERAL =
  /^[+-]?(\d(_?\d)*(\.(\d(_?\d)*)?)?|\.\d(_?\d)*)([eE][+-]?\d(_?\d)*)?$/;

export function coerceNumber(raw: unknown): number | undefined {
  if (typeof raw === "boolean") return raw ? 1 : 0;
  if (typeof raw === "number") return raw;
  if (typeof raw === "string") {
    const text = raw.trim();
    if (FLOAT_WORDS.test(text)) {
      const word = text.replace(/^[+-]/, "").toLowerCase();
      if (word === "nan") return NaN;
      return text.startsWith("-") ? -Infinity : Infinity;
    }
    if (!FLOAT_LITERAL.test(text)) return undefined;
    return Number(text.replace(/_/g, ""));
  }
  return undefined;
}

export function validateValue(spec: FeatureSpec, raw: unknown): Verdict {
  if (raw === null || raw === undefined) {
    if (isLab(spec)) return { ok: true, value: null };
    return {
      ok: false,
      message: `missing value for non-lab feature '${spec.name}'`,
    };
  }
  if (spec.kind === "binary") {
    if (raw === 0 || raw === 1 || raw === false || raw === true) {
      return { ok: true, value: typeof raw === "boolean" ? Number(raw) : raw };
    }
    return { ok: false, message: "binary value must be 0 or 1" };
  }
  if (spec.kind === "categorical") {
    if (typeof raw === "string" && (spec.levels ?? []).includes(raw)) {
      return { ok: true, value: raw };
    }
    return { ok: false, message: `'${String(raw)}' is not a declared level` };
  }
  const value = coerceNumber(raw);
  if (value === undefined) {
    return { ok: false, message: `'${String(raw)}' is not a number` };
  }
  if (!Number.isFinite(value)) {
    return { ok: false, message: "value must be finite" };
  }
  const lo = spec.min ?? -Infinity;
  const hi = spec.max ?? Infinity;
  if (!(lo <= value && value <= hi)) {
    return { ok: false, message: `${value} outside [${lo}, ${hi}]` };
  }
  return { ok: true, value };
}

export interface OverrideVerdict {
  feature: string;
  verdict: Verdict;
}

/** Validate a whole override map; unknown feature names are rejections. */
export function validateOverrides(
  schema: CohortSchema,
  overrides: Record<string, unknown>,
): OverrideVerdict[] {
  const byName = new Map(schema.features.map((f) => [f.name, f]));
  return Object.entries(overrides).map(([feature, raw]) => {
    const spec = byName.get(feature);
    if (!spec) {
      return {
        feature,
        verdict: { ok: false, message: `unknown feature '${feature}'` },
      };
    }
    return { feature, verdict: validateValue(spec, raw) };
  });
}
