/** Similar-patients panel: matching criteria, match count, and cohort risks
 * side by side with the index patient's risks. Zero matches keep the
 * criteria list visible with an explicit empty count. */

import { ApiError } from "../api.js";
import { clear, el } from "../dom.js";
import { pct } from "../format.js";
import type { CohortSummary, SimilarityCriteria } from "../types.js";
import type { PanelContext } from "./whatif.js";

export class CohortPanel {
  readonly root: HTMLElement;
  private readonly ctx: PanelContext;
  private resultBox: HTMLElement;
  private toleranceInput: HTMLInputElement;
  private comorbidityInput: HTMLInputElement;
  private exactBox: HTMLElement;
  lastSummary: CohortSummary | null = null;

  constructor(ctx: PanelContext) {
    this.ctx = ctx;
    this.resultBox = el("div", { class: "cohort-results" });
    this.toleranceInput = el("input", {
      type: "text", inputmode: "decimal", class: "crit-age", value: "5",
    }) as HTMLInputElement;
    this.comorbidityInput = el("input", {
      type: "text", inputmode: "decimal", class: "crit-comorbidity", value: "0.6",
    }) as HTMLInputElement;
    this.exactBox = el("span", { class: "crit-exact" });
    const fetchButton = el("button", { type: "button", class: "fetch-similar" }, "Find similar patients");
    fetchButton.addEventListener("click", () => void this.fetchSimilar());
    this.root = el(
      "section",
      { class: "panel panel-cohort" },
      el("div", { class: "cohort-criteria-form" },
        el("label", {}, "Age tolerance (years) ", this.toleranceInput),
        el("label", {}, "Comorbidity agreement ≥ ", this.comorbidityInput),
        el("label", {}, "Exact match on ", this.exactBox),
        fetchButton),
      this.resultBox,
    );
  }

  syncSchema(): void {
    clear(this.exactBox);
    const categorical = (this.ctx.state.schema?.features ?? []).filter(
      (f) => f.kind === "categorical",
    );
    const defaults = new Set(["race", "sex", "surgery_type"]);
    for (const spec of categorical) {
      const box = el("input", {
        type: "checkbox", class: "crit-exact-box", "data-feature": spec.name,
      }) as HTMLInputElement;
      box.checked = defaults.has(spec.name);
      this.exactBox.append(el("label", { class: "crit-exact-item" }, box, spec.name));
    }
  }

  get criteria(): SimilarityCriteria {
    const exact = Array.from(
      this.exactBox.querySelectorAll<HTMLInputElement>(".crit-exact-box"),
    )
      .filter((box) => box.checked)
      .map((box) => box.dataset.feature ?? "");
    return {
      age_tolerance: Number(this.toleranceInput.value),
      exact_match: exact,
      comorbidity_threshold: Number(this.comorbidityInput.value),
    };
  }

  async fetchSimilar(criteria?: SimilarityCriteria): Promise<void> {
    const { api, state, runner } = this.ctx;
    if (!state.record) return;
    this.resultBox.textContent = "Matching…";
    try {
      const response = await runner.run("similar", (signal) =>
        api.similar({ id: state.record!.id }, criteria ?? this.criteria, signal),
      );
      if (!response) return;
      state.observeFingerprint(response.model_fingerprint);
      this.lastSummary = response.summary;
      this.renderSummary(response.summary);
    } catch (error) {
      clear(this.resultBox);
      const message =
        error instanceof ApiError ? `${error.message} (${error.code})` : (error as Error).message;
      const retry = el("button", { type: "button", class: "retry" }, "Retry");
      retry.addEventListener("click", () => void this.fetchSimilar(criteria));
      this.resultBox.append(
        el("div", { class: "fetch-error" }, `Request failed: ${message} `, retry),
      );
    }
  }

  private renderSummary(summary: CohortSummary): void {
    clear(this.resultBox);
    const criteriaList = el(
      "ul",
      { class: "cohort-criteria" },
      el("li", {}, `age within ±${summary.criteria.age_tolerance} years`),
      el("li", {},
        summary.criteria.exact_match.length
          ? `exact match on ${summary.criteria.exact_match.join(", ")}`
          : "no exact-match features"),
      el("li", {},
        `comorbidity agreement ≥ ${Math.round(100 * summary.criteria.comorbidity_threshold)}%`),
    );
    const headline = el(
      "h3",
      { class: "cohort-count" },
      `${summary.count} case${summary.count === 1 ? "" : "s"} found`,
    );
    if (summary.count === 0) {
      this.resultBox.append(
        headline,
        el("p", { class: "cohort-empty" },
          "No past patients matched these criteria. Loosen them and search again."),
        el("h4", {}, "Matching criteria"),
        criteriaList,
      );
      return;
    }
    const body = el("tbody");
    for (const [outcome, indexRisk] of Object.entries(summary.index_risks)) {
      const mean = summary.mean_predicted?.[outcome];
      const observed = summary.observed_prevalence?.[outcome];
      body.append(
        el("tr", { class: "cohort-row", "data-outcome": outcome },
          el("td", {}, outcome),
          el("td", { class: "cohort-index" }, pct(indexRisk)),
          el("td", { class: "cohort-mean" }, mean === undefined || mean === null ? "—" : pct(mean)),
          el("td", { class: "cohort-observed" },
            observed === undefined || observed === null ? "—" : pct(observed))),
      );
    }
    this.resultBox.append(
      headline,
      el("h4", {}, "Matching criteria"),
      criteriaList,
      el("table", { class: "cohort-table" },
        el("thead", {},
          el("tr", {},
            el("th", {}, "Outcome"),
            el("th", {}, "This patient"),
            el("th", {}, "Cohort mean (predicted)"),
            el("th", {}, "Cohort observed"))),
        body),
    );
  }

  clearForRecord(): void {
    this.lastSummary = null;
    clear(this.resultBox);
  }
}
