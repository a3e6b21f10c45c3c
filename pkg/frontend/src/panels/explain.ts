/** Explanations panel: why (LIME / SHAP bars) and why not (counterfactuals).
 *
 * Bars are plain divs sized from the attribution values in the response —
 * positive contributions red (risk-raising), negative green (risk-lowering).
 * A failed request always leaves a message and a Retry button, never a blank
 * panel; zero counterfactuals render an explicit empty state.
 */

import { ApiError } from "../api.js";
import { clear, el, show } from "../dom.js";
import { pct, signed } from "../format.js";
import type { Attribution, CounterfactualResponse } from "../types.js";
import type { PanelContext } from "./whatif.js";

const MAX_BARS = 10;

export class ExplainPanel {
  readonly root: HTMLElement;
  private readonly ctx: PanelContext;
  private limeBox: HTMLElement;
  private shapBox: HTMLElement;
  private cfBox: HTMLElement;
  private outcomeSelect: HTMLSelectElement;
  private thresholdInput: HTMLInputElement;
  private directionSelect: HTMLSelectElement;
  lastLime: Attribution | null = null;
  lastShap: Attribution | null = null;
  lastCf: CounterfactualResponse | null = null;

  constructor(ctx: PanelContext) {
    this.ctx = ctx;
    this.limeBox = el("div", { class: "explain-lime" });
    this.shapBox = el("div", { class: "explain-shap" });
    this.cfBox = el("div", { class: "explain-cf" });
    this.outcomeSelect = el("select", { class: "explain-outcome" }) as HTMLSelectElement;
    this.thresholdInput = el("input", {
      type: "text", inputmode: "decimal", class: "cf-threshold", value: "0.5",
    }) as HTMLInputElement;
    this.directionSelect = el("select", { class: "cf-direction" }) as HTMLSelectElement;
    this.directionSelect.append(
      el("option", { value: "decrease" }, "decrease"),
      el("option", { value: "increase" }, "increase"),
    );

    const limeButton = el("button", { type: "button", class: "fetch-lime" }, "Fetch LIME");
    limeButton.addEventListener("click", () => void this.fetchLime());
    const shapButton = el("button", { type: "button", class: "fetch-shap" }, "Fetch SHAP");
    shapButton.addEventListener("click", () => void this.fetchShap());
    const cfButton = el("button", { type: "button", class: "fetch-cf" }, "Find counterfactuals");
    cfButton.addEventListener("click", () => void this.fetchCounterfactual());

    this.root = el(
      "section",
      { class: "panel panel-explain" },
      el("div", { class: "explain-controls" },
        el("label", {}, "Outcome ", this.outcomeSelect)),
      el("div", { class: "explain-why" },
        el("h3", {}, "Why — local attributions"),
        el("div", { class: "explain-buttons" }, limeButton, shapButton),
        this.limeBox,
        this.shapBox),
      el("div", { class: "explain-whynot" },
        el("h3", {}, "Why not — counterfactual suggestions"),
        el("div", { class: "cf-controls" },
          el("label", {}, "Threshold ", this.thresholdInput),
          el("label", {}, "Direction ", this.directionSelect),
          cfButton),
        this.cfBox),
    );
  }

  syncSchema(): void {
    clear(this.outcomeSelect);
    for (const outcome of this.ctx.state.schema?.outcomes ?? []) {
      this.outcomeSelect.append(el("option", { value: outcome }, outcome));
    }
  }

  get outcome(): string {
    return this.outcomeSelect.value;
  }

  set outcome(value: string) {
    this.outcomeSelect.value = value;
  }

  async fetchLime(): Promise<void> {
    await this.fetchAttribution("lime", this.limeBox);
  }

  async fetchShap(): Promise<void> {
    await this.fetchAttribution("shap", this.shapBox);
  }

  private async fetchAttribution(kind: "lime" | "shap", box: HTMLElement): Promise<void> {
    const { api, state, runner } = this.ctx;
    if (!state.record) return;
    const outcome = this.outcome;
    box.textContent = "Loading…";
    try {
      const response = await runner.run(`explain-${kind}`, (signal) =>
        kind === "lime"
          ? api.explainLime({ id: state.record!.id }, outcome, undefined, signal)
          : api.explainShap({ id: state.record!.id }, outcome, signal),
      );
      if (!response) return;
      state.observeFingerprint(response.model_fingerprint);
      if (kind === "lime") this.lastLime = response.attribution;
      else this.lastShap = response.attribution;
      this.renderAttribution(box, response.attribution);
    } catch (error) {
      this.renderFailure(box, error, () => void this.fetchAttribution(kind, box));
    }
  }

  private renderAttribution(box: HTMLElement, attribution: Attribution): void {
    clear(box);
    const shown = attribution.contributions.slice(0, MAX_BARS);
    const maxAbs = Math.max(...shown.map((c) => Math.abs(c.value)), 1e-12);
    const bars = el("div", { class: "bars" });
    for (const contribution of shown) {
      const width = Math.max(2, Math.round((100 * Math.abs(contribution.value)) / maxAbs));
      const direction = contribution.value >= 0 ? "positive" : "negative";
      bars.append(
        el(
          "div",
          { class: "bar-row", "data-feature": contribution.feature },
          el("span", { class: "bar-label" }, contribution.condition),
          el("span", { class: `bar ${direction}`, style: `width:${width}%` }),
          el("span", { class: "bar-value" }, signed(contribution.value)),
        ),
      );
    }
    box.append(
      el("div", { class: "attr-head" },
        `${attribution.method} — ${attribution.outcome}: predicted ${pct(attribution.prediction)} ` +
        `(base ${pct(attribution.base_value)})`),
      bars,
    );
  }

  async fetchCounterfactual(): Promise<void> {
    const { api, state, runner } = this.ctx;
    if (!state.record) return;
    const outcome = this.outcome;
    const threshold = Number(this.thresholdInput.value);
    const direction = this.directionSelect.value as "increase" | "decrease";
    this.cfBox.textContent = "Searching…";
    try {
      const response = await runner.run("counterfactual", (signal) =>
        api.counterfactual({ id: state.record!.id }, outcome, { threshold, direction }, {}, signal),
      );
      if (!response) return;
      state.observeFingerprint(response.model_fingerprint);
      this.lastCf = response;
      this.renderCounterfactuals(response);
    } catch (error) {
      this.renderFailure(this.cfBox, error, () => void this.fetchCounterfactual());
    }
  }

  private renderCounterfactuals(response: CounterfactualResponse): void {
    clear(this.cfBox);
    if (response.results.length === 0) {
      this.cfBox.append(
        el("div", { class: "cf-empty" },
          "No suggestion found: the search could not move this patient across " +
          "the threshold within its constraints. A suggestion is not guaranteed " +
          "for every record."),
      );
      return;
    }
    response.results.forEach((result, index) => {
      const body = el("tbody");
      for (const change of result.changes) {
        body.append(
          el("tr", { class: "cf-change", "data-feature": change.feature },
            el("td", {}, change.feature),
            el("td", { class: "cf-raw" }, change.raw_display),
            el("td", { class: "cf-new" }, change.new_display)),
        );
      }
      this.cfBox.append(
        el("div", { class: "cf-result" },
          el("h4", {},
            `Suggestion ${index + 1}: risk ${pct(result.original_risk)} → ${pct(result.new_risk)}`),
          el("p", { class: "cf-lead" }, "If the following feature values were changed:"),
          el("table", { class: "cf-table" },
            el("thead", {},
              el("tr", {},
                el("th", {}, "Feature"),
                el("th", {}, "Raw value"),
                el("th", {}, "New value"))),
            body)),
      );
    });
  }

  private renderFailure(box: HTMLElement, error: unknown, retry: () => void): void {
    clear(box);
    const message =
      error instanceof ApiError ? `${error.message} (${error.code})` : (error as Error).message;
    const button = el("button", { type: "button", class: "retry" }, "Retry");
    button.addEventListener("click", retry);
    box.append(el("div", { class: "fetch-error" }, `Request failed: ${message} `, button));
  }

  clearForRecord(): void {
    this.lastLime = null;
    this.lastShap = null;
    this.lastCf = null;
    clear(this.limeBox);
    clear(this.shapBox);
    clear(this.cfBox);
    show(this.limeBox, true);
    show(this.shapBox, true);
    show(this.cfBox, true);
  }
}
