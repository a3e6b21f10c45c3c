/** What-if panel: one editable row per feature, before/after risk readout.
 *
 * Edits are validated client-side with the same rules the server applies;
 * an invalid row shows its constraint message inline and disables submit.
 * After a successful submit the rows for changed features move to the top
 * of the table and the readout lists original vs updated risk per outcome.
 */

import type { ApiClient } from "../api.js";
import { ApiError } from "../api.js";
import { clear, el, show } from "../dom.js";
import { deltaClass, formatValue, pct } from "../format.js";
import type { PanelRunner, SessionState } from "../state.js";
import type { CellValue, FeatureSpec, WhatIfResponse } from "../types.js";
import { isLab, validateValue } from "../validation.js";

export interface PanelContext {
  api: ApiClient;
  state: SessionState;
  runner: PanelRunner;
}

interface Row {
  spec: FeatureSpec;
  element: HTMLTableRowElement;
  input: HTMLInputElement | HTMLSelectElement;
  error: HTMLElement;
  /** Raw widget value -> candidate override (unknown until validated). */
  read(): unknown;
  write(value: CellValue): void;
}

export class WhatIfPanel {
  readonly root: HTMLElement;
  private readonly ctx: PanelContext;
  private rows = new Map<string, Row>();
  private invalid = new Map<string, string>();
  private submitButton: HTMLButtonElement;
  private statusBox: HTMLElement;
  private resultsBox: HTMLElement;
  private tableBody: HTMLTableSectionElement;
  lastResponse: WhatIfResponse | null = null;

  constructor(ctx: PanelContext) {
    this.ctx = ctx;
    this.submitButton = el("button", { class: "wi-submit", type: "button" }, "Run what-if");
    this.submitButton.addEventListener("click", () => void this.submit());
    this.statusBox = el("div", { class: "wi-status" });
    this.resultsBox = el("div", { class: "wi-results hidden" });
    this.tableBody = el("tbody");
    this.root = el(
      "section",
      { class: "panel panel-whatif" },
      el("p", { class: "panel-hint" },
        "Adjust feature values below, then run to see how the risks respond."),
      el(
        "table",
        { class: "wi-table" },
        el(
          "thead",
          {},
          el("tr", {},
            el("th", {}, "Feature"),
            el("th", {}, "Current value"),
            el("th", {}, "New value"),
            el("th", {}, "")),
        ),
        this.tableBody,
      ),
      el("div", { class: "wi-actions" }, this.submitButton),
      this.statusBox,
      this.resultsBox,
    );
  }

  /** Rebuild the form for the currently selected record. */
  renderForm(): void {
    const { schema } = this.ctx.state;
    clear(this.tableBody);
    clear(this.resultsBox);
    show(this.resultsBox, false);
    this.rows.clear();
    this.invalid.clear();
    this.statusBox.textContent = "";
    this.lastResponse = null;
    if (!schema || !this.ctx.state.record) return;
    for (const spec of schema.features) {
      const row = this.buildRow(spec);
      this.rows.set(spec.name, row);
      this.tableBody.append(row.element);
    }
    this.refreshSubmit();
  }

  private buildRow(spec: FeatureSpec): Row {
    const original = this.ctx.state.originalValue(spec.name);
    const error = el("span", { class: "wi-error" });
    let input: HTMLInputElement | HTMLSelectElement;
    let read: () => unknown;
    let write: (value: CellValue) => void;

    if (spec.kind === "binary") {
      const box = el("input", { type: "checkbox", class: "wi-input" }) as HTMLInputElement;
      box.checked = original === 1;
      input = box;
      read = () => (box.checked ? 1 : 0);
      write = (value) => {
        box.checked = value === 1;
      };
    } else if (spec.kind === "categorical") {
      const select = el("select", { class: "wi-input" }) as HTMLSelectElement;
      for (const level of spec.levels ?? []) {
        select.append(el("option", { value: level }, level));
      }
      if (typeof original === "string") select.value = original;
      input = select;
      read = () => select.value;
      write = (value) => {
        if (typeof value === "string") select.value = value;
      };
    } else {
      const text = el("input", {
        type: "text",
        inputmode: "decimal",
        class: "wi-input",
        placeholder: isLab(spec) ? "(missing)" : "",
      }) as HTMLInputElement;
      text.value = original === null ? "" : String(original);
      input = text;
      read = () => {
        const trimmed = text.value.trim();
        return trimmed === "" ? null : trimmed;
      };
      write = (value) => {
        text.value = value === null ? "" : String(value);
      };
    }

    const reset = el("button", { class: "wi-reset", type: "button" }, "Reset");
    const element = el(
      "tr",
      { class: "wi-row", "data-feature": spec.name },
      el("td", { class: "wi-name" },
        spec.display_name, spec.unit ? el("span", { class: "wi-unit" }, ` (${spec.unit})`) : null),
      el("td", { class: "wi-current" }, formatValue(spec, original)),
      el("td", { class: "wi-widget" }, input, error),
      el("td", {}, reset),
    ) as HTMLTableRowElement;

    const row: Row = { spec, element, input, error, read, write };
    input.addEventListener("change", () => this.onEdit(row));
    input.addEventListener("input", () => this.onEdit(row));
    reset.addEventListener("click", () => this.resetRow(row));
    return row;
  }

  private onEdit(row: Row): void {
    const { spec } = row;
    const raw = row.read();
    const original = this.ctx.state.originalValue(spec.name);
    const verdict = validateValue(spec, raw);
    if (!verdict.ok) {
      this.invalid.set(spec.name, verdict.message);
      this.ctx.state.overrides.delete(spec.name);
      row.error.textContent = verdict.message;
      row.element.classList.add("invalid");
      this.refreshSubmit();
      return;
    }
    this.invalid.delete(spec.name);
    row.error.textContent = "";
    row.element.classList.remove("invalid");
    if (verdict.value === original) {
      this.ctx.state.overrides.delete(spec.name);
      row.element.classList.remove("edited");
    } else {
      this.ctx.state.overrides.set(spec.name, verdict.value);
      row.element.classList.add("edited");
    }
    this.refreshSubmit();
  }

  private resetRow(row: Row): void {
    const original = this.ctx.state.originalValue(row.spec.name);
    row.write(original);
    this.invalid.delete(row.spec.name);
    this.ctx.state.overrides.delete(row.spec.name);
    row.error.textContent = "";
    row.element.classList.remove("invalid", "edited");
    this.refreshSubmit();
  }

  private refreshSubmit(): void {
    this.submitButton.disabled = this.invalid.size > 0 || !this.ctx.state.record;
  }

  get overridesPayload(): Record<string, CellValue> {
    return Object.fromEntries(this.ctx.state.overrides);
  }

  async submit(): Promise<void> {
    const { state, api, runner } = this.ctx;
    if (!state.record) return;
    const payload = this.overridesPayload;
    this.statusBox.textContent = "Scoring…";
    try {
      const response = await runner.run("whatif", (signal) =>
        api.whatIf({ id: state.record!.id }, payload, signal),
      );
      if (!response) return; // superseded by a newer edit
      state.observeFingerprint(response.model_fingerprint);
      this.lastResponse = response;
      this.statusBox.textContent = "";
      this.renderResults(response);
      this.reorderChangedFirst(response.overrides.map((o) => o.feature));
    } catch (error) {
      if (error instanceof ApiError) {
        this.statusBox.textContent = "";
        const row = error.field ? this.rows.get(error.field) : undefined;
        if (row) {
          row.error.textContent = error.message;
          row.element.classList.add("invalid");
        } else {
          this.statusBox.textContent = `Request failed: ${error.message}`;
        }
        return;
      }
      this.statusBox.textContent = `Request failed: ${(error as Error).message}`;
    }
  }

  private renderResults(response: WhatIfResponse): void {
    const { schema } = this.ctx.state;
    clear(this.resultsBox);
    const body = el("tbody");
    for (const outcome of schema?.outcomes ?? Object.keys(response.original)) {
      const before = response.original[outcome];
      const after = response.updated[outcome];
      if (before === undefined || after === undefined) continue;
      const delta = after - before;
      body.append(
        el(
          "tr",
          { class: `wi-risk-row ${deltaClass(delta)}`, "data-outcome": outcome },
          el("td", {}, outcome),
          el("td", { class: "wi-original" }, pct(before)),
          el("td", { class: "wi-updated" }, pct(after)),
          el("td", { class: "wi-delta" },
            delta === 0 ? "—" : `${delta > 0 ? "+" : ""}${(100 * delta).toFixed(1)} pts`),
        ),
      );
    }
    this.resultsBox.append(
      el("h3", {}, "Risk response"),
      el(
        "table",
        { class: "wi-risks" },
        el("thead", {},
          el("tr", {},
            el("th", {}, "Outcome"),
            el("th", {}, "Original"),
            el("th", {}, "Updated"),
            el("th", {}, "Change"))),
        body,
      ),
    );
    show(this.resultsBox, true);
  }

  /** Figure-style ordering: rows for changed features float to the top. */
  private reorderChangedFirst(changed: string[]): void {
    const changedSet = new Set(changed);
    const ordered: HTMLTableRowElement[] = [];
    for (const name of changed) {
      const row = this.rows.get(name);
      if (row) ordered.push(row.element);
    }
    for (const spec of this.ctx.state.schema?.features ?? []) {
      if (!changedSet.has(spec.name)) {
        const row = this.rows.get(spec.name);
        if (row) ordered.push(row.element);
      }
    }
    for (const element of ordered) this.tableBody.append(element);
  }

  get featureOrder(): string[] {
    return Array.from(this.tableBody.querySelectorAll(".wi-row")).map(
      (node) => (node as HTMLElement).dataset.feature ?? "",
    );
  }
}
