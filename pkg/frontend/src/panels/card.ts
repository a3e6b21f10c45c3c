/** Model-card page: text sections, cohort table, per-outcome discrimination,
 * and global importance with one toggle group per subgroup pair. */

import { ApiError } from "../api.js";
import { clear, el } from "../dom.js";
import type { ImportanceRanking, ModelCardDocument } from "../types.js";
import type { PanelContext } from "./whatif.js";

const TOP_IMPORTANCE = 10;

export class CardPanel {
  readonly root: HTMLElement;
  private readonly ctx: PanelContext;
  private contentBox: HTMLElement;
  private importanceChart: HTMLElement | null = null;
  lastCard: ModelCardDocument | null = null;

  constructor(ctx: PanelContext) {
    this.ctx = ctx;
    this.contentBox = el("div", { class: "card-content" });
    const fetchButton = el("button", { type: "button", class: "fetch-card" }, "Load model card");
    fetchButton.addEventListener("click", () => void this.fetchCard());
    this.root = el(
      "section",
      { class: "panel panel-card" },
      el("div", { class: "card-actions" }, fetchButton),
      this.contentBox,
    );
  }

  async fetchCard(): Promise<void> {
    const { api, state, runner } = this.ctx;
    this.contentBox.textContent = "Loading…";
    try {
      const response = await runner.run("card", (signal) => api.getModelCard(signal));
      if (!response) return;
      state.observeFingerprint(response.model_fingerprint);
      this.lastCard = response.card;
      this.renderCard(response.card);
    } catch (error) {
      clear(this.contentBox);
      const message =
        error instanceof ApiError ? `${error.message} (${error.code})` : (error as Error).message;
      const retry = el("button", { type: "button", class: "retry" }, "Retry");
      retry.addEventListener("click", () => void this.fetchCard());
      this.contentBox.append(
        el("div", { class: "fetch-error" }, `Request failed: ${message} `, retry),
      );
    }
  }

  private renderCard(card: ModelCardDocument): void {
    clear(this.contentBox);

    const textSections = el("div", { class: "card-text" });
    for (const [key, value] of Object.entries(card.text)) {
      textSections.append(
        el("section", { class: "card-section", "data-section": key },
          el("h4", {}, key.replace(/_/g, " ")),
          el("p", {}, value)),
      );
    }

    const infoBody = el("tbody");
    for (const [key, value] of Object.entries(card.model_info)) {
      infoBody.append(
        el("tr", {},
          el("td", {}, key.replace(/_/g, " ")),
          el("td", {}, Array.isArray(value) ? value.join(", ") : String(value))),
      );
    }

    const cohortBody = el("tbody");
    const outcomes = Object.keys(card.auroc);
    const header = el("tr", {}, el("th", {}, "Statistic"));
    for (const row of card.cohorts) header.append(el("th", {}, row.split));
    const statRow = (label: string, cells: string[]) =>
      el("tr", {}, el("td", {}, label), ...cells.map((c) => el("td", {}, c)));
    cohortBody.append(
      statRow("patients", card.cohorts.map((r) => String(r.n_patients))),
      statRow("age mean (sd)", card.cohorts.map((r) =>
        r.age_mean === null ? "—" : `${r.age_mean.toFixed(1)} (${(r.age_sd ?? 0).toFixed(1)})`)),
    );
    for (const outcome of outcomes) {
      cohortBody.append(
        statRow(`${outcome} prevalence`, card.cohorts.map((r) =>
          `${(100 * (r.prevalence[outcome] ?? 0)).toFixed(1)}%`)),
      );
    }

    const aurocBody = el("tbody");
    for (const outcome of outcomes) {
      const curve = card.auroc[outcome];
      aurocBody.append(
        el("tr", { "data-outcome": outcome },
          el("td", {}, outcome),
          el("td", { class: "auroc-value" },
            curve?.auroc === null || curve?.auroc === undefined ? "n/a" : curve.auroc.toFixed(3))),
      );
    }

    this.importanceChart = el("div", { class: "importance-chart" });
    const toggles = el("div", { class: "importance-toggles" });
    const addToggle = (label: string, ranking: ImportanceRanking, group: string) => {
      const button = el("button", {
        type: "button", class: "importance-toggle", "data-group": group, "data-label": label,
      }, label);
      button.addEventListener("click", () => this.renderImportance(ranking, `${group}: ${label}`));
      return button;
    };
    toggles.append(
      el("span", { class: "toggle-group", "data-grouping": "overall" },
        addToggle("overall", card.importance.overall, "overall")),
    );
    for (const grouping of card.groupings) {
      const group = el("span", { class: "toggle-group", "data-grouping": grouping.name });
      for (const label of [grouping.label_a, grouping.label_b]) {
        const ranking = card.importance.groups[grouping.name]?.[label];
        if (ranking) group.append(addToggle(label, ranking, grouping.name));
      }
      toggles.append(group);
    }

    this.contentBox.append(
      textSections,
      el("section", { class: "card-section", "data-section": "model_info" },
        el("h4", {}, "Model"),
        el("table", { class: "card-info" }, infoBody)),
      el("section", { class: "card-section", "data-section": "cohorts" },
        el("h4", {}, "Cohorts"),
        el("table", { class: "card-cohorts" }, header, cohortBody)),
      el("section", { class: "card-section", "data-section": "auroc" },
        el("h4", {}, "Discrimination (AUROC)"),
        el("table", { class: "card-auroc" }, aurocBody)),
      el("section", { class: "card-section", "data-section": "importance" },
        el("h4", {}, "Global feature importance"),
        toggles,
        this.importanceChart),
      el("section", { class: "card-section", "data-section": "provenance" },
        el("h4", {}, "Provenance"),
        el("p", { class: "card-provenance" },
          `model ${card.provenance.model_fingerprint ?? ""} · generated ${card.provenance.generated_at ?? ""}`)),
    );
    this.renderImportance(card.importance.overall, "overall");
  }

  private renderImportance(ranking: ImportanceRanking, label: string): void {
    if (!this.importanceChart) return;
    clear(this.importanceChart);
    const shown = ranking.slice(0, TOP_IMPORTANCE);
    const maxValue = Math.max(...shown.map(([, v]) => v), 1e-12);
    this.importanceChart.append(el("div", { class: "importance-label" }, label));
    for (const [feature, value] of shown) {
      const width = Math.max(2, Math.round((100 * value) / maxValue));
      this.importanceChart.append(
        el("div", { class: "bar-row", "data-feature": feature },
          el("span", { class: "bar-label" }, feature),
          el("span", { class: "bar positive", style: `width:${width}%` }),
          el("span", { class: "bar-value" }, value.toExponential(2))),
      );
    }
  }
}
