/** Console shell: patient picker, stale-model banner, one tab per panel.
 *
 * The what-if table is the home panel; explanations, similar patients, and
 * the model card live behind tabs. All state flows through SessionState and
 * every request goes through PanelRunner so a superseded response can never
 * overwrite a newer one.
 */

import { ApiClient, ApiError } from "./api.js";
import { clear, el, show } from "./dom.js";
import { PanelRunner, SessionState } from "./state.js";
import { CardPanel } from "./panels/card.js";
import { CohortPanel } from "./panels/cohort.js";
import { ExplainPanel } from "./panels/explain.js";
import { WhatIfPanel, type PanelContext } from "./panels/whatif.js";

export interface App {
  state: SessionState;
  api: ApiClient;
  whatif: WhatIfPanel;
  explain: ExplainPanel;
  cohort: CohortPanel;
  card: CardPanel;
  banner: HTMLElement;
  picker: HTMLSelectElement;
  start(): Promise<void>;
  loadPatient(id: string): Promise<void>;
  showTab(name: TabName): void;
}

export type TabName = "whatif" | "explain" | "cohort" | "card";

export function initApp(root: HTMLElement, baseUrl: string): App {
  const api = new ApiClient(baseUrl);
  const state = new SessionState();
  const runner = new PanelRunner();
  const ctx: PanelContext = { api, state, runner };

  const whatif = new WhatIfPanel(ctx);
  const explain = new ExplainPanel(ctx);
  const cohort = new CohortPanel(ctx);
  const card = new CardPanel(ctx);

  const banner = el(
    "div",
    { class: "stale-banner hidden", role: "alert" },
    "The served model changed since this session started. Reload to continue with the new model.",
  );
  state.onStale = () => show(banner, true);

  const picker = el("select", { class: "patient-picker" }) as HTMLSelectElement;
  const loadButton = el("button", { type: "button", class: "patient-load" }, "Load patient");
  const statusLine = el("span", { class: "app-status" });

  const tabs: Record<TabName, { button: HTMLButtonElement; panel: HTMLElement }> = {
    whatif: { button: el("button", { type: "button", class: "tab", "data-tab": "whatif" }, "What-if"), panel: whatif.root },
    explain: { button: el("button", { type: "button", class: "tab", "data-tab": "explain" }, "Explanations"), panel: explain.root },
    cohort: { button: el("button", { type: "button", class: "tab", "data-tab": "cohort" }, "Similar patients"), panel: cohort.root },
    card: { button: el("button", { type: "button", class: "tab", "data-tab": "card" }, "Model card"), panel: card.root },
  };

  function showTab(name: TabName): void {
    for (const [tab, entry] of Object.entries(tabs) as Array<[TabName, (typeof tabs)[TabName]]>) {
      entry.button.classList.toggle("active", tab === name);
      show(entry.panel, tab === name);
    }
  }
  for (const [name, entry] of Object.entries(tabs) as Array<[TabName, (typeof tabs)[TabName]]>) {
    entry.button.addEventListener("click", () => showTab(name));
  }

  async function start(): Promise<void> {
    statusLine.textContent = "Loading schema…";
    const schemaResponse = await api.getSchema();
    state.schema = schemaResponse.schema;
    state.observeFingerprint(schemaResponse.model_fingerprint);
    explain.syncSchema();
    cohort.syncSchema();
    const records = await api.getRecords();
    state.observeFingerprint(records.model_fingerprint);
    state.recordIds = records.ids;
    clear(picker);
    for (const id of records.ids) picker.append(el("option", { value: id }, id));
    statusLine.textContent = `${records.count} reference patients · model ${
      (state.fingerprint ?? "").slice(0, 12)
    }…`;
  }

  async function loadPatient(id: string): Promise<void> {
    statusLine.textContent = `Loading ${id}…`;
    try {
      const response = await api.getRecord(id);
      state.observeFingerprint(response.model_fingerprint);
      state.selectRecord(response.record);
      whatif.renderForm();
      explain.clearForRecord();
      cohort.clearForRecord();
      statusLine.textContent = `Patient ${id} loaded.`;
    } catch (error) {
      statusLine.textContent =
        error instanceof ApiError ? `Could not load ${id}: ${error.message}` : String(error);
      throw error;
    }
  }

  loadButton.addEventListener("click", () => {
    if (picker.value) void loadPatient(picker.value);
  });

  root.append(
    el("header", { class: "app-header" },
      el("h1", {}, "riskscope console"),
      el("div", { class: "patient-bar" },
        el("label", {}, "Patient ", picker),
        loadButton,
        statusLine)),
    banner,
    el("nav", { class: "tab-bar" }, ...Object.values(tabs).map((t) => t.button)),
    el("main", { class: "panels" }, whatif.root, explain.root, cohort.root, card.root),
  );
  showTab("whatif");

  return { state, api, whatif, explain, cohort, card, banner, picker, start, loadPatient, showTab };
}
