/** End-to-end smoke test against a live server.
 *
 * Builds a small cohort and model with the CLI, serves them over HTTP, then
 * drives the real console code (fetch -> state -> DOM) through one scripted
 * session: a what-if edit, a LIME fetch, a counterfactual search, a
 * similar-patients query, and a model-card view. Every panel must populate
 * from live responses; no fixtures and no mocked fetch are involved.
 */

import { spawn, type ChildProcessWithoutNullStreams } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { initApp, type App } from "../src/app.js";

const OUTCOME = "acute_kidney_injury";

function runCli(args: string[], cwd: string): Promise<void> {
  return new Promise((resolve, reject) => {
    const child = spawn("riskscope", args, { cwd });
    let output = "";
    child.stdout.on("data", (chunk) => (output += chunk));
    child.stderr.on("data", (chunk) => (output += chunk));
    child.on("error", reject);
    child.on("exit", (code) => {
      if (code === 0) resolve();
      else reject(new Error(`riskscope ${args[0]} exited ${code}:\n${output}`));
    });
  });
}

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.on("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (address === null || typeof address === "string") {
        reject(new Error("no port assigned"));
        return;
      }
      probe.close(() => resolve(address.port));
    });
  });
}

async function waitReady(url: string, server: ChildProcessWithoutNullStreams, logs: () => string): Promise<void> {
  const deadline = Date.now() + 120_000;
  while (Date.now() < deadline) {
    if (server.exitCode !== null) {
      throw new Error(`server exited early (${server.exitCode}):\n${logs()}`);
    }
    try {
      const response = await fetch(url);
      if (response.ok) return;
    } catch {
      // not listening yet
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
  throw new Error(`server not ready within 120s:\n${logs()}`);
}

async function mapChunked<T, R>(
  items: T[],
  size: number,
  fn: (item: T) => Promise<R>,
): Promise<R[]> {
  const results: R[] = [];
  for (let i = 0; i < items.length; i += size) {
    const chunk = items.slice(i, i + size);
    results.push(...(await Promise.all(chunk.map(fn))));
  }
  return results;
}

let workDir = "";
let server: ChildProcessWithoutNullStreams | null = null;
let serverLog = "";
let baseUrl = "";

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "riskscope-e2e-"));
  await runCli(["synth", "--out", "cohort.csv", "--n", "300", "--seed", "11"], workDir);
  await runCli(
    [
      "train", "--data", "cohort.csv", "--out", "model.rsf",
      "--trees", "20", "--max-depth", "6", "--min-leaf", "10", "--seed", "2",
    ],
    workDir,
  );
  const port = await freePort();
  baseUrl = `http://127.0.0.1:${port}`;
  server = spawn(
    "riskscope",
    ["serve", "--model", "model.rsf", "--data", "cohort.csv", "--port", String(port)],
    { cwd: workDir },
  );
  server.stdout.on("data", (chunk) => (serverLog += chunk));
  server.stderr.on("data", (chunk) => (serverLog += chunk));
  await waitReady(`${baseUrl}/schema`, server, () => serverLog);
});

afterAll(async () => {
  if (server && server.exitCode === null) {
    const exited = new Promise<void>((resolve) => server!.once("exit", () => resolve()));
    server.kill("SIGTERM");
    await Promise.race([
      exited,
      new Promise<void>((resolve) => setTimeout(resolve, 5_000)),
    ]);
    if (server.exitCode === null) server.kill("SIGKILL");
  }
  if (workDir) rmSync(workDir, { recursive: true, force: true });
});

describe("live console session", () => {
  it(
    "populates every panel from live responses",
    { timeout: 180_000 },
    async () => {
      document.body.innerHTML = "";
      const root = document.createElement("div");
      document.body.append(root);
      const app: App = initApp(root, baseUrl);

      await app.start();
      expect(app.picker.options.length).toBe(300);
      expect(document.querySelector(".app-status")!.textContent).toContain(
        "300 reference patients",
      );

      // --- what-if: one edit, before/after risks from the live model ---
      await app.loadPatient("P005");
      const creatinine = document.querySelector<HTMLInputElement>(
        '.wi-row[data-feature="creatinine"] .wi-input',
      )!;
      creatinine.value = "2.5";
      creatinine.dispatchEvent(new Event("input", { bubbles: true }));
      expect(app.whatif.overridesPayload).toEqual({ creatinine: 2.5 });
      await app.whatif.submit();

      const riskRows = document.querySelectorAll(".wi-risk-row");
      expect(riskRows.length).toBeGreaterThanOrEqual(10);
      for (const row of riskRows) {
        expect(row.querySelector(".wi-original")!.textContent).toMatch(/^\d+(\.\d+)?%$/);
        expect(row.querySelector(".wi-updated")!.textContent).toMatch(/^\d+(\.\d+)?%$/);
      }
      expect(app.whatif.lastResponse!.overrides).toEqual([
        { feature: "creatinine", original: expect.any(Number), new: 2.5 },
      ]);
      expect(app.whatif.featureOrder[0]).toBe("creatinine");

      // --- why: one LIME fetch, bars from the live explanation ---
      app.explain.outcome = OUTCOME;
      await app.explain.fetchLime();
      const limeBars = document.querySelectorAll(".explain-lime .bar-row");
      expect(limeBars.length).toBeGreaterThanOrEqual(1);
      expect(limeBars.length).toBeLessThanOrEqual(10);
      expect(document.querySelector(".explain-lime .attr-head")!.textContent).toContain("LIME");
      expect(app.explain.lastLime!.method).toBe("LIME");

      // --- why not: counterfactual search on the highest-risk patient ---
      const ids = app.state.recordIds;
      const risks = await mapChunked(ids, 25, async (id) => {
        const response = await app.api.predict({ id });
        return { id, risk: response.risks[OUTCOME] ?? 0 };
      });
      risks.sort((a, b) => b.risk - a.risk);
      const target = risks[0]!;
      expect(target.risk).toBeGreaterThan(0.2); // sanity: cohort has high-risk cases

      await app.loadPatient(target.id);
      const threshold = Math.max(0.05, Math.round((target.risk - 0.1) * 100) / 100);
      document.querySelector<HTMLInputElement>(".cf-threshold")!.value = String(threshold);
      app.explain.outcome = OUTCOME;
      await app.explain.fetchCounterfactual();

      const suggestions = document.querySelectorAll(".cf-result");
      expect(suggestions.length).toBeGreaterThanOrEqual(1);
      expect(document.querySelectorAll(".cf-change").length).toBeGreaterThanOrEqual(1);
      expect(document.querySelector(".cf-result h4")!.textContent).toMatch(/risk \d/);
      for (const result of app.explain.lastCf!.results) {
        expect(result.valid).toBe(true);
        expect(result.new_risk).toBeLessThan(threshold);
      }

      // --- what else: similar patients under loosened criteria ---
      await app.cohort.fetchSimilar({
        age_tolerance: 15,
        exact_match: ["sex"],
        comorbidity_threshold: 0.3,
      });
      const countText = document.querySelector(".cohort-count")!.textContent!;
      expect(countText).toMatch(/^[1-9]\d* cases? found$/);
      expect(document.querySelectorAll(".cohort-row").length).toBeGreaterThanOrEqual(10);
      expect(document.querySelector(".cohort-index")!.textContent).toMatch(/%$/);

      // --- how: model card view ---
      await app.card.fetchCard();
      expect(document.querySelector('.card-section[data-section="auroc"]')).not.toBeNull();
      expect(document.querySelectorAll(".card-auroc tr[data-outcome]").length).toBe(10);
      expect(document.querySelectorAll(".toggle-group").length).toBe(4);
      expect(
        document.querySelectorAll(".importance-chart .bar-row").length,
      ).toBeGreaterThanOrEqual(1);
      expect(app.card.lastCard!.cohorts.length).toBe(2);

      // one model served throughout: the fingerprint never changed
      expect(app.state.stale).toBe(false);
    },
  );
});
