/** Session state shared by the panels, plus per-panel request sequencing. */

import type { CellValue, CohortSchema, RecordDocument } from "./types.js";

/** At most one live request per panel; a response that was superseded by a
 * newer submission on the same panel is discarded by sequence number. */
export class PanelRunner {
  private seqs = new Map<string, number>();
  private controllers = new Map<string, AbortController>();

  /** Runs fn for the panel; resolves undefined when the result went stale. */
  async run<T>(
    panel: string,
    fn: (signal: AbortSignal) => Promise<T>,
  ): Promise<T | undefined> {
    const seq = (this.seqs.get(panel) ?? 0) + 1;
    this.seqs.set(panel, seq);
    this.controllers.get(panel)?.abort();
    const controller = new AbortController();
    this.controllers.set(panel, controller);
    try {
      const result = await fn(controller.signal);
      if (this.seqs.get(panel) !== seq) return undefined;
      return result;
    } catch (error) {
      if (this.seqs.get(panel) !== seq) return undefined;
      if ((error as { name?: string }).name === "AbortError") return undefined;
      throw error;
    }
  }
}

export class SessionState {
  schema: CohortSchema | null = null;
  recordIds: string[] = [];
  record: RecordDocument | null = null;
  /** Pending, client-validated edits keyed by feature name. */
  overrides = new Map<string, CellValue>();
  fingerprint: string | null = null;
  stale = false;
  onStale: (() => void) | null = null;

  /** Track the fingerprint embedded in every response; flag a swap. */
  observeFingerprint(fp: string | undefined): void {
    if (!fp) return;
    if (this.fingerprint === null) {
      this.fingerprint = fp;
      return;
    }
    if (fp !== this.fingerprint && !this.stale) {
      this.stale = true;
      this.onStale?.();
    }
  }

  selectRecord(record: RecordDocument): void {
    this.record = record;
    this.overrides.clear();
  }

  originalValue(feature: string): CellValue {
    return this.record?.values[feature] ?? null;
  }
}
