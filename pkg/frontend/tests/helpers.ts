/** Test scaffolding: fixture loading and a route-based fetch stub. */

import { readFileSync } from "node:fs";
import { join } from "node:path";

// vitest's jsdom environment rewrites import.meta.url, so resolve fixtures
// from the package root (vitest always runs with frontend/ as cwd).
export function fixture<T = any>(name: string): T {
  const path = join(process.cwd(), "tests", "fixtures", name);
  return JSON.parse(readFileSync(path, "utf8")) as T;
}

export interface Call {
  method: string;
  path: string;
  body: unknown;
}

type Reply =
  | unknown
  | { status: number; body: unknown }
  | ((body: unknown, call: Call) => unknown | Promise<unknown>);

function isStatusReply(x: unknown): x is { status: number; body: unknown } {
  return typeof x === "object" && x !== null && "status" in x && "body" in x;
}

/** Replaces globalThis.fetch with a router over `METHOD /path` keys. */
export class MockApi {
  readonly routes = new Map<string, Reply>();
  readonly calls: Call[] = [];
  private original: typeof fetch | null = null;

  route(key: string, reply: Reply): this {
    this.routes.set(key, reply);
    return this;
  }

  install(): void {
    this.original = globalThis.fetch;
    globalThis.fetch = (async (input: RequestInfo | URL, init?: RequestInit) => {
      const url = new URL(String(input));
      const method = (init?.method ?? "GET").toUpperCase();
      const call: Call = {
        method,
        path: url.pathname,
        body: init?.body ? JSON.parse(String(init.body)) : undefined,
      };
      this.calls.push(call);
      const reply = this.routes.get(`${method} ${url.pathname}`);
      if (reply === undefined) {
        return jsonResponse(404, {
          code: "io_error",
          message: `no route for ${method} ${url.pathname}`,
          field: null,
        });
      }
      const resolved =
        typeof reply === "function" ? await (reply as Function)(call.body, call) : reply;
      if (isStatusReply(resolved)) return jsonResponse(resolved.status, resolved.body);
      return jsonResponse(200, resolved);
    }) as typeof fetch;
  }

  restore(): void {
    if (this.original) globalThis.fetch = this.original;
  }
}

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

export function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export function texts(selector: string, root: ParentNode = document): string[] {
  return Array.from(root.querySelectorAll(selector)).map(
    (node) => node.textContent ?? "",
  );
}
