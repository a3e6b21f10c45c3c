/** Browser entry point: reads the API base URL and mounts the console. */

import { initApp } from "./app.js";

function mount(): void {
  const form = document.getElementById("connect-form") as HTMLFormElement | null;
  const input = document.getElementById("base-url") as HTMLInputElement | null;
  const root = document.getElementById("app");
  if (!form || !input || !root) return;
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    root.replaceChildren();
    const app = initApp(root, input.value || "http://127.0.0.1:8000");
    void app.start().catch((error) => {
      root.replaceChildren(
        Object.assign(document.createElement("p"), {
          className: "fetch-error",
          textContent: `Could not reach the API: ${String(error)}`,
        }),
      );
    });
  });
}

mount();
