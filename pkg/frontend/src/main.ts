/**
 * Entry point: connection settings (base URL, token, user id) come from
 * localStorage via the connect form; no build-time coupling to the API.
 */

import { MemoryApi } from "./api.js";
import { ConsoleController } from "./controller.js";
import type { ClearScope } from "./state.js";

const SETTINGS_KEY = "neusymms-console-settings";

interface Settings {
  baseUrl: string;
  token: string;
  userId: string;
}

function loadSettings(): Settings | null {
  try {
    const raw = localStorage.getItem(SETTINGS_KEY);
    return raw ? (JSON.parse(raw) as Settings) : null;
  } catch {
    return null;
  }
}

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function showConnectForm(previous: Settings | null): void {
  byId("connect").style.display = "block";
  byId("console").style.display = "none";
  if (previous) {
    byId<HTMLInputElement>("connect-url").value = previous.baseUrl;
    byId<HTMLInputElement>("connect-token").value = previous.token;
    byId<HTMLInputElement>("connect-user").value = previous.userId;
  }
}

async function start(settings: Settings): Promise<void> {
  const api = new MemoryApi({ baseUrl: settings.baseUrl, token: settings.token });
  try {
    await api.health();
  } catch {
    byId("connect-error").textContent = "cannot reach the API at that address";
    showConnectForm(settings);
    return;
  }
  byId("connect").style.display = "none";
  byId("console").style.display = "block";
  byId("console-user").textContent = settings.userId;

  const controller = new ConsoleController(api, settings.userId, {
    summary: byId("summary"),
    tableBody: byId("fact-rows"),
    pager: byId("pager"),
    notice: byId("notice"),
    dialogHost: byId("dialog-host"),
  });

  // filter bar
  byId<HTMLSelectElement>("filter-category").addEventListener("change", (e) => {
    void controller.setFilter({ category: (e.target as HTMLSelectElement).value as never });
  });
  byId<HTMLSelectElement>("filter-type").addEventListener("change", (e) => {
    void controller.setFilter({ memoryType: (e.target as HTMLSelectElement).value as never });
  });
  byId<HTMLSelectElement>("filter-scope").addEventListener("change", (e) => {
    void controller.setFilter({ scope: (e.target as HTMLSelectElement).value as never });
  });
  byId<HTMLSelectElement>("filter-activity").addEventListener("change", (e) => {
    void controller.setFilter({
      activity: (e.target as HTMLSelectElement).value as "active" | "inactive" | "all",
    });
  });
  let searchTimer: number | undefined;
  byId<HTMLInputElement>("filter-search").addEventListener("input", (e) => {
    const value = (e.target as HTMLInputElement).value;
    window.clearTimeout(searchTimer);
    searchTimer = window.setTimeout(() => {
      void controller.setFilter({ search: value });
    }, 250);
  });

  // clear-all menu
  byId<HTMLButtonElement>("clear-button").addEventListener("click", () => {
    const select = byId<HTMLSelectElement>("clear-scope");
    const value = select.value;
    let scope: ClearScope = { kind: "all" };
    let label = "all facts";
    if (value === "user") {
      scope = { kind: "user" };
      label = "user-scoped facts";
    } else if (value === "agent") {
      const agentId = window.prompt("agent id to clear?") ?? "";
      if (!agentId) return;
      scope = { kind: "agent", agentId };
      label = `agent ${agentId} facts`;
    } else if (value === "flow") {
      const flowId = window.prompt("flow id to clear?") ?? "";
      if (!flowId) return;
      scope = { kind: "flow", flowId };
      label = `flow ${flowId} facts`;
    }
    void controller.openClearDialog(scope, label);
  });

  // table interactions (delegated)
  byId("fact-rows").addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const expand = target.closest<HTMLElement>("[data-expand]");
    if (expand) {
      controller.toggleExpand(expand.dataset["expand"]!);
      return;
    }
    const edit = target.closest<HTMLElement>("[data-edit]");
    if (edit && edit.dataset["edit"]) {
      controller.openEditor(edit.dataset["edit"]);
      return;
    }
    const cancel = target.closest<HTMLElement>("[data-cancel-edit]");
    if (cancel) {
      controller.closeEditor();
      return;
    }
    const deactivate = target.closest<HTMLElement>("[data-deactivate]");
    if (deactivate && deactivate.dataset["deactivate"]) {
      void controller.deactivate(deactivate.dataset["deactivate"]);
    }
  });
  byId("fact-rows").addEventListener("submit", (event) => {
    const form = (event.target as HTMLElement).closest<HTMLFormElement>("[data-edit-form]");
    if (!form) return;
    event.preventDefault();
    const factId = form.dataset["editForm"]!;
    const data = new FormData(form);
    void controller.saveEdit(factId, {
      value: String(data.get("value") ?? ""),
      category: String(data.get("category")) as never,
      memory_type: String(data.get("memory_type")) as never,
    });
  });
  byId("pager").addEventListener("click", (event) => {
    const button = (event.target as HTMLElement).closest<HTMLElement>("[data-page]");
    if (button) void controller.setPage(button.dataset["page"] as "prev" | "next");
  });

  await controller.refresh();
}

export function boot(): void {
  const form = byId<HTMLFormElement>("connect-form");
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const settings: Settings = {
      baseUrl: byId<HTMLInputElement>("connect-url").value.trim(),
      token: byId<HTMLInputElement>("connect-token").value.trim(),
      userId: byId<HTMLInputElement>("connect-user").value.trim(),
    };
    localStorage.setItem(SETTINGS_KEY, JSON.stringify(settings));
    void start(settings);
  });
  byId<HTMLButtonElement>("disconnect").addEventListener("click", () => {
    localStorage.removeItem(SETTINGS_KEY);
    showConnectForm(null);
  });

  const saved = loadSettings();
  if (saved) {
    void start(saved);
  } else {
    showConnectForm(null);
  }
}

if (typeof document !== "undefined" && document.getElementById("connect-form")) {
  boot();
}
