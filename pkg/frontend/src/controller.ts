/**
 * Wires state, API, and DOM together. The DOM is re-rendered from state
 * after every change; mutations are optimistic with rollback on API
 * rejection (422 and friends).
 */

import { ApiError, MemoryApi } from "./api.js";
import type { MemoryFact, PatchFields } from "./api.js";
import { optimistic } from "./optimistic.js";
import {
  renderClearDialog,
  renderFactRows,
  renderNotice,
  renderPager,
  renderSummaryCards,
} from "./render.js";
import type { ClearScope, ConsoleState } from "./state.js";
import {
  applyLocalEdit,
  clearConfirmed,
  clearParams,
  initialState,
  restoreFact,
  toListParams,
} from "./state.js";

export interface ConsoleElements {
  summary: HTMLElement;
  tableBody: HTMLElement;
  pager: HTMLElement;
  notice: HTMLElement;
  dialogHost: HTMLElement;
}

export class ConsoleController {
  readonly state: ConsoleState;

  constructor(
    private readonly api: MemoryApi,
    userId: string,
    private readonly el: ConsoleElements,
  ) {
    this.state = initialState(userId);
  }

  // -- data loading ---------------------------------------------------------

  /** Fetch summary + current page. List reads are preview-only on the
   * server side (they never bump access counts). */
  async refresh(): Promise<void> {
    const [summary, page] = await Promise.all([
      this.api.summary(this.state.userId),
      this.api.listFacts(this.state.userId, toListParams(this.state.filters)),
    ]);
    this.state.summary = summary;
    this.state.facts = page.facts;
    this.state.total = page.total;
    this.render();
  }

  render(): void {
    this.el.summary.innerHTML = renderSummaryCards(this.state.summary);
    this.el.tableBody.innerHTML = renderFactRows(this.state);
    this.el.pager.innerHTML = renderPager(this.state);
    this.el.notice.innerHTML = renderNotice(this.state);
  }

  private notify(kind: "ok" | "error", text: string): void {
    this.state.notice = { kind, text };
    this.el.notice.innerHTML = renderNotice(this.state);
  }

  // -- table interactions ------------------------------------------------------

  toggleExpand(factId: string): void {
    if (this.state.expanded.has(factId)) {
      this.state.expanded.delete(factId);
    } else {
      this.state.expanded.add(factId);
    }
    this.render();
  }

  openEditor(factId: string): void {
    this.state.editing = factId;
    this.render();
  }

  closeEditor(): void {
    this.state.editing = null;
    this.render();
  }

  /** Inline edit: local apply, PATCH, rollback + toast on rejection. */
  async saveEdit(factId: string, fields: PatchFields): Promise<boolean> {
    this.state.editing = null;
    const ok = await optimistic<MemoryFact | null>({
      apply: () => applyLocalEdit(this.state, factId, fields as Partial<MemoryFact>),
      remote: async () => {
        const updated = await this.api.patchFact(factId, fields);
        applyLocalEdit(this.state, factId, updated);
      },
      revert: (previous) => {
        if (previous) restoreFact(this.state, previous);
      },
      onError: (error) => {
        this.notify("error", describeError(error));
      },
    });
    if (ok) this.notify("ok", "fact updated");
    this.render();
    return ok;
  }

  async deactivate(factId: string): Promise<boolean> {
    const ok = await optimistic<MemoryFact | null>({
      apply: () => applyLocalEdit(this.state, factId, { is_active: false }),
      remote: async () => {
        await this.api.deleteFact(factId);
      },
      revert: (previous) => {
        if (previous) restoreFact(this.state, previous);
      },
      onError: (error) => this.notify("error", describeError(error)),
    });
    if (ok) await this.refresh();  // counts changed
    return ok;
  }

  // -- clear-all dialog ------------------------------------------------------------

  /** Count the facts a scoped clear would hit (before the dialog opens). */
  async affectedByClear(scope: ClearScope): Promise<number> {
    const params = clearParams(scope);
    const page = await this.api.listFacts(this.state.userId, {
      ...params, is_active: "true", limit: 1,
    });
    return page.total;
  }

  async openClearDialog(scope: ClearScope, label: string): Promise<void> {
    const affected = await this.affectedByClear(scope);
    this.el.dialogHost.innerHTML = renderClearDialog(affected, label);
    const backdrop = this.el.dialogHost.querySelector("[data-dialog-backdrop]")!;
    const input = backdrop.querySelector<HTMLInputElement>("[data-confirm-input]")!;
    const confirm = backdrop.querySelector<HTMLButtonElement>("[data-confirm-clear]")!;
    const cancel = backdrop.querySelector<HTMLButtonElement>("[data-cancel-clear]")!;
    input.addEventListener("input", () => {
      confirm.disabled = affected === 0 || !clearConfirmed(input.value);
    });
    cancel.addEventListener("click", () => {
      this.el.dialogHost.innerHTML = "";
    });
    confirm.addEventListener("click", async () => {
      this.el.dialogHost.innerHTML = "";
      await this.clear(scope);
    });
  }

  async clear(scope: ClearScope): Promise<number> {
    try {
      const result = await this.api.clearFacts(this.state.userId, clearParams(scope));
      this.notify("ok", `cleared ${result.cleared} facts`);
      await this.refresh();
      return result.cleared;
    } catch (error) {
      this.notify("error", describeError(error));
      return 0;
    }
  }

  // -- filters ----------------------------------------------------------------------

  async setFilter(partial: Partial<ConsoleState["filters"]>): Promise<void> {
    Object.assign(this.state.filters, partial, { page: partial.page ?? 0 });
    await this.refresh();
  }

  async setPage(direction: "prev" | "next"): Promise<void> {
    const delta = direction === "prev" ? -1 : 1;
    this.state.filters.page = Math.max(0, this.state.filters.page + delta);
    await this.refresh();
  }
}

export function describeError(error: unknown): string {
  if (error instanceof ApiError) {
    if (Array.isArray(error.detail)) {
      const first = error.detail[0] as { field?: string; message?: string } | undefined;
      if (first?.field) return `rejected: ${first.field}: ${first.message ?? "invalid"}`;
    }
    if (typeof error.detail === "string") return `rejected: ${error.detail}`;
    return `request failed (${error.status})`;
  }
  return error instanceof Error ? error.message : String(error);
}
