/**
 * Console state and the pure logic around it: filter handling, paging,
 * and local fact-list edits for optimistic updates. No fetching here.
 */

import type { Category, ListParams, MemoryFact, MemoryType, Scope, Summary } from "./api.js";

export interface Filters {
  category: Category | "";
  memoryType: MemoryType | "";
  scope: Scope | "";
  search: string;
  activity: "active" | "inactive" | "all";
  page: number;
  pageSize: number;
}

export function defaultFilters(): Filters {
  return {
    category: "",
    memoryType: "",
    scope: "",
    search: "",
    activity: "active",
    page: 0,
    pageSize: 25,
  };
}

/** Translate UI filters into list-endpoint query parameters. */
export function toListParams(filters: Filters): ListParams {
  const params: ListParams = {
    is_active: filters.activity === "active" ? "true"
      : filters.activity === "inactive" ? "false" : "all",
    limit: filters.pageSize,
    offset: filters.page * filters.pageSize,
  };
  if (filters.category) params.category = filters.category;
  if (filters.memoryType) params.memory_type = filters.memoryType;
  if (filters.scope) params.scope = filters.scope;
  if (filters.search.trim()) params.search = filters.search.trim();
  return params;
}

export function pageCount(total: number, pageSize: number): number {
  return Math.max(1, Math.ceil(total / pageSize));
}

export interface ConsoleState {
  userId: string;
  summary: Summary | null;
  facts: MemoryFact[];
  total: number;
  filters: Filters;
  expanded: Set<string>;
  editing: string | null; // fact id with the inline editor open
  notice: { kind: "ok" | "error"; text: string } | null;
}

export function initialState(userId: string): ConsoleState {
  return {
    userId,
    summary: null,
    facts: [],
    total: 0,
    filters: defaultFilters(),
    expanded: new Set(),
    editing: null,
    notice: null,
  };
}

/** The three dashboard card values: active, long-term, short-term. */
export function summaryCards(summary: Summary | null): [number, number, number] {
  if (!summary) return [0, 0, 0];
  return [summary.active_count, summary.long_term_count, summary.short_term_count];
}

/** Replace one fact in the local list; returns the previous version for revert. */
export function applyLocalEdit(
  state: ConsoleState,
  factId: string,
  fields: Partial<MemoryFact>,
): MemoryFact | null {
  const index = state.facts.findIndex((f) => f.id === factId);
  if (index < 0) return null;
  const previous = state.facts[index]!;
  state.facts[index] = { ...previous, ...fields };
  return previous;
}

export function restoreFact(state: ConsoleState, previous: MemoryFact): void {
  const index = state.facts.findIndex((f) => f.id === previous.id);
  if (index >= 0) state.facts[index] = previous;
}

/** Scope options the clear dialog offers. */
export type ClearScope =
  | { kind: "all" }
  | { kind: "user" }
  | { kind: "agent"; agentId: string }
  | { kind: "flow"; flowId: string };

export function clearParams(scope: ClearScope): {
  scope?: Scope; agent_id?: string; flow_id?: string;
} {
  switch (scope.kind) {
    case "all":
      return {};
    case "user":
      return { scope: "user" };
    case "agent":
      return { scope: "agent", agent_id: scope.agentId };
    case "flow":
      return { scope: "flow", flow_id: scope.flowId };
  }
}

export const CONFIRM_WORD = "CLEAR";

export function clearConfirmed(typed: string): boolean {
  return typed.trim() === CONFIRM_WORD;
}
