import { describe, expect, it } from "vitest";

import {
  applyLocalEdit,
  clearConfirmed,
  clearParams,
  defaultFilters,
  initialState,
  pageCount,
  restoreFact,
  summaryCards,
  toListParams,
} from "../src/state.js";
import { fact } from "./fakeServer.js";

describe("toListParams", () => {
  it("maps defaults to an active-only first page", () => {
    expect(toListParams(defaultFilters())).toEqual({
      is_active: "true", limit: 25, offset: 0,
    });
  });

  it("carries filters and paging", () => {
    const filters = { ...defaultFilters(), category: "skill" as const,
                      memoryType: "long_term" as const, scope: "user" as const,
                      search: "  Go ", activity: "inactive" as const, page: 2 };
    expect(toListParams(filters)).toEqual({
      is_active: "false", limit: 25, offset: 50,
      category: "skill", memory_type: "long_term", scope: "user", search: "Go",
    });
  });

  it("activity=all passes through", () => {
    expect(toListParams({ ...defaultFilters(), activity: "all" }).is_active).toBe("all");
  });
});

describe("summaryCards", () => {
  it("defaults to zeros for a missing summary", () => {
    expect(summaryCards(null)).toEqual([0, 0, 0]);
  });

  it("orders active, long-term, short-term", () => {
    expect(summaryCards({
      active_count: 4, long_term_count: 4, short_term_count: 0,
      by_category: {}, by_scope: {},
    })).toEqual([4, 4, 0]);
  });
});

describe("local edits", () => {
  it("applies and restores", () => {
    const state = initialState("alice");
    const original = fact({ value: "Google" });
    state.facts = [original];
    const previous = applyLocalEdit(state, original.id, { value: "Alphabet" });
    expect(state.facts[0]!.value).toBe("Alphabet");
    restoreFact(state, previous!);
    expect(state.facts[0]!.value).toBe("Google");
  });

  it("returns null for unknown ids", () => {
    const state = initialState("alice");
    expect(applyLocalEdit(state, "missing", { value: "x" })).toBeNull();
  });
});

describe("clear helpers", () => {
  it("builds scoped params", () => {
    expect(clearParams({ kind: "all" })).toEqual({});
    expect(clearParams({ kind: "user" })).toEqual({ scope: "user" });
    expect(clearParams({ kind: "agent", agentId: "a1" }))
      .toEqual({ scope: "agent", agent_id: "a1" });
    expect(clearParams({ kind: "flow", flowId: "f1" }))
      .toEqual({ scope: "flow", flow_id: "f1" });
  });

  it("requires the typed confirmation word", () => {
    expect(clearConfirmed("CLEAR")).toBe(true);
    expect(clearConfirmed("  CLEAR ")).toBe(true);
    expect(clearConfirmed("clear")).toBe(false);
    expect(clearConfirmed("")).toBe(false);
  });
});

describe("pageCount", () => {
  it("rounds up and never drops below one", () => {
    expect(pageCount(0, 25)).toBe(1);
    expect(pageCount(25, 25)).toBe(1);
    expect(pageCount(26, 25)).toBe(2);
  });
});
