import { describe, expect, it } from "vitest";

import {
  escapeHtml,
  renderClearDialog,
  renderFactRows,
  renderSummaryCards,
} from "../src/render.js";
import { initialState } from "../src/state.js";
import { fact } from "./fakeServer.js";

describe("escapeHtml", () => {
  it("neutralizes markup in fact values", () => {
    expect(escapeHtml(`<img onerror="x"> & 'quotes'`))
      .toBe("&lt;img onerror=&quot;x&quot;&gt; &amp; &#39;quotes&#39;");
  });
});

describe("renderSummaryCards", () => {
  it("shows the three card values and category chips", () => {
    const html = renderSummaryCards({
      active_count: 4, long_term_count: 4, short_term_count: 0,
      by_category: { personal: 2, skill: 2 }, by_scope: { user: 4 },
    });
    expect(html).toContain('data-card="card-active">4<');
    expect(html).toContain('data-card="card-long">4<');
    expect(html).toContain('data-card="card-short">0<');
    expect(html).toContain("personal <b>2</b>");
    expect(html).toContain("skill <b>2</b>");
  });

  it("renders zeros without a summary", () => {
    const html = renderSummaryCards(null);
    expect(html).toContain('data-card="card-active">0<');
    expect(html).toContain("no active facts");
  });
});

describe("renderFactRows", () => {
  it("escapes user-controlled text", () => {
    const state = initialState("alice");
    state.facts = [fact({ value: "<script>alert(1)</script>" })];
    const html = renderFactRows(state);
    expect(html).not.toContain("<script>alert");
    expect(html).toContain("&lt;script&gt;");
  });

  it("tags inactive rows and disables their actions", () => {
    const state = initialState("alice");
    state.facts = [fact({ is_active: false })];
    const html = renderFactRows(state);
    expect(html).toContain("row-inactive");
    expect(html).toContain("tag-inactive");
    expect(html).toMatch(/data-edit="[^"]+" disabled/);
  });

  it("shows detail fields when a row is expanded", () => {
    const state = initialState("alice");
    const row = fact({ source_text: "I moved to Toronto", access_count: 3 });
    state.facts = [row];
    state.expanded.add(row.id);
    const html = renderFactRows(state);
    expect(html).toContain("I moved to Toronto");
    expect(html).toContain("access count");
    expect(html).toContain(">3<");
  });

  it("opens the inline editor for the editing row", () => {
    const state = initialState("alice");
    const row = fact({ value: "Google" });
    state.facts = [row];
    state.editing = row.id;
    const html = renderFactRows(state);
    expect(html).toContain(`data-edit-form="${row.id}"`);
    expect(html).toContain('value="Google"');
  });
});

describe("renderClearDialog", () => {
  it("shows the affected count and a disabled confirm button", () => {
    const html = renderClearDialog(4, "user-scoped facts");
    expect(html).toContain("<b data-affected-count>4</b>");
    expect(html).toContain("data-confirm-clear disabled");
    expect(html).toContain("CLEAR");
  });
});
