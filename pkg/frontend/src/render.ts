/**
 * HTML rendering: pure functions from state to markup strings. All
 * fact-sourced text goes through escapeHtml; values are user-controlled.
 */

import type { MemoryFact, Summary } from "./api.js";
import type { ConsoleState } from "./state.js";
import { pageCount } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

export function formatTimestamp(iso: string): string {
  // keep it sortable and timezone-honest: trim subseconds, keep the Z
  return iso.replace(/\.\d+Z$/, "Z").replace("T", " ");
}

const CATEGORIES = ["personal", "preference", "task", "relationship", "skill",
  "context", "instruction", "temporal", "other"] as const;

export function renderSummaryCards(summary: Summary | null): string {
  const active = summary?.active_count ?? 0;
  const longTerm = summary?.long_term_count ?? 0;
  const shortTerm = summary?.short_term_count ?? 0;
  const cards = [
    ["Active facts", active, "card-active"],
    ["Long-term", longTerm, "card-long"],
    ["Short-term", shortTerm, "card-short"],
  ] as const;
  const chips = CATEGORIES
    .map((cat) => [cat, summary?.by_category[cat] ?? 0] as const)
    .filter(([, count]) => count > 0)
    .map(([cat, count]) =>
      `<span class="chip" data-chip="${cat}">${cat} <b>${count}</b></span>`)
    .join("");
  return `
<div class="cards">
  ${cards.map(([label, value, cls]) => `
  <div class="card ${cls}">
    <div class="card-value" data-card="${cls}">${value}</div>
    <div class="card-label">${label}</div>
  </div>`).join("")}
</div>
<div class="chips">${chips || '<span class="chips-empty">no active facts</span>'}</div>`;
}

function memoryBadge(fact: MemoryFact): string {
  const flag = fact.memory_type === "long_term" ? "LT" : "ST";
  return `<span class="badge badge-${flag.toLowerCase()}">${flag}/${fact.category}</span>`;
}

function rowDetail(fact: MemoryFact): string {
  return `
<tr class="detail-row" data-detail="${fact.id}">
  <td colspan="6">
    <dl class="detail">
      <dt>source text</dt><dd>${escapeHtml(fact.source_text || "(none)")}</dd>
      <dt>confidence</dt><dd>${fact.confidence.toFixed(2)}</dd>
      <dt>access count</dt><dd>${fact.access_count}</dd>
      <dt>scope</dt><dd>${fact.scope}${fact.agent_id ? ` (agent ${escapeHtml(fact.agent_id)})` : ""}${fact.flow_id ? ` (flow ${escapeHtml(fact.flow_id)})` : ""}</dd>
      <dt>created</dt><dd>${formatTimestamp(fact.created_at)}</dd>
      <dt>last accessed</dt><dd>${formatTimestamp(fact.last_accessed_at)}</dd>
      <dt>id</dt><dd><code>${fact.id}</code></dd>
    </dl>
  </td>
</tr>`;
}

function editorRow(fact: MemoryFact): string {
  const categoryOptions = CATEGORIES.map((cat) =>
    `<option value="${cat}"${cat === fact.category ? " selected" : ""}>${cat}</option>`).join("");
  return `
<tr class="editor-row" data-editor="${fact.id}">
  <td colspan="6">
    <form class="editor" data-edit-form="${fact.id}">
      <label>value <input name="value" value="${escapeHtml(fact.value)}" required></label>
      <label>category <select name="category">${categoryOptions}</select></label>
      <label>type <select name="memory_type">
        <option value="long_term"${fact.memory_type === "long_term" ? " selected" : ""}>long_term</option>
        <option value="short_term"${fact.memory_type === "short_term" ? " selected" : ""}>short_term</option>
      </select></label>
      <button type="submit" class="btn btn-small">Save</button>
      <button type="button" class="btn btn-small btn-ghost" data-cancel-edit="${fact.id}">Cancel</button>
    </form>
  </td>
</tr>`;
}

export function renderFactRows(state: ConsoleState): string {
  if (!state.facts.length) {
    return '<tr><td colspan="6" class="table-empty">no facts match</td></tr>';
  }
  return state.facts.map((fact) => {
    const inactive = fact.is_active ? "" : " row-inactive";
    const row = `
<tr class="fact-row${inactive}" data-row="${fact.id}">
  <td><button class="expander" data-expand="${fact.id}">${state.expanded.has(fact.id) ? "▾" : "▸"}</button></td>
  <td>${memoryBadge(fact)}</td>
  <td class="cell-subject">${escapeHtml(fact.subject)}</td>
  <td class="cell-relation">${escapeHtml(fact.relation)}</td>
  <td class="cell-value">${escapeHtml(fact.value)}${fact.is_active ? "" : ' <span class="tag-inactive">inactive</span>'}</td>
  <td class="cell-actions">
    <button class="btn btn-small" data-edit="${fact.id}"${fact.is_active ? "" : " disabled"}>Edit</button>
    <button class="btn btn-small btn-danger" data-deactivate="${fact.id}"${fact.is_active ? "" : " disabled"}>Deactivate</button>
  </td>
</tr>`;
    const parts = [row];
    if (state.editing === fact.id) parts.push(editorRow(fact));
    if (state.expanded.has(fact.id)) parts.push(rowDetail(fact));
    return parts.join("");
  }).join("");
}

export function renderPager(state: ConsoleState): string {
  const pages = pageCount(state.total, state.filters.pageSize);
  const page = state.filters.page;
  return `
<div class="pager">
  <button class="btn btn-small" data-page="prev"${page === 0 ? " disabled" : ""}>&larr;</button>
  <span class="pager-label">page ${page + 1} / ${pages} &middot; ${state.total} facts</span>
  <button class="btn btn-small" data-page="next"${page + 1 >= pages ? " disabled" : ""}>&rarr;</button>
</div>`;
}

export function renderNotice(state: ConsoleState): string {
  if (!state.notice) return "";
  const cls = state.notice.kind === "error" ? "notice-error" : "notice-ok";
  return `<div class="notice ${cls}">${escapeHtml(state.notice.text)}</div>`;
}

export function renderClearDialog(affected: number, scopeLabel: string): string {
  return `
<div class="dialog-backdrop" data-dialog-backdrop>
  <div class="dialog">
    <h3>Clear ${escapeHtml(scopeLabel)}</h3>
    <p><b data-affected-count>${affected}</b> active fact${affected === 1 ? "" : "s"} will be deactivated.
       Facts are soft-deleted and stay visible under the inactive filter.</p>
    <label>Type <code>CLEAR</code> to confirm
      <input data-confirm-input autocomplete="off">
    </label>
    <div class="dialog-actions">
      <button class="btn btn-danger" data-confirm-clear disabled>Clear</button>
      <button class="btn btn-ghost" data-cancel-clear>Cancel</button>
    </div>
  </div>
</div>`;
}
