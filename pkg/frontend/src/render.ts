/**
 * Pure rendering: API payloads in, HTML strings out.
 *
 * Keeping these as string-producing functions (no document access) lets the
 * contract tests run them in Node against recorded server responses; app.ts
 * only glues the strings into the page and wires events.
 */

import { ApiMessage, TablePayload, TaskRecord } from "./types.js";

export function escapeHtml(value: unknown): string {
  return String(value)
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function formatCell(value: string | number): string {
  if (typeof value === "number") {
    const text = value.toFixed(2).replace(/\.?0+$/, "");
    return text === "" || text === "-0" ? "0" : text;
  }
  return String(value);
}

export interface SortState {
  column: number;
  descending: boolean;
}

export function sortRows(table: TablePayload, sort?: SortState): (string | number)[][] {
  if (!sort) return table.rows;
  const rows = [...table.rows];
  rows.sort((a, b) => {
    const left = a[sort.column];
    const right = b[sort.column];
    let cmp: number;
    if (typeof left === "number" && typeof right === "number") {
      cmp = left - right;
    } else {
      cmp = String(left).localeCompare(String(right));
    }
    return sort.descending ? -cmp : cmp;
  });
  return rows;
}

/** Sortable data table; every row is rendered (no truncation). */
export function renderTable(table: TablePayload, sort?: SortState): string {
  const headers = table.columns
    .map((column, index) => {
      const marker =
        sort && sort.column === index ? (sort.descending ? " ▼" : " ▲") : "";
      return `<th data-col="${index}">${escapeHtml(column.name)}${marker}</th>`;
    })
    .join("");
  const body = sortRows(table, sort)
    .map(
      (row) =>
        `<tr>${row.map((cell) => `<td>${escapeHtml(formatCell(cell))}</td>`).join("")}</tr>`,
    )
    .join("");
  return (
    `<table class="data-table" data-table="${escapeHtml(table.name)}">` +
    `<thead><tr>${headers}</tr></thead><tbody>${body}</tbody></table>`
  );
}

/** True for the per-day production payload the plan-display tool emits. */
export function isDailyProduction(table: TablePayload): boolean {
  return (
    table.columns.length === 2 &&
    table.columns[0].name === "date" &&
    table.columns[1].name === "units"
  );
}

/** Per-day production bar chart; heights are proportional to units. */
export function renderBarChart(table: TablePayload): string {
  const units = table.rows.map((row) => Number(row[1]));
  const peak = Math.max(1, ...units);
  const bars = table.rows
    .map((row) => {
      const value = Number(row[1]);
      const height = Math.round((100 * value) / peak);
      return (
        `<div class="bar-slot" title="${escapeHtml(row[0])}: ${escapeHtml(formatCell(value))}">` +
        `<div class="bar" style="height:${height}%"></div>` +
        `<span class="bar-label">${escapeHtml(String(row[0]).slice(5))}</span></div>`
      );
    })
    .join("");
  return `<div class="bar-chart" data-chart="${escapeHtml(table.name)}">${bars}</div>`;
}

/** Collapsed-by-default execution trace: "Took N steps". */
export function renderSteps(steps: string[]): string {
  if (!steps.length) return "";
  const items = steps.map((step) => `<li>${escapeHtml(step)}</li>`).join("");
  return (
    `<details class="steps"><summary>Took ${steps.length} steps</summary>` +
    `<ol>${items}</ol></details>`
  );
}

export function renderMessage(message: ApiMessage): string {
  const tables = message.renderables
    .map((table) => {
      const chart = isDailyProduction(table) ? renderBarChart(table) : "";
      return renderTable(table) + chart;
    })
    .join("");
  return (
    `<div class="bubble ${message.role}">` +
    `<div class="text">${escapeHtml(message.text)}</div>` +
    renderSteps(message.steps) +
    tables +
    `</div>`
  );
}

/** Optimistic local echo of what the planner typed. */
export function renderUserBubble(text: string): string {
  return `<div class="bubble user"><div class="text">${escapeHtml(text)}</div></div>`;
}

export function renderErrorBubble(detail: string): string {
  return (
    `<div class="bubble error"><div class="text">Request failed: ` +
    `${escapeHtml(detail)}</div><button class="retry">Retry</button></div>`
  );
}

/** Task panel rows, strictly in seq order. */
export function renderTaskPanel(tasks: TaskRecord[]): string {
  const rows = [...tasks]
    .sort((a, b) => a.seq - b.seq)
    .map(
      (task) =>
        `<li class="task ${task.status}" data-seq="${task.seq}">` +
        `<span class="seq">#${task.seq}</span> ` +
        `<span class="tool">${escapeHtml(task.tool_id)}</span> ` +
        `<span class="status">${escapeHtml(task.status)}</span></li>`,
    )
    .join("");
  return `<ol class="task-list">${rows}</ol>`;
}
