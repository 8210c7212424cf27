/**
 * DOM glue: wires the API client and the pure renderers into the page.
 *
 * One message is in flight at a time; the input stays disabled until the
 * assistant answers (the server enforces the same rule with a 409). After
 * every assistant reply the task panel is re-polled.
 */

import { ApiClient, ApiError } from "./api.js";
import {
  renderErrorBubble,
  renderMessage,
  renderTable,
  renderTaskPanel,
  renderUserBubble,
  SortState,
} from "./render.js";
import { TablePayload } from "./types.js";

const api = new ApiClient("");

const stream = document.getElementById("stream") as HTMLDivElement;
const input = document.getElementById("input") as HTMLInputElement;
const sendButton = document.getElementById("send") as HTMLButtonElement;
const taskPanel = document.getElementById("tasks") as HTMLDivElement;
const dataFile = document.getElementById("datafile") as HTMLInputElement;

let sessionId = "";
const tableState = new Map<HTMLTableElement, { payload: TablePayload; sort?: SortState }>();

function setBusy(busy: boolean): void {
  input.disabled = busy;
  sendButton.disabled = busy;
}

function append(html: string): HTMLElement {
  const holder = document.createElement("div");
  holder.innerHTML = html;
  const node = holder.firstElementChild as HTMLElement;
  stream.appendChild(node);
  stream.scrollTop = stream.scrollHeight;
  return node;
}

function registerTables(root: HTMLElement, payloads: TablePayload[]): void {
  const tables = root.querySelectorAll<HTMLTableElement>("table.data-table");
  tables.forEach((table) => {
    const payload = payloads.find((p) => p.name === table.dataset.table);
    if (!payload) return;
    tableState.set(table, { payload });
    table.addEventListener("click", (event) => {
      const target = event.target as HTMLElement;
      const header = target.closest("th");
      if (!header || header.dataset.col === undefined) return;
      const state = tableState.get(table);
      if (!state) return;
      const column = Number(header.dataset.col);
      const descending = state.sort?.column === column ? !state.sort.descending : false;
      state.sort = { column, descending };
      const replacement = document.createElement("div");
      replacement.innerHTML = renderTable(state.payload, state.sort);
      const fresh = replacement.firstElementChild as HTMLTableElement;
      table.replaceWith(fresh);
      tableState.delete(table);
      tableState.set(fresh, state);
      registerTables(fresh.parentElement as HTMLElement, [state.payload]);
    });
  });
}

async function refreshTasks(): Promise<void> {
  try {
    const tasks = await api.getTasks(sessionId);
    taskPanel.innerHTML = renderTaskPanel(tasks);
  } catch {
    // panel refresh is best effort; the next reply will retry it
  }
}

async function deliver(text: string): Promise<void> {
  setBusy(true);
  try {
    const message = await api.postMessage(sessionId, text);
    const node = append(renderMessage(message));
    registerTables(node, message.renderables);
    await refreshTasks();
  } catch (error) {
    const detail =
      error instanceof ApiError ? `${error.status} ${error.message}` : String(error);
    const bubble = append(renderErrorBubble(detail));
    const retry = bubble.querySelector<HTMLButtonElement>("button.retry");
    retry?.addEventListener("click", () => {
      bubble.remove();
      void deliver(text);
    });
  } finally {
    setBusy(false);
    input.focus();
  }
}

async function send(): Promise<void> {
  const text = input.value.trim();
  if (!text || input.disabled) return;
  input.value = "";
  append(renderUserBubble(text));
  await deliver(text);
}

async function uploadDataset(file: File): Promise<void> {
  setBusy(true);
  try {
    const result = await api.ingestData(sessionId, await file.arrayBuffer());
    append(
      renderUserBubble(`(uploaded dataset ${file.name})`),
    );
    append(
      `<div class="bubble assistant"><div class="text">Loaded dataset ` +
        `${result.instance_id}; baseline plan solved. Ask away.</div></div>`,
    );
  } catch (error) {
    const detail =
      error instanceof ApiError ? `${error.status} ${error.message}` : String(error);
    append(renderErrorBubble(detail));
  } finally {
    setBusy(false);
  }
}

async function start(): Promise<void> {
  sessionId = await api.createSession();
  sendButton.addEventListener("click", () => void send());
  input.addEventListener("keydown", (event) => {
    if (event.key === "Enter") void send();
  });
  dataFile.addEventListener("change", () => {
    const file = dataFile.files?.[0];
    if (file) void uploadDataset(file);
  });
  input.focus();
}

void start();
