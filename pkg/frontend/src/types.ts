/** Wire types of the planning-assistant HTTP API. */

export interface TableColumn {
  name: string;
  type: string;
}

/** Renderable table payload attached to an assistant message. */
export interface TablePayload {
  name: string;
  columns: TableColumn[];
  rows: (string | number)[][];
}

export interface ApiMessage {
  role: "user" | "assistant";
  text: string;
  timestamp: number;
  renderables: TablePayload[];
  steps: string[];
}

export interface TaskRecord {
  seq: number;
  tool_id: string;
  status: "running" | "done" | "failed";
  started: number;
  finished: number | null;
  summary: string;
}

export interface SessionCreated {
  session_id: string;
}

export interface IngestResult {
  instance_id: string;
}
