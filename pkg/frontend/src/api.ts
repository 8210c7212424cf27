/**
 * Typed client over the documented service endpoints.
 *
 * The fetch implementation is injectable so contract tests can replay
 * recorded responses without a network.
 */

import { ApiMessage, IngestResult, SessionCreated, TaskRecord } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  async createSession(): Promise<string> {
    const body = await this.request<SessionCreated>("/sessions", { method: "POST" });
    return body.session_id;
  }

  /** Synchronous chat turn; a 409 means a prior turn is still running. */
  async postMessage(sessionId: string, text: string): Promise<ApiMessage> {
    return this.request<ApiMessage>(`/sessions/${sessionId}/messages`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text }),
    });
  }

  async getTasks(sessionId: string): Promise<TaskRecord[]> {
    return this.request<TaskRecord[]>(`/sessions/${sessionId}/tasks`);
  }

  async ingestData(sessionId: string, archive: Blob | ArrayBuffer): Promise<IngestResult> {
    return this.request<IngestResult>(`/sessions/${sessionId}/data`, {
      method: "POST",
      headers: { "Content-Type": "application/zip" },
      body: archive as BodyInit,
    });
  }

  planUrl(sessionId: string, planId: string, format: "json" | "csv" = "json"): string {
    return `${this.baseUrl}/sessions/${sessionId}/plans/${planId}?format=${format}`;
  }
}
