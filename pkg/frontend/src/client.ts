/** Thin fetch wrapper around the session API; the base URL is the only config. */

import type { SessionCreated, SessionSnapshot, TurnDocument } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Raised for protocol conflicts (posting when the session no longer accepts input). */
export class ConflictError extends Error {
  constructor(detail: string) {
    super(detail);
    this.name = "ConflictError";
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    if (response.status === 409) {
      const body = await response.json().catch(() => ({ detail: "conflict" }));
      throw new ConflictError(String(body.detail ?? "conflict"));
    }
    if (!response.ok) {
      throw new Error(`${init?.method ?? "GET"} ${path} failed: ${response.status}`);
    }
    return (await response.json()) as T;
  }

  listDomains(): Promise<string[]> {
    return this.request<string[]>("/domains");
  }

  createSession(domain: string): Promise<SessionCreated> {
    return this.request<SessionCreated>("/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ domain }),
    });
  }

  postMessage(sessionId: string, text: string): Promise<TurnDocument> {
    return this.request<TurnDocument>(`/sessions/${sessionId}/messages`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text }),
    });
  }

  getState(sessionId: string): Promise<SessionSnapshot> {
    return this.request<SessionSnapshot>(`/sessions/${sessionId}/state`);
  }
}
