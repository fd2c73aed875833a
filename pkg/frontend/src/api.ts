import type { Author, EntryDetail, KbEntry } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

/** Thin client over the documented HTTP contract; no domain logic here. */
export class ApiClient {
  constructor(
    private base: string = "",
    private fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchFn(this.base + path, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!resp.ok) throw new ApiError(resp.status, `${method} ${path}: ${resp.status}`);
    return (await resp.json()) as T;
  }

  createSession(sessionId?: string): Promise<{ session_id: string }> {
    return this.request("POST", "/sessions", { session_id: sessionId ?? null });
  }

  postMessage(sessionId: string, author: Author, text: string): Promise<{ seq: number }> {
    return this.request("POST", `/sessions/${sessionId}/messages`, { author, text });
  }

  joinSession(sessionId: string): Promise<{ seq: number }> {
    return this.request("POST", `/sessions/${sessionId}/join`, {});
  }

  closeSession(sessionId: string): Promise<{ seq: number }> {
    return this.request("POST", `/sessions/${sessionId}/close`, {});
  }

  acceptCard(cardId: string): Promise<{ card_id: string; status: string }> {
    return this.request("POST", `/cards/${cardId}/accept`, {});
  }

  listEntries(query = "", k = 50): Promise<{ entries: KbEntry[]; version: number }> {
    const qs = new URLSearchParams({ query, k: String(k) });
    return this.request("GET", `/kb/entries?${qs}`);
  }

  getEntry(entryId: string): Promise<EntryDetail> {
    return this.request("GET", `/kb/entries/${entryId}`);
  }
}
