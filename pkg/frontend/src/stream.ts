import type { StreamEvent } from "./types.js";

export type WebSocketFactory = (url: string) => WebSocket;

/**
 * Per-session event stream with automatic reconnect.  Tracks the last
 * delivered cursor and resumes with ?cursor=<next>, so consumers see every
 * event exactly once, in order, across reconnects.
 */
export class SessionStream {
  private ws: WebSocket | null = null;
  private nextCursor = 0;
  private backoff = 500;
  private closed = false;

  constructor(
    private baseUrl: string,
    private sessionId: string,
    private onEvent: (ev: StreamEvent) => void,
    private wsFactory: WebSocketFactory = (url) => new WebSocket(url),
  ) {}

  get cursor(): number {
    return this.nextCursor;
  }

  connect(): void {
    const url = `${this.baseUrl}/sessions/${this.sessionId}/stream?cursor=${this.nextCursor}`;
    this.ws = this.wsFactory(url);
    this.ws.addEventListener("open", () => {
      this.backoff = 500;
    });
    this.ws.addEventListener("message", (e: MessageEvent) => {
      const ev = JSON.parse(String(e.data)) as StreamEvent;
      if (ev.cursor < this.nextCursor) return; // duplicate across reconnect
      this.nextCursor = ev.cursor + 1;
      this.onEvent(ev);
    });
    this.ws.addEventListener("close", () => {
      if (this.closed) return;
      setTimeout(() => this.connect(), (this.backoff = Math.min(this.backoff * 2, 30_000)));
    });
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}
