/** Wire types for the oncall-agent HTTP/WS contract. */

export type Author = "Customer" | "Analyst" | "Agent";

export interface WireMessage {
  id: string;
  session_id: string;
  author: Author;
  seq: number;
  ts: number;
  text: string;
  attachments: string[];
  links: string[];
}

export interface Citation {
  entry_id: string;
  title: string;
  url: string | null;
}

export interface WireCard {
  id: string;
  session_id: string;
  trigger_message_id: string;
  rewritten_question: string;
  answer_text: string;
  citations: Citation[];
  status: string;
  accept_action: { method: string; path: string };
}

export type StreamEvent = { cursor: number } & (
  | ({ type: "message" } & WireMessage)
  | ({ type: "card" } & WireCard)
  | { type: "card_accepted"; card_id: string }
  | { type: "session_closed" }
);

export interface KbSource {
  kind: string; // "session" | "url" | "manual"
  ref: string;
}

export interface KbEntry {
  id: string;
  kind: string;
  question: string;
  content: string;
  source: KbSource;
  status: string;
  created_seq: number;
  updated_seq: number;
  score?: number;
}

export interface MutationRecord {
  version: number;
  op: string;
  entry_id: string;
  cause: { kind: string; [key: string]: unknown };
}

export interface EntryDetail {
  entry: KbEntry | null;
  history: MutationRecord[];
}
