import { ApiClient } from "./api.js";
import { KbBrowser } from "./kb.js";
import { StreamView } from "./render.js";
import { SessionStream, WebSocketFactory } from "./stream.js";
import type { Author } from "./types.js";

const ROLES: Author[] = ["Customer", "Analyst"];

export interface Console {
  sessionId: string;
  stream: SessionStream;
  kb: KbBrowser;
  root: HTMLElement;
}

/**
 * One-window operator console: a role switcher lets a single human drive both
 * sides of a session (customer and analyst) against a live agent, next to a
 * knowledge-base browser.  Desk-scale testing tool, not a production UI.
 */
export async function bootConsole(
  root: HTMLElement,
  api: ApiClient,
  wsFactory: WebSocketFactory,
  wsBase = "",
): Promise<Console> {
  const { session_id: sessionId } = await api.createSession();

  const chat = document.createElement("div");
  chat.className = "chat-panel";
  const timeline = document.createElement("div");
  timeline.className = "timeline";
  chat.appendChild(timeline);

  const view = new StreamView(timeline, (cardId) => api.acceptCard(cardId));
  const stream = new SessionStream(wsBase, sessionId, (ev) => view.apply(ev), wsFactory);
  stream.connect();

  const controls = document.createElement("form");
  controls.className = "controls";
  controls.addEventListener("submit", (e) => e.preventDefault());

  let role: Author = "Customer";
  const tabs = document.createElement("div");
  tabs.className = "role-tabs";
  for (const r of ROLES) {
    const tab = document.createElement("button");
    tab.type = "button";
    tab.className = `role-tab role-${r.toLowerCase()}${r === role ? " active" : ""}`;
    tab.textContent = r;
    tab.addEventListener("click", () => {
      role = r;
      tabs.querySelectorAll(".role-tab").forEach((t) => t.classList.remove("active"));
      tab.classList.add("active");
    });
    tabs.appendChild(tab);
  }
  controls.appendChild(tabs);

  const input = document.createElement("input");
  input.className = "compose";
  controls.appendChild(input);

  const send = document.createElement("button");
  send.type = "button";
  send.className = "send";
  send.textContent = "Send";
  send.addEventListener("click", () => {
    const text = input.value.trim();
    if (!text) return;
    input.value = "";
    void api.postMessage(sessionId, role, text);
  });
  controls.appendChild(send);

  const join = document.createElement("button");
  join.type = "button";
  join.className = "join";
  join.textContent = "Analyst join";
  join.addEventListener("click", () => void api.joinSession(sessionId));
  controls.appendChild(join);

  const close = document.createElement("button");
  close.type = "button";
  close.className = "close";
  close.textContent = "Close session";
  close.addEventListener("click", () => void api.closeSession(sessionId));
  controls.appendChild(close);

  chat.appendChild(controls);
  root.appendChild(chat);

  const kbPanel = document.createElement("div");
  kbPanel.className = "kb-panel";
  root.appendChild(kbPanel);
  const kb = new KbBrowser(kbPanel, api);
  await kb.refresh();

  return { sessionId, stream, kb, root };
}
