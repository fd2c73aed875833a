import type { StreamEvent, WireCard, WireMessage } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderMessage(msg: WireMessage): HTMLElement {
  const node = el("div", `message author-${msg.author.toLowerCase()}`);
  node.dataset.messageId = msg.id;
  node.dataset.seq = String(msg.seq);
  node.appendChild(el("span", "author", msg.author));
  node.appendChild(el("span", "text", msg.text));
  return node;
}

/**
 * Agent answer card, visually demarcated from chat messages (its own tag and
 * class).  The Accept button fires once: it disables optimistically and rolls
 * back only if the accept call fails.
 */
export function renderCard(
  card: WireCard,
  onAccept: (cardId: string) => Promise<unknown>,
): HTMLElement {
  const node = el("section", "agent-card");
  node.dataset.cardId = card.id;
  node.appendChild(el("h3", "card-question", card.rewritten_question));
  node.appendChild(el("p", "card-answer", card.answer_text));

  const refs = el("ul", "citations");
  for (const c of card.citations) {
    const item = el("li", "citation");
    item.dataset.entryId = c.entry_id;
    if (c.url) {
      const link = el("a", "citation-link", c.title);
      link.href = c.url;
      item.appendChild(link);
    } else {
      item.textContent = c.title;
    }
    refs.appendChild(item);
  }
  node.appendChild(refs);

  const button = el("button", "accept", "Accept");
  button.addEventListener("click", () => {
    button.disabled = true;
    button.textContent = "Accepted";
    node.classList.add("accepted");
    onAccept(card.id).catch(() => {
      button.disabled = false;
      button.textContent = "Accept";
      node.classList.remove("accepted");
    });
  });
  node.appendChild(button);
  return node;
}

/** Renders a session's event stream into a container, in cursor order. */
export class StreamView {
  constructor(
    private root: HTMLElement,
    private onAccept: (cardId: string) => Promise<unknown>,
  ) {}

  apply(ev: StreamEvent): void {
    switch (ev.type) {
      case "message":
        this.root.appendChild(renderMessage(ev));
        break;
      case "card":
        this.root.appendChild(renderCard(ev, this.onAccept));
        break;
      case "card_accepted": {
        const card = this.root.querySelector<HTMLElement>(
          `[data-card-id="${ev.card_id}"]`,
        );
        card?.classList.add("accepted");
        const button = card?.querySelector("button.accept");
        if (button instanceof HTMLButtonElement) {
          button.disabled = true;
          button.textContent = "Accepted";
        }
        break;
      }
      case "session_closed":
        this.root.appendChild(el("div", "session-closed", "Session closed"));
        break;
    }
  }
}
