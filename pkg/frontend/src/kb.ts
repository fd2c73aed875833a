import type { ApiClient } from "./api.js";
import type { KbEntry, MutationRecord } from "./types.js";

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

function renderEntryRow(entry: KbEntry, onSelect: (id: string) => void): HTMLElement {
  const row = el("div", `kb-entry status-${entry.status.toLowerCase()}`);
  row.dataset.entryId = entry.id;
  row.appendChild(el("span", "entry-id", entry.id));
  row.appendChild(el("span", "entry-question", entry.question || entry.content.slice(0, 80)));
  row.appendChild(el("span", "entry-status", entry.status));
  row.appendChild(el("span", "entry-source", `${entry.source.kind}:${entry.source.ref}`));
  row.addEventListener("click", () => onSelect(entry.id));
  return row;
}

function renderHistoryRow(rec: MutationRecord): HTMLElement {
  const row = el("li", "kb-history-row");
  row.dataset.version = String(rec.version);
  row.dataset.cause = rec.cause.kind;
  row.textContent = `v${rec.version} ${rec.op} (${rec.cause.kind})`;
  return row;
}

/** Knowledge-base browser: searchable entry list plus a provenance panel
 * showing the selected entry's full mutation history. */
export class KbBrowser {
  readonly list: HTMLElement;
  readonly detail: HTMLElement;

  constructor(root: HTMLElement, private api: ApiClient) {
    this.list = el("div", "kb-list");
    this.detail = el("div", "kb-detail");
    root.appendChild(this.list);
    root.appendChild(this.detail);
  }

  async refresh(query = ""): Promise<void> {
    const { entries } = await this.api.listEntries(query);
    this.list.replaceChildren(
      ...entries.map((entry) => renderEntryRow(entry, (id) => void this.select(id))),
    );
  }

  async select(entryId: string): Promise<void> {
    const { entry, history } = await this.api.getEntry(entryId);
    this.detail.replaceChildren();
    if (entry) {
      this.detail.appendChild(el("h3", "detail-id", entry.id));
      this.detail.appendChild(el("p", "detail-content", entry.content));
      this.detail.appendChild(el("p", "detail-status", entry.status));
      const source = el("p", "detail-source", `${entry.source.kind}:${entry.source.ref}`);
      if (entry.source.kind === "url") {
        const link = el("a", "source-link", entry.source.ref);
        link.href = entry.source.ref;
        source.appendChild(link);
      }
      this.detail.appendChild(source);
    }
    const log = el("ul", "kb-history");
    for (const rec of history) log.appendChild(renderHistoryRow(rec));
    this.detail.appendChild(log);
  }
}
