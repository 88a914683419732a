/**
 * Labeling queue with optimistic updates.
 *
 * Submitting a label marks the entry immediately and rolls back if the API
 * rejects it; a 409 ("already recorded") counts as success so double-clicks
 * are harmless. Verdicts always come from the server, never recomputed here.
 */

import type { QueueItem, QueueSource, ThreatmonApi } from "./api.js";
import { ApiError } from "./api.js";
import { escapeHtml } from "./format.js";

export type EntryState = "unlabeled" | "pending" | "labeled";

export interface QueueEntry {
  item: QueueItem;
  state: EntryState;
  error: string | null;
}

type QueueApi = Pick<ThreatmonApi, "getQueue" | "submitLabel">;

export class QueueController {
  entries: QueueEntry[] = [];
  source: QueueSource = "auto";

  constructor(private readonly api: QueueApi) {}

  /** Replace the queue from a fresh snapshot, keeping in-flight entries. */
  async refresh(source?: QueueSource): Promise<void> {
    if (source) {
      this.source = source;
    }
    const items = await this.api.getQueue(this.source);
    const pending = new Map(
      this.entries.filter((e) => e.state === "pending").map((e) => [e.item.post_id, e]),
    );
    this.entries = items.map((item) => {
      const inFlight = pending.get(item.post_id);
      if (inFlight) {
        return inFlight;
      }
      return {
        item,
        state: item.label === null ? "unlabeled" : "labeled",
        error: null,
      };
    });
  }

  entry(postId: string): QueueEntry | undefined {
    return this.entries.find((e) => e.item.post_id === postId);
  }

  get unlabeledCount(): number {
    return this.entries.filter((e) => e.state === "unlabeled").length;
  }

  /**
   * Optimistically label an entry. On a 4xx/5xx response the entry returns
   * to "unlabeled" with an inline error message.
   */
  async submit(postId: string, label: "relevant" | "irrelevant"): Promise<boolean> {
    const entry = this.entry(postId);
    if (!entry) {
      throw new Error(`unknown queue entry: ${postId}`);
    }
    const previousLabel = entry.item.label;
    entry.state = "pending";
    entry.item.label = label;
    entry.error = null;
    try {
      await this.api.submitLabel(postId, label);
      entry.state = "labeled";
      return true;
    } catch (error) {
      entry.state = "unlabeled";
      entry.item.label = previousLabel;
      entry.error =
        error instanceof ApiError ? error.message : "request failed; try again";
      return false;
    }
  }
}

function labelButtons(entry: QueueEntry): string {
  const disabled = entry.state === "pending" ? " disabled" : "";
  return `
    <button class="label-btn relevant" data-post-id="${escapeHtml(entry.item.post_id)}" data-label="relevant"${disabled}>relevant</button>
    <button class="label-btn irrelevant" data-post-id="${escapeHtml(entry.item.post_id)}" data-label="irrelevant"${disabled}>irrelevant</button>`;
}

export function renderQueue(entries: QueueEntry[]): string {
  if (entries.length === 0) {
    return `<p class="empty" data-testid="queue-empty">nothing waiting for review.</p>`;
  }
  const rows = entries
    .map((entry) => {
      const verdictClass = entry.item.verdict === "relevant" ? "relevant" : "muted";
      const labelCell =
        entry.state === "labeled"
          ? `<span class="labeled">${escapeHtml(entry.item.label ?? "")}</span>`
          : labelButtons(entry);
      const error = entry.error
        ? `<div class="inline-error" role="alert">${escapeHtml(entry.error)}</div>`
        : "";
      return `
  <tr data-post-id="${escapeHtml(entry.item.post_id)}" class="${entry.state}">
    <td class="text">${escapeHtml(entry.item.text)}${error}</td>
    <td class="verdict ${verdictClass}" data-testid="verdict-${escapeHtml(entry.item.post_id)}">${escapeHtml(entry.item.verdict)}</td>
    <td class="actions">${labelCell}</td>
  </tr>`;
    })
    .join("");
  return `
<table class="queue" data-testid="queue-table">
  <thead><tr><th>post</th><th>model verdict</th><th>analyst label</th></tr></thead>
  <tbody>${rows}
  </tbody>
</table>`;
}
