/** Small presentation helpers shared by the views. */

const HTML_ESCAPES: Record<string, string> = {
  "&": "&amp;",
  "<": "&lt;",
  ">": "&gt;",
  '"': "&quot;",
  "'": "&#39;",
};

export function escapeHtml(text: string): string {
  return text.replace(/[&<>"']/g, (ch) => HTML_ESCAPES[ch]);
}

/** Whole-day age between two RFC 3339 instants, clamped at zero. */
export function ageDays(fromIso: string, nowIso: string): number {
  const ms = Date.parse(nowIso) - Date.parse(fromIso);
  return Math.max(0, Math.floor(ms / 86_400_000));
}

export function humanAge(fromIso: string, nowIso: string): string {
  const days = ageDays(fromIso, nowIso);
  if (days === 0) {
    return "today";
  }
  return days === 1 ? "1 day" : `${days} days`;
}

export function shortDate(iso: string): string {
  return iso.slice(0, 10);
}

export function percent(value: number | null): string {
  return value === null ? "–" : `${(value * 100).toFixed(1)}%`;
}
