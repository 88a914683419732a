/** Daily pipeline metrics: a table plus small inline SVG trend lines. */

import type { DailyMetrics, Health } from "./api.js";
import { escapeHtml, percent } from "./format.js";

/** Polyline points for an inline sparkline; null values leave gaps. */
export function sparklinePoints(
  values: Array<number | null>,
  width = 120,
  height = 28,
): string {
  const present = values.filter((v): v is number => v !== null);
  if (present.length === 0) {
    return "";
  }
  const max = Math.max(...present, 1e-9);
  const min = Math.min(...present, 0);
  const span = max - min || 1;
  const step = values.length > 1 ? width / (values.length - 1) : 0;
  return values
    .map((value, i) => {
      if (value === null) {
        return null;
      }
      const x = (i * step).toFixed(1);
      const y = (height - ((value - min) / span) * (height - 2) - 1).toFixed(1);
      return `${x},${y}`;
    })
    .filter((p): p is string => p !== null)
    .join(" ");
}

export function renderSparkline(values: Array<number | null>): string {
  const points = sparklinePoints(values);
  if (!points) {
    return "";
  }
  return `<svg class="spark" viewBox="0 0 120 28" preserveAspectRatio="none"><polyline points="${points}" /></svg>`;
}

export function renderMetrics(rows: DailyMetrics[], health: Health | null): string {
  if (rows.length === 0) {
    return `<p class="empty" data-testid="metrics-empty">no completed days yet.</p>`;
  }
  const header = health
    ? `<p class="health" data-testid="health-line">
         ${health.posts} posts seen · ${health.active_clusters} active /
         ${health.archived_clusters} archived clusters · model v${health.model_versions}
         ${health.bootstrap_mode ? " · bootstrap mode" : ""}</p>`
    : "";
  const body = rows
    .map(
      (row) => `
  <tr>
    <td>${escapeHtml(row.date)}</td>
    <td class="num">${row.ingested}</td>
    <td class="num">${row.asset_filtered}</td>
    <td class="num">${row.relevant}</td>
    <td class="num">${row.active_clusters}</td>
    <td class="num">${percent(row.mean_wts)}</td>
    <td class="num">${percent(row.max_jaccard)}</td>
  </tr>`,
    )
    .join("");
  const wtsTrend = renderSparkline(rows.map((r) => r.mean_wts));
  const volumeTrend = renderSparkline(rows.map((r) => r.ingested));
  return `
${header}
<div class="trends">
  <span>mean wts ${wtsTrend}</span>
  <span>volume ${volumeTrend}</span>
</div>
<table class="metrics" data-testid="metrics-table">
  <thead>
    <tr><th>day</th><th>collected</th><th>filtered</th><th>relevant</th>
        <th>clusters</th><th>mean wts</th><th>max jaccard</th></tr>
  </thead>
  <tbody>${body}
  </tbody>
</table>`;
}
