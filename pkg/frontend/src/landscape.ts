/**
 * Threat landscape view: one row per active cluster, fed from a single
 * GET /clusters snapshot. Sorting and filtering are pure view state; the
 * numbers themselves are exactly what the API returned.
 */

import type { ClusterDetail, ClusterSummary } from "./api.js";
import { escapeHtml, humanAge, shortDate } from "./format.js";

export interface LandscapeRow {
  clusterId: number;
  exemplarText: string;
  memberCount: number;
  wts: number;
  tags: string[];
  createdAt: string;
  lastUpdate: string;
  age: string;
}

export type SortKey = "last_update" | "created_at" | "member_count" | "wts";

export interface LandscapeView {
  rows: LandscapeRow[];
  sortKey: SortKey;
  sortDescending: boolean;
  filter: string;
  fetchedAt: string;
}

export function buildLandscape(clusters: ClusterSummary[], nowIso: string): LandscapeView {
  const rows = clusters.map((c) => ({
    clusterId: c.id,
    exemplarText: c.exemplar_text,
    memberCount: c.member_count,
    wts: c.wts,
    tags: [...c.tags],
    createdAt: c.created_at,
    lastUpdate: c.last_update,
    age: humanAge(c.last_update, nowIso),
  }));
  return { rows, sortKey: "last_update", sortDescending: true, filter: "", fetchedAt: nowIso };
}

export function setSort(view: LandscapeView, key: SortKey): LandscapeView {
  const descending = view.sortKey === key ? !view.sortDescending : true;
  return { ...view, sortKey: key, sortDescending: descending };
}

export function setFilter(view: LandscapeView, filter: string): LandscapeView {
  return { ...view, filter };
}

function sortValue(row: LandscapeRow, key: SortKey): number | string {
  switch (key) {
    case "member_count":
      return row.memberCount;
    case "wts":
      return row.wts;
    case "created_at":
      return row.createdAt;
    default:
      return row.lastUpdate;
  }
}

/** Rows after applying the view's filter and sort, ties broken by id. */
export function visibleRows(view: LandscapeView): LandscapeRow[] {
  const needle = view.filter.trim().toLowerCase();
  const rows = view.rows.filter(
    (row) =>
      !needle ||
      row.exemplarText.toLowerCase().includes(needle) ||
      row.tags.some((tag) => tag.toLowerCase().includes(needle)),
  );
  const direction = view.sortDescending ? -1 : 1;
  return rows.sort((a, b) => {
    const va = sortValue(a, view.sortKey);
    const vb = sortValue(b, view.sortKey);
    if (va < vb) return -1 * direction;
    if (va > vb) return 1 * direction;
    return a.clusterId - b.clusterId;
  });
}

function tagChips(tags: string[]): string {
  return tags
    .map((tag) => `<span class="chip" title="${escapeHtml(tag)}">${escapeHtml(chipLabel(tag))}</span>`)
    .join(" ");
}

/** Compress a machine tag to its human part: veris:...="DoS" -> DoS. */
export function chipLabel(tag: string): string {
  const quoted = tag.match(/"([^"]+)"$/);
  if (quoted) {
    return quoted[1];
  }
  const lastColon = tag.lastIndexOf(":");
  return lastColon === -1 ? tag : tag.slice(lastColon + 1);
}

export function renderLandscape(view: LandscapeView): string {
  const rows = visibleRows(view);
  if (rows.length === 0) {
    const why = view.filter ? "no clusters match the filter" : "no active threats yet";
    return `<p class="empty" data-testid="landscape-empty">${escapeHtml(why)} — new posts will appear as they arrive.</p>`;
  }
  const body = rows
    .map(
      (row) => `
  <tr data-cluster-id="${row.clusterId}">
    <td class="num">${row.clusterId}</td>
    <td class="exemplar"><a href="#cluster/${row.clusterId}">${escapeHtml(row.exemplarText)}</a></td>
    <td class="num">${row.memberCount}</td>
    <td class="num">${row.wts.toFixed(2)}</td>
    <td>${tagChips(row.tags)}</td>
    <td>${shortDate(row.createdAt)}</td>
    <td>${shortDate(row.lastUpdate)}</td>
    <td>${escapeHtml(row.age)}</td>
  </tr>`,
    )
    .join("");
  return `
<table class="landscape" data-testid="landscape-table">
  <thead>
    <tr>
      <th>#</th>
      <th>exemplar</th>
      <th data-sort="member_count" class="sortable">posts</th>
      <th data-sort="wts" class="sortable">wts</th>
      <th>tags</th>
      <th data-sort="created_at" class="sortable">first seen</th>
      <th data-sort="last_update" class="sortable">last update</th>
      <th>age</th>
    </tr>
  </thead>
  <tbody>${body}
  </tbody>
</table>`;
}

export function renderClusterDetail(detail: ClusterDetail): string {
  const members = detail.members
    .map(
      (m) => `
    <li><span class="ts">${escapeHtml(m.timestamp)}</span> ${escapeHtml(m.text)}</li>`,
    )
    .join("");
  return `
<section class="detail" data-testid="cluster-detail">
  <h2>Cluster ${detail.id} <small>(${detail.member_count} posts, wts ${detail.wts.toFixed(2)})</small></h2>
  <p class="exemplar">${escapeHtml(detail.exemplar_text)}</p>
  <p>${tagChips(detail.tags)}</p>
  <ol class="members">${members}
  </ol>
</section>`;
}
