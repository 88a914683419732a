/**
 * Browser bootstrap: wires the API client, view models and renderers to the
 * page and polls for fresh snapshots (default every 5 s, `?poll=ms` to
 * change, same-origin API by default, `?api=http://host:port` to point
 * elsewhere). A failed poll shows a banner and keeps the last snapshot.
 */

import { ThreatmonApi } from "./api.js";
import type { Health } from "./api.js";
import {
  LandscapeView,
  SortKey,
  buildLandscape,
  renderClusterDetail,
  renderLandscape,
  setFilter,
  setSort,
} from "./landscape.js";
import { renderMetrics } from "./metrics.js";
import { QueueController, renderQueue } from "./queue.js";

const params = new URLSearchParams(window.location.search);
const api = new ThreatmonApi(params.get("api") ?? "");
const pollMs = Number(params.get("poll") ?? "5000");

const queue = new QueueController(api);
let landscape: LandscapeView | null = null;
let health: Health | null = null;
let activeTab = "landscape";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function setBanner(message: string | null): void {
  const banner = el<HTMLDivElement>("banner");
  banner.textContent = message ?? "";
  banner.hidden = message === null;
}

function renderAll(): void {
  if (landscape) {
    el("landscape-pane").innerHTML = renderLandscape(landscape);
  }
  el("queue-pane").innerHTML = renderQueue(queue.entries);
  el("queue-count").textContent = String(queue.unlabeledCount);
}

async function refresh(): Promise<void> {
  try {
    const nowIso = new Date().toISOString();
    const [clusters, metricsRows, healthNow] = await Promise.all([
      api.getClusters(),
      api.getMetricsDaily(),
      api.health(),
    ]);
    await queue.refresh();
    health = healthNow;
    const previous = landscape;
    landscape = buildLandscape(clusters, nowIso);
    if (previous) {
      landscape = { ...landscape, sortKey: previous.sortKey, sortDescending: previous.sortDescending, filter: previous.filter };
    }
    el("metrics-pane").innerHTML = renderMetrics(metricsRows, health);
    setBanner(null);
  } catch (error) {
    // Keep the last snapshot on screen; just surface the failure.
    setBanner(`API unreachable: ${error instanceof Error ? error.message : error}`);
  }
  renderAll();
}

async function openCluster(id: number): Promise<void> {
  try {
    const detail = await api.getCluster(id);
    el("detail-pane").innerHTML = renderClusterDetail(detail);
    el<HTMLDialogElement>("detail-dialog").showModal();
  } catch (error) {
    setBanner(`could not load cluster ${id}: ${error}`);
  }
}

function showTab(name: string): void {
  activeTab = name;
  for (const pane of ["landscape", "queue", "metrics"]) {
    el(`${pane}-view`).hidden = pane !== name;
    el(`tab-${pane}`).classList.toggle("active", pane === name);
  }
}

function wireEvents(): void {
  for (const name of ["landscape", "queue", "metrics"]) {
    el(`tab-${name}`).addEventListener("click", () => showTab(name));
  }

  el("landscape-pane").addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const sortKey = target.dataset.sort as SortKey | undefined;
    if (sortKey && landscape) {
      landscape = setSort(landscape, sortKey);
      renderAll();
      return;
    }
    const link = target.closest("a[href^='#cluster/']");
    if (link) {
      event.preventDefault();
      void openCluster(Number(link.getAttribute("href")!.split("/")[1]));
    }
  });

  el<HTMLInputElement>("filter-input").addEventListener("input", (event) => {
    if (landscape) {
      landscape = setFilter(landscape, (event.target as HTMLInputElement).value);
      renderAll();
    }
  });

  el("queue-pane").addEventListener("click", async (event) => {
    const button = (event.target as HTMLElement).closest<HTMLButtonElement>("button.label-btn");
    if (!button) {
      return;
    }
    const postId = button.dataset.postId!;
    const label = button.dataset.label as "relevant" | "irrelevant";
    renderAll(); // repaint with the pending state set by submit below
    await queue.submit(postId, label);
    renderAll();
  });

  el<HTMLInputElement>("bootstrap-toggle").addEventListener("change", async (event) => {
    const checked = (event.target as HTMLInputElement).checked;
    await queue.refresh(checked ? "filtered" : "classified");
    renderAll();
  });

  el("retrain-btn").addEventListener("click", async () => {
    if (!window.confirm("Retrain the classifier from the current labels?")) {
      return;
    }
    try {
      const result = await api.retrain();
      setBanner(null);
      el("retrain-status").textContent = `model v${result.version} (${result.examples} examples)`;
      await refresh();
    } catch (error) {
      setBanner(`retrain failed: ${error instanceof Error ? error.message : error}`);
    }
  });

  el("detail-close").addEventListener("click", () => {
    el<HTMLDialogElement>("detail-dialog").close();
  });
}

wireEvents();
showTab(activeTab);
void refresh();
window.setInterval(() => void refresh(), Number.isFinite(pollMs) && pollMs > 0 ? pollMs : 5000);
