/**
 * Typed client for the threatmon HTTP API.
 *
 * Every number the dashboard shows comes from these responses; the client
 * never recomputes pipeline quantities. The fetch implementation is
 * injectable so tests can run without a network.
 */

export interface ClusterSummary {
  id: number;
  exemplar_text: string;
  member_count: number;
  wts: number;
  tags: string[];
  created_at: string;
  last_update: string;
}

export interface ClusterMember {
  post_id: string;
  text: string;
  timestamp: string;
}

export interface ClusterDetail extends ClusterSummary {
  members: ClusterMember[];
}

export interface QueueItem {
  post_id: string;
  text: string;
  verdict: string;
  label: string | null;
}

export interface LabelRecord {
  post_id: string;
  label: string;
  labeled_at: string;
  source: string;
}

export interface DailyMetrics {
  date: string;
  mean_wts: number | null;
  max_jaccard: number | null;
  active_clusters: number;
  ingested: number;
  asset_filtered: number;
  relevant: number;
}

export interface Health {
  status: string;
  posts: number;
  active_clusters: number;
  archived_clusters: number;
  model_versions: number;
  bootstrap_mode: boolean;
}

export interface RetrainResult {
  version: number;
  classifier: string;
  examples: number;
}

export interface PostBody {
  id: string;
  author?: string;
  timestamp: string;
  text: string;
}

export type QueueSource = "auto" | "classified" | "filtered";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = await response.json();
    return typeof body.detail === "string" ? body.detail : JSON.stringify(body.detail);
  } catch {
    return response.statusText || `HTTP ${response.status}`;
  }
}

export class ThreatmonApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.url(path), init);
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    return (await response.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  health(): Promise<Health> {
    return this.request("/health");
  }

  getClusters(): Promise<ClusterSummary[]> {
    return this.request("/clusters");
  }

  getCluster(id: number): Promise<ClusterDetail> {
    return this.request(`/clusters/${id}`);
  }

  getIoc(id: number): Promise<unknown> {
    return this.request(`/iocs/${id}`);
  }

  getMetricsDaily(): Promise<DailyMetrics[]> {
    return this.request("/metrics/daily");
  }

  getQueue(source: QueueSource = "auto"): Promise<QueueItem[]> {
    return this.request(`/queue?source=${source}`);
  }

  getLabels(): Promise<LabelRecord[]> {
    return this.request("/labels");
  }

  getLabel(postId: string): Promise<LabelRecord> {
    return this.request(`/labels/${encodeURIComponent(postId)}`);
  }

  pushPost(body: PostBody): Promise<unknown> {
    return this.post("/posts", body);
  }

  /**
   * Submit a label. A 409 means the identical label is already stored,
   * which callers treat as an idempotent success (double-click safety).
   */
  async submitLabel(postId: string, label: "relevant" | "irrelevant"): Promise<{ duplicate: boolean }> {
    try {
      await this.post("/labels", { post_id: postId, label });
      return { duplicate: false };
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        return { duplicate: true };
      }
      throw error;
    }
  }

  retrain(horizonDays?: number): Promise<RetrainResult> {
    return this.post("/retrain", horizonDays === undefined ? {} : { horizon_days: horizonDays });
  }
}
