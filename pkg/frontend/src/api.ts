// Typed client for the scene-manager HTTP API.

export interface SceneSummary {
  scene_id: string;
  num_versions: number;
  size_bytes: number;
}

export interface VersionInfo {
  version_id: number;
  timestamp: number;
  content_hash: string;
  has_volume: boolean;
  has_model: boolean;
}

export interface SegmentInfo {
  segment_id: number;
  class_id: number;
  class_name: string;
  auto_name: string;
  user_name: string | null;
  label: string;
  remembered: boolean;
  centroid: [number, number, number];
  voxel_count: number;
}

export interface InventoryResponse {
  version_id: number;
  class_names: string[];
  segments: SegmentInfo[];
}

export interface RankedSegment {
  segment_id: number;
  label: string;
  class: string;
  mean_heat: number;
  vertices: number;
}

export interface QueryResponse {
  version_id: number;
  text: string;
  temperature: number;
  ranked: RankedSegment[];
  heat: number[];
}

export interface DiffUnchanged {
  label: string;
  prev_segment_id: number;
  curr_segment_id: number;
  confidence: number;
}

export interface DiffMissing {
  label: string;
  prev_segment_id: number;
  prev_centroid: [number, number, number];
}

export interface DiffResponse {
  prev_version: number;
  curr_version: number;
  unchanged: DiffUnchanged[];
  missing: DiffMissing[];
}

export interface JobStatus {
  job_id: number;
  status: "running" | "done" | "failed";
  epoch: number;
  accuracy: number;
  best_accuracy: number;
  stopped_reason?: string;
  error?: string;
}

export type ActionRequest =
  | { action: "merge"; segment_ids: number[]; name: string }
  | { action: "rename"; segment_id: number; name: string }
  | { action: "remember"; segment_id: number };

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class SceneClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const res = await this.fetchFn(this.baseUrl + path, init);
    if (!res.ok) {
      let code = "http_error";
      let message = `${res.status} on ${path}`;
      try {
        const body = await res.json();
        code = body.code ?? code;
        message = body.message ?? message;
      } catch {
        // non-JSON error body: keep the defaults
      }
      throw new ApiError(res.status, code, message);
    }
    return res;
  }

  private async getJson<T>(path: string): Promise<T> {
    return (await this.request(path)).json() as Promise<T>;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const res = await this.request(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return res.json() as Promise<T>;
  }

  async getScenes(): Promise<SceneSummary[]> {
    const body = await this.getJson<{ scenes: SceneSummary[] }>("/scenes");
    return body.scenes;
  }

  async getVersions(sceneId: string): Promise<VersionInfo[]> {
    const body = await this.getJson<{ versions: VersionInfo[] }>(
      `/scenes/${encodeURIComponent(sceneId)}/versions`,
    );
    return body.versions;
  }

  getInventory(version: number): Promise<InventoryResponse> {
    return this.getJson(`/versions/${version}/inventory`);
  }

  async getMeshBytes(version: number): Promise<ArrayBuffer> {
    const res = await this.request(`/versions/${version}/mesh`);
    return res.arrayBuffer();
  }

  query(version: number, text: string, topK = 10): Promise<QueryResponse> {
    return this.postJson(`/versions/${version}/query`, { text, top_k: topK });
  }

  act(version: number, action: ActionRequest): Promise<InventoryResponse> {
    return this.postJson(`/versions/${version}/actions`, action);
  }

  async train(version: number, seed = 0): Promise<number> {
    const body = await this.postJson<{ job_id: number }>(
      `/versions/${version}/train`,
      { seed },
    );
    return body.job_id;
  }

  getJob(jobId: number): Promise<JobStatus> {
    return this.getJson(`/jobs/${jobId}`);
  }

  diff(prev: number, curr: number): Promise<DiffResponse> {
    return this.getJson(`/diff?prev=${prev}&curr=${curr}`);
  }
}
