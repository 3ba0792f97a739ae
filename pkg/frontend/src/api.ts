// Typed client for the review service JSON API. Every mutation goes
// through here; the UI never changes geometry on its own.

export interface Feature {
  id: number | string;
  coordinates: [number, number][];
  properties?: Record<string, unknown>;
}

export interface LayerPayload {
  layer: string;
  version: number;
  features: Feature[];
}

export interface ControlPointPair {
  source: [number, number];
  target: [number, number];
}

export interface JobStatus {
  job: string;
  stage: string;
  status: "queued" | "running" | "done" | "failed" | "superseded" | "cancelled";
  version: number;
  error: string | null;
  report: Record<string, unknown> | null;
}

export interface SessionStatus {
  id: string;
  version: number;
  stages: Record<string, { state: string; version: number | null }>;
  control_point_count: number;
  fragment_proposals: number[];
  reviewed_fragments: Record<string, string>;
}

export interface StageReport {
  stage: string;
  version: number;
  report: Record<string, unknown>;
}

export type RefinementAction =
  | { action: "confirm_fragment_deletion"; ids: number[] }
  | { action: "reject_fragment_deletion"; ids: number[] }
  | { action: "override_attribute"; lanelet_id: number; key: string; value: string };

export type FetchFn = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly sessionId: string,
    private readonly fetchFn: FetchFn = (input, init) => fetch(input, init),
    private readonly base: string = "",
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(`${this.base}/session/${this.sessionId}${path}`, init);
    if (!resp.ok) {
      const body = await resp.text();
      throw new Error(`${init?.method ?? "GET"} ${path} -> ${resp.status}: ${body}`);
    }
    return (await resp.json()) as T;
  }

  getStatus(): Promise<SessionStatus> {
    return this.request<SessionStatus>("");
  }

  getGeometry(layer: string): Promise<LayerPayload> {
    return this.request<LayerPayload>(`/geometry/${layer}`);
  }

  putControlPoints(pairs: ControlPointPair[]): Promise<{ version: number }> {
    return this.request(`/control-points`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(pairs),
    });
  }

  recompute(stage: "align" | "conflate"): Promise<{ job: string; version: number }> {
    return this.request(`/recompute/${stage}`, { method: "POST" });
  }

  getJob(handle: string): Promise<JobStatus> {
    return this.request(`/job/${handle}`);
  }

  postRefinement(action: RefinementAction): Promise<{ applied: string; seq: number }> {
    return this.request(`/refinement`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(action),
    });
  }

  getReport(stage: "align" | "conflate"): Promise<StageReport> {
    return this.request(`/report/${stage}`);
  }
}
