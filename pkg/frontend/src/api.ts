// Client for the reportsmith service. Fetch is injectable for tests.

import type {
  HealthResponse,
  MetricsResponse,
  ScoreResponse,
  StructureResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number | null,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ReportsmithClient {
  constructor(
    readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(`network failure: ${String(err)}`, null);
    }
    if (!response.ok) {
      let detail = "";
      try {
        detail = JSON.stringify(await response.json());
      } catch {
        /* body may be empty */
      }
      throw new ApiError(`HTTP ${response.status} ${detail}`, response.status);
    }
    return (await response.json()) as T;
  }

  score(text: string): Promise<ScoreResponse> {
    return this.post<ScoreResponse>("/api/score", { text });
  }

  structure(text: string, backend?: string, shots?: number): Promise<StructureResponse> {
    const body: Record<string, unknown> = { text };
    if (backend !== undefined) body.backend = backend;
    if (shots !== undefined) body.shots = shots;
    return this.post<StructureResponse>("/api/structure", body);
  }

  metrics(candidate: string, reference: string): Promise<MetricsResponse> {
    return this.post<MetricsResponse>("/api/metrics", { candidate, reference });
  }

  async health(): Promise<HealthResponse> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}/api/health`);
    } catch (err) {
      throw new ApiError(`network failure: ${String(err)}`, null);
    }
    if (!response.ok) throw new ApiError(`HTTP ${response.status}`, response.status);
    return (await response.json()) as HealthResponse;
  }
}
