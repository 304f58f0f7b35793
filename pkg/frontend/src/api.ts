// Thin fetch client for the advisor service.  All decision logic stays
// server-side; this module only moves JSON.

import type {
  HealthInfo,
  InstanceInfo,
  RecommendRequest,
  RecommendResponse,
} from "./types.js";

export class ServiceError extends Error {
  constructor(
    message: string,
    readonly status: number | null = null,
  ) {
    super(message);
  }
}

type FetchLike = typeof fetch;

export class AdvisorClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, init);
    } catch (err) {
      throw new ServiceError(`service unreachable: ${String(err)}`);
    }
    const body = await response.json().catch(() => null);
    if (!response.ok) {
      const detail =
        body && typeof body === "object" && "detail" in body
          ? JSON.stringify((body as { detail: unknown }).detail)
          : response.statusText;
      throw new ServiceError(detail, response.status);
    }
    return body as T;
  }

  health(): Promise<HealthInfo> {
    return this.request<HealthInfo>("/health");
  }

  instance(): Promise<InstanceInfo> {
    return this.request<InstanceInfo>("/instance");
  }

  async policies(): Promise<string[]> {
    const body = await this.request<{ policies: string[] }>("/policies");
    return body.policies;
  }

  solve(): Promise<{ gain: number }> {
    return this.request<{ gain: number }>("/solve", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: "{}",
    });
  }

  recommend(req: RecommendRequest): Promise<RecommendResponse> {
    return this.request<RecommendResponse>("/recommend", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
    });
  }
}
