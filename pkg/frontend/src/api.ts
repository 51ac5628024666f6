import type {
  ContrastAnswer,
  ModelInfo,
  ProfileAnswer,
  SummaryAnswer,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`API error ${status}: ${detail}`);
  }
}

/** Thin JSON client; every number the UI shows comes from these bodies. */
export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchFn(this.baseUrl + path, init);
    if (!res.ok) {
      let detail = res.statusText;
      try {
        const body = (await res.json()) as { detail?: string };
        if (body.detail) detail = String(body.detail);
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(res.status, detail);
    }
    return (await res.json()) as T;
  }

  getModel(): Promise<ModelInfo> {
    return this.request<ModelInfo>("/model");
  }

  getSummary(): Promise<SummaryAnswer> {
    return this.request<SummaryAnswer>("/summary");
  }

  profile(covariates: Record<string, number>): Promise<ProfileAnswer> {
    return this.request<ProfileAnswer>("/profile", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ covariates }),
    });
  }

  contrast(g: string, gPrime: string, q = 0): Promise<ContrastAnswer> {
    return this.request<ContrastAnswer>("/contrast", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ g, g_prime: gPrime, q }),
    });
  }
}
