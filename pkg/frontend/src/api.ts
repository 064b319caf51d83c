import type {
  PatientDetail,
  PatientsResponse,
  RecommendBody,
  Recommendation,
  SweepBody,
  SweepResponse,
} from "./types";

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    } catch (err) {
      throw new ApiError(0, `service unreachable: ${String(err)}`);
    }
    const text = await response.text();
    let payload: unknown;
    try {
      payload = JSON.parse(text);
    } catch {
      throw new ApiError(response.status, `invalid response body: ${text.slice(0, 80)}`);
    }
    if (!response.ok) {
      const message =
        typeof payload === "object" && payload !== null && "error" in payload
          ? String((payload as { error: unknown }).error)
          : `request failed (${response.status})`;
      throw new ApiError(response.status, message);
    }
    return payload as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  health(): Promise<{ status: string }> {
    return this.request("/health");
  }

  patients(): Promise<PatientsResponse> {
    return this.request("/patients");
  }

  patient(id: string): Promise<PatientDetail> {
    return this.request(`/patient/${encodeURIComponent(id)}`);
  }

  recommend(body: RecommendBody): Promise<Recommendation> {
    return this.post("/recommend", body);
  }

  sweep(body: SweepBody): Promise<SweepResponse> {
    return this.post("/sweep", body);
  }
}
