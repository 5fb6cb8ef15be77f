import type {
  CandidateFilters,
  CandidatePage,
  Candidate,
  DecisionAction,
  MappingLevel,
  QueryResponse,
  Stats,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Error carrying the HTTP status and the server's detail text verbatim. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: unknown,
  ) {
    super(typeof detail === "string" ? detail : JSON.stringify(detail));
    this.name = "ApiError";
  }
}

/**
 * Typed client for the review service. Every method corresponds to one
 * documented endpoint; nothing else is ever requested.
 */
export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async listCandidates(
    filters: CandidateFilters = {},
    page = 1,
    pageSize = 50,
  ): Promise<CandidatePage> {
    const params = new URLSearchParams();
    if (filters.level) params.set("level", filters.level);
    if (filters.status) params.set("status", filters.status);
    params.set("page", String(page));
    params.set("page_size", String(pageSize));
    return this.request<CandidatePage>(`/v1/candidates?${params.toString()}`);
  }

  async decide(
    candidateId: string,
    action: DecisionAction,
    reviewer: string,
    note?: string,
  ): Promise<Candidate> {
    const body = await this.request<{ candidate: Candidate }>(
      `/v1/candidates/${encodeURIComponent(candidateId)}/decision`,
      { action, reviewer, note: note ?? null },
    );
    return body.candidate;
  }

  async bulkDecide(
    level: MappingLevel,
    action: "accept" | "reject",
    reviewer: string,
  ): Promise<number> {
    const body = await this.request<{ affected: number }>(
      "/v1/candidates/bulk-decision",
      { level, action, reviewer },
    );
    return body.affected;
  }

  async stats(): Promise<Stats> {
    return this.request<Stats>("/v1/stats");
  }

  async ask(question: string): Promise<QueryResponse> {
    return this.request<QueryResponse>("/v1/query", { question });
  }

  private async request<T>(path: string, body?: unknown): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, {
        method: body === undefined ? "GET" : "POST",
        headers: body === undefined ? undefined : { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(0, `service unreachable: ${String(err)}`);
    }
    const text = await response.text();
    let payload: unknown = text;
    try {
      payload = text ? JSON.parse(text) : null;
    } catch {
      // non-JSON error body: surface the raw text
    }
    if (!response.ok) {
      const detail =
        payload && typeof payload === "object" && "detail" in payload
          ? (payload as { detail: unknown }).detail
          : payload;
      throw new ApiError(response.status, detail);
    }
    return payload as T;
  }
}
