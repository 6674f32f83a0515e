/** Typed client for the annotation service. Every call the UI makes to
 * the server goes through this module; nothing mutates session state
 * except postCorrection / finalize / reopen. */

import type {
  CandidateWindowView,
  CorrectionRequest,
  ErrorBody,
  MatchView,
  SessionView,
} from "./types.js";

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly detail: Record<string, unknown>;

  constructor(status: number, body: ErrorBody) {
    super(body.message);
    this.status = status;
    this.code = body.code;
    this.detail = body.detail ?? {};
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl = "", fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    if (!response.ok) {
      let body: ErrorBody;
      try {
        body = (await response.json()) as ErrorBody;
      } catch {
        body = { code: "http_error", message: `HTTP ${response.status}` };
      }
      throw new ApiError(response.status, body);
    }
    return (await response.json()) as T;
  }

  listSessions(): Promise<{ sessions: string[] }> {
    return this.request("/sessions");
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request(`/sessions/${sessionId}`);
  }

  getMatches(sessionId: string): Promise<{ version: number; matches: MatchView[] }> {
    return this.request(`/sessions/${sessionId}/matches`);
  }

  getCandidates(
    sessionId: string,
    position: number,
    radius?: number,
  ): Promise<CandidateWindowView> {
    const query = radius === undefined ? "" : `?radius=${radius}`;
    return this.request(`/sessions/${sessionId}/matches/${position}/candidates${query}`);
  }

  postCorrection(
    sessionId: string,
    correction: CorrectionRequest,
  ): Promise<{ version: number; matches: MatchView[] }> {
    return this.request(`/sessions/${sessionId}/corrections`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(correction),
    });
  }

  finalize(sessionId: string): Promise<{ artifacts: string[] }> {
    return this.request(`/sessions/${sessionId}/finalize`, { method: "POST" });
  }

  reopen(sessionId: string): Promise<SessionView> {
    return this.request(`/sessions/${sessionId}/reopen`, { method: "POST" });
  }
}
