import type {
  CharacteristicEntry,
  ProjectSummary,
  SessionProgress,
  TaskEnvelope,
  VoteBody,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = typeof fetch;

/**
 * Thin typed client over the /v1 review API. One instance per reviewer
 * token; every state change maps to exactly one request.
 */
export class ApiClient {
  constructor(
    private readonly token: string,
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.base}/v1${path}`, {
      ...init,
      headers: {
        Authorization: `Bearer ${this.token}`,
        "Content-Type": "application/json",
        ...(init?.headers ?? {}),
      },
    });
    const text = await response.text();
    if (!response.ok) {
      let code = `http-${response.status}`;
      let message = text;
      try {
        const body = JSON.parse(text);
        if (body?.error?.code) {
          code = body.error.code;
          message = body.error.message;
        }
      } catch {
        // non-JSON error body: keep the raw text
      }
      throw new ApiError(response.status, code, message);
    }
    return JSON.parse(text) as T;
  }

  listProjects(): Promise<{ projects: ProjectSummary[] }> {
    return this.request("/projects");
  }

  characteristics(): Promise<{ characteristics: CharacteristicEntry[] }> {
    return this.request("/characteristics");
  }

  openSession(projectId: string): Promise<SessionProgress> {
    return this.request("/sessions", {
      method: "POST",
      body: JSON.stringify({ project_id: projectId }),
    });
  }

  nextTask(sessionId: string): Promise<TaskEnvelope> {
    return this.request(`/sessions/${encodeURIComponent(sessionId)}/next-task`);
  }

  progress(sessionId: string): Promise<SessionProgress> {
    return this.request(`/sessions/${encodeURIComponent(sessionId)}/progress`);
  }

  submitVote(sessionId: string, vote: VoteBody): Promise<SessionProgress> {
    return this.request(`/sessions/${encodeURIComponent(sessionId)}/votes`, {
      method: "POST",
      body: JSON.stringify(vote),
    });
  }

  reportUrl(projectId: string): string {
    return `${this.base}/v1/projects/${encodeURIComponent(projectId)}/report`;
  }
}
