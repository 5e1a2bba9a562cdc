import type {
  SessionInfo,
  SessionMetrics,
  StepRequestBody,
  StepResult,
  TraceResponse,
} from "./types.js";

export class ServiceError extends Error {
  constructor(readonly status: number, detail: string) {
    super(`service error ${status}: ${detail}`);
  }
}

async function parseOrThrow<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: unknown };
      if (body.detail !== undefined) detail = JSON.stringify(body.detail);
    } catch {
      /* non-JSON error body; keep statusText */
    }
    throw new ServiceError(response.status, detail);
  }
  return (await response.json()) as T;
}

/** What the session controller needs from the service. */
export interface SessionApi {
  createSession(carryBelief?: boolean): Promise<SessionInfo>;
  step(sessionId: string, body: StepRequestBody): Promise<StepResult>;
  batchSteps(sessionId: string, steps: StepRequestBody[]): Promise<StepResult[]>;
  trace(sessionId: string): Promise<TraceResponse>;
  metrics(sessionId: string): Promise<SessionMetrics>;
  streamUrl(sessionId: string): string;
}

/** Thin fetch wrapper over the interaction service; no math happens here. */
export class ServiceClient implements SessionApi {
  constructor(readonly baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async health(): Promise<boolean> {
    try {
      const r = await fetch(this.url("/healthz"));
      return r.ok;
    } catch {
      return false;
    }
  }

  async createSession(carryBelief = false): Promise<SessionInfo> {
    const r = await fetch(this.url("/sessions"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ carry_belief: carryBelief }),
    });
    return parseOrThrow<SessionInfo>(r);
  }

  async step(sessionId: string, body: StepRequestBody): Promise<StepResult> {
    const r = await fetch(this.url(`/sessions/${sessionId}/step`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return parseOrThrow<StepResult>(r);
  }

  async batchSteps(
    sessionId: string,
    steps: StepRequestBody[],
  ): Promise<StepResult[]> {
    const r = await fetch(this.url(`/sessions/${sessionId}/steps`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ steps }),
    });
    const parsed = await parseOrThrow<{ results: StepResult[] }>(r);
    return parsed.results;
  }

  async trace(sessionId: string): Promise<TraceResponse> {
    const r = await fetch(this.url(`/sessions/${sessionId}/trace`));
    return parseOrThrow<TraceResponse>(r);
  }

  async metrics(sessionId: string): Promise<SessionMetrics> {
    const r = await fetch(this.url(`/sessions/${sessionId}/metrics`));
    return parseOrThrow<SessionMetrics>(r);
  }

  streamUrl(sessionId: string): string {
    return this.url(`/sessions/${sessionId}/stream`);
  }
}
