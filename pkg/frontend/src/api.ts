/**
 * Typed client for the scaffold service REST API.
 *
 * Every displayed number in the UI originates from one of these calls;
 * the client never recomputes utilities or policies locally.
 */

export interface TaskParams {
  bpm: number;
  note_range: number;
  complexity_level?: number;
}

export interface PosteriorStat {
  mean: number;
  std: number;
}

export interface Recommendation {
  schema_version: number;
  mode: string;
  posteriors: Record<string, PosteriorStat>;
  task: TaskParams;
}

export interface SessionSummary {
  schema_version: number;
  id: string;
  point_count: number;
  autopilot: string | null;
  cfg: Record<string, unknown>;
  gp_params: Record<string, number>;
}

export interface PolicyGridPayload {
  schema_version: number;
  bpm_values: number[];
  note_ranges: number[];
  mode_names: string[];
  modes: number[][];
  mean_IMP_TIMING: number[][];
  mean_IMP_PITCH: number[][];
}

export interface PosteriorRow {
  bpm: number;
  note_range: number;
  mean: number;
  std: number;
}

export interface PosteriorPayload {
  schema_version: number;
  mode: string;
  rows: PosteriorRow[];
}

export interface ObservationBody {
  bpm: number;
  note_range: number;
  mode: string;
  error_pre: { timing: number; pitch: number };
  error_post: { timing: number; pitch: number };
}

export interface ObservationResult {
  schema_version: number;
  utility: number;
  point_count: number;
}

export interface AutopilotStep {
  schema_version: number;
  task: TaskParams;
  mode: string;
  utility: number;
  point_count: number;
}

export interface ApiError {
  code: string;
  message: string;
}

export class ServerError extends Error {
  constructor(readonly status: number, readonly payload: ApiError) {
    super(`${payload.code}: ${payload.message}`);
  }
}

async function parse<T>(response: Response): Promise<T> {
  const body = await response.json();
  if (!response.ok) {
    throw new ServerError(response.status, body as ApiError);
  }
  return body as T;
}

export class ScaffoldApi {
  constructor(readonly baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async createSession(options: {
    sim?: Record<string, unknown>;
    gp?: Record<string, number>;
    autopilot?: string | null;
    seed?: number;
  } = {}): Promise<SessionSummary> {
    const response = await fetch(this.url("/sessions"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(options),
    });
    return parse<SessionSummary>(response);
  }

  async getSession(id: string): Promise<SessionSummary> {
    return parse(await fetch(this.url(`/sessions/${id}`)));
  }

  async recommend(id: string, task: TaskParams): Promise<Recommendation> {
    const query = `bpm=${task.bpm}&note_range=${task.note_range}`;
    return parse(await fetch(this.url(`/sessions/${id}/recommendation?${query}`)));
  }

  async observe(id: string, body: ObservationBody): Promise<ObservationResult> {
    const response = await fetch(this.url(`/sessions/${id}/observations`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return parse<ObservationResult>(response);
  }

  async policy(id: string): Promise<PolicyGridPayload> {
    return parse(await fetch(this.url(`/sessions/${id}/policy`)));
  }

  async posterior(id: string, mode: string): Promise<PosteriorPayload> {
    return parse(await fetch(this.url(`/sessions/${id}/posterior?mode=${mode}`)));
  }

  async autopilotStep(id: string): Promise<AutopilotStep> {
    const response = await fetch(this.url(`/sessions/${id}/autopilot/step`), { method: "POST" });
    return parse<AutopilotStep>(response);
  }
}
