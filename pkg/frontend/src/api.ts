/** Typed client for the study service. Every interaction with the backend
 * goes through this module; nothing else in the client talks to the network.
 */

export interface SessionDoc {
  participant_id: string;
  study_id: string;
  phase: "pre_viewing" | "familiarization" | "in_depth" | "complete";
  phase_started_at: string;
  sequence_order: string[];
  familiarity_submitted: boolean;
  familiarization_loops: Record<string, number>;
  familiarization_loops_completed: number;
  familiarization_target: number;
  in_depth_loops: Record<string, number>;
  in_depth_loop_target: number;
  current_sequence: string | null;
  responses_submitted: string[];
  // present on mutation responses only
  warnings?: string[];
  amended?: boolean;
}

export interface StimulusInfo {
  sequence_id: string;
  area_id: string;
  media_uri: string;
  duration_s: number;
  frame_count: number;
  nominal_fps: number;
  denoising_strength: number;
}

export type ColumnType = "str" | "int" | "frac";

export interface ReportDoc {
  kind: string;
  group: string;
  meta: Record<string, unknown>;
  columns: [string, ColumnType][];
  rows: Record<string, unknown>[];
}

export interface ResponseDraft {
  sequence_id: string;
  guessed_area_id: string | null;
  q2: string;
  q3: string;
  q4: string;
  q5: string;
  loops_viewed?: number;
}

export interface ReportQuery {
  group?: string;
  policy?: string;
  threshold?: number;
  k?: number;
}

/** Service rejection, carrying the machine-readable reason code. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly reason: string,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

/** The slice of the API a participant session needs. The flow controller is
 * written against this interface so tests can substitute a scripted stub. */
export interface SessionApi {
  getSession(pid: string): Promise<SessionDoc>;
  submitFamiliarity(pid: string, profile: Record<string, string>): Promise<SessionDoc>;
  recordLoop(pid: string, sequenceId: string): Promise<SessionDoc>;
  advancePhase(pid: string): Promise<SessionDoc>;
  submitResponse(pid: string, draft: ResponseDraft): Promise<SessionDoc>;
}

export class StudyApi implements SessionApi {
  constructor(private readonly base: string) {}

  private async send<T>(method: string, path: string, body?: unknown): Promise<T> {
    const res = await fetch(this.base + path, {
      method,
      headers: body === undefined ? undefined : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await res.json();
    if (!res.ok) {
      const reason = typeof payload?.reason === "string" ? payload.reason : "unknown";
      const detail = typeof payload?.detail === "string" ? payload.detail : res.statusText;
      throw new ApiError(res.status, reason, detail);
    }
    return payload as T;
  }

  registerParticipant(studyId: string, attrs: Record<string, unknown>): Promise<SessionDoc> {
    return this.send("POST", `/studies/${encodeURIComponent(studyId)}/participants`, attrs);
  }

  getSession(pid: string): Promise<SessionDoc> {
    return this.send("GET", `/sessions/${encodeURIComponent(pid)}`);
  }

  submitFamiliarity(pid: string, profile: Record<string, string>): Promise<SessionDoc> {
    return this.send("POST", `/sessions/${encodeURIComponent(pid)}/familiarity`, { profile });
  }

  recordLoop(pid: string, sequenceId: string): Promise<SessionDoc> {
    return this.send("POST", `/sessions/${encodeURIComponent(pid)}/loops`, {
      sequence_id: sequenceId,
    });
  }

  advancePhase(pid: string): Promise<SessionDoc> {
    return this.send("POST", `/sessions/${encodeURIComponent(pid)}/advance`);
  }

  submitResponse(pid: string, draft: ResponseDraft): Promise<SessionDoc> {
    return this.send("POST", `/sessions/${encodeURIComponent(pid)}/responses`, draft);
  }

  listStimuli(studyId: string): Promise<StimulusInfo[]> {
    return this.send("GET", `/studies/${encodeURIComponent(studyId)}/stimuli`);
  }

  getReport(studyId: string, kind: string, query: ReportQuery = {}): Promise<ReportDoc> {
    const params = new URLSearchParams();
    if (query.group) params.set("group", query.group);
    if (query.policy) params.set("policy", query.policy);
    if (query.threshold !== undefined) params.set("threshold", String(query.threshold));
    if (query.k !== undefined) params.set("k", String(query.k));
    const suffix = params.size ? `?${params}` : "";
    return this.send(
      "GET",
      `/studies/${encodeURIComponent(studyId)}/reports/${encodeURIComponent(kind)}${suffix}`,
    );
  }
}
