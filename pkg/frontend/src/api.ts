/**
 * Typed client for the studio /v1 JSON + PNG API.
 *
 * Injectable fetch keeps the client testable; a network-level failure maps
 * to OfflineError (the UI shows a banner and disables controls) while any
 * non-2xx status maps to ApiError carrying the parsed error detail.
 */

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface ProblemSummary {
  id: string;
  statement: string;
  objects: string[];
}

export interface ProblemList {
  problems: ProblemSummary[];
  count: number;
  checksum: string | null;
}

export interface SessionConfigInfo {
  min_iterations: number;
  max_iterations: number;
  reset_enabled: boolean;
  allow_original_target: boolean;
  hint_360: boolean;
  [key: string]: unknown;
}

export interface SessionInfo {
  session_id: string;
  problem_id: string;
  status: string;
  iteration_count: number;
  next_iteration: number;
  final_answer: string | null;
  config: SessionConfigInfo;
}

export interface CreateSessionRequest {
  problem_id: string;
  condition?: string;
  min_iterations?: number;
  max_iterations?: number;
  reset_enabled?: boolean;
  allow_original_target?: boolean;
  hint_360?: boolean;
}

export interface CommandsResult {
  png: Blob;
  iteration: number;
  status: string;
}

export interface AnswerResult {
  accepted: boolean;
  correct: boolean | null;
  status: string;
  iteration: number | null;
  notice: string | null;
}

export interface CalibrationInfo {
  calibration_id: string;
  problem_id: string;
  object: string;
  pose: number[];
}

export interface CalibrationState {
  calibration_id: string;
  problem_id: string;
  object: string;
  working_pose: number[];
  committed_pose: number[];
  dirty: boolean;
}

export interface NudgeResult {
  png: Blob;
  pose: number[];
}

export interface CommitResult {
  committed: boolean;
  problem_id: string;
  object: string;
  pose: number[];
  checksum: string;
}

export interface AnswersAggregate {
  answers: Array<Record<string, unknown>>;
  count: number;
  accuracy: number | null;
}

export class ApiError extends Error {
  readonly status: number;
  readonly detail: unknown;

  constructor(status: number, detail: unknown) {
    super(typeof detail === "string" ? detail : JSON.stringify(detail));
    this.name = "ApiError";
    this.status = status;
    this.detail = detail;
  }

  /** Best human-readable message from a structured error detail. */
  get message_text(): string {
    const d = this.detail as Record<string, unknown> | string | null;
    if (d && typeof d === "object") {
      if (typeof d.error === "string") return d.error;
      if (Array.isArray(d.problems)) return d.problems.join("; ");
    }
    return typeof d === "string" ? d : this.message;
  }
}

export class OfflineError extends Error {
  readonly cause: unknown;

  constructor(cause: unknown) {
    super("studio service unreachable");
    this.name = "OfflineError";
    this.cause = cause;
  }
}

async function errorDetail(response: Response): Promise<unknown> {
  try {
    const doc = (await response.json()) as Record<string, unknown>;
    return "detail" in doc ? doc.detail : doc;
  } catch {
    return await response.text().catch(() => response.statusText);
  }
}

export class StudioClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.base + path, init);
    } catch (exc) {
      throw new OfflineError(exc);
    }
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    return response;
  }

  private async getJson<T>(path: string): Promise<T> {
    return (await (await this.request(path)).json()) as T;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const response = await this.request(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return (await response.json()) as T;
  }

  // --- problems ---------------------------------------------------------

  listProblems(): Promise<ProblemList> {
    return this.getJson("/v1/problems");
  }

  problemImagePath(problemId: string): string {
    return `${this.base}/v1/problems/${problemId}/image`;
  }

  tilePath(problemId: string, key: string): string {
    return `${this.base}/v1/problems/${problemId}/tiles/${key}`;
  }

  // --- play sessions ------------------------------------------------------

  createSession(body: CreateSessionRequest): Promise<SessionInfo> {
    return this.postJson("/v1/sessions", body);
  }

  getSession(sessionId: string): Promise<SessionInfo> {
    return this.getJson(`/v1/sessions/${sessionId}`);
  }

  /** One target + one command sequence; the labeled snapshot grid comes back. */
  async sendCommands(
    sessionId: string, target: string, sequence: string,
  ): Promise<CommandsResult> {
    const response = await this.request(`/v1/sessions/${sessionId}/commands`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ target, sequence }),
    });
    return {
      png: await response.blob(),
      iteration: Number(response.headers.get("x-iteration") ?? "0"),
      status: response.headers.get("x-session-status") ?? "unknown",
    };
  }

  /**
   * Submit a final answer. A 409 is the loop policy talking (too early),
   * reported as accepted=false with the server's notice rather than a throw.
   */
  async submitAnswer(sessionId: string, answer: string): Promise<AnswerResult> {
    try {
      const doc = await this.postJson<{
        accepted: boolean; correct: boolean | null; status: string; iteration: number;
      }>(`/v1/sessions/${sessionId}/answer`, { answer });
      return { ...doc, notice: null };
    } catch (exc) {
      if (exc instanceof ApiError && exc.status === 409) {
        return {
          accepted: false, correct: null, status: "live",
          iteration: null, notice: exc.message_text,
        };
      }
      throw exc;
    }
  }

  snapshotPath(sessionId: string, key: string): string {
    return `${this.base}/v1/sessions/${sessionId}/objects/${key}/snapshot`;
  }

  transcriptZipPath(sessionId: string): string {
    return `${this.base}/v1/sessions/${sessionId}/transcript.zip`;
  }

  answersAggregate(): Promise<AnswersAggregate> {
    return this.getJson("/v1/answers");
  }

  // --- calibration --------------------------------------------------------

  calibrationStart(problemId: string, object: string): Promise<CalibrationInfo> {
    return this.postJson("/v1/calibration/start", { problem_id: problemId, object });
  }

  calibrationState(calibrationId: string): Promise<CalibrationState> {
    return this.getJson(`/v1/calibration/${calibrationId}`);
  }

  calibrationRenderPath(calibrationId: string, bust: number): string {
    return `${this.base}/v1/calibration/${calibrationId}/render?t=${bust}`;
  }

  /** Apply one nudge sequence; the acknowledged pose rides the X-Pose header. */
  async nudge(calibrationId: string, command: string): Promise<NudgeResult> {
    const response = await this.request(`/v1/calibration/${calibrationId}/nudge`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ command }),
    });
    const header = response.headers.get("x-pose");
    if (!header) {
      throw new ApiError(500, "nudge response is missing its X-Pose header");
    }
    return { png: await response.blob(), pose: JSON.parse(header) as number[] };
  }

  revert(calibrationId: string): Promise<{ pose: number[] }> {
    return this.postJson(`/v1/calibration/${calibrationId}/revert`, {});
  }

  commit(calibrationId: string, author: string): Promise<CommitResult> {
    return this.postJson(`/v1/calibration/${calibrationId}/commit`, { author });
  }
}
