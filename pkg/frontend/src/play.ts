/**
 * Human play session over the /v1 commands endpoint.
 *
 * The state machine mirrors the server loop policy: the answer buttons stay
 * disabled until the session has reached its configured iteration minimum,
 * the server remains the authority (an early answer still comes back as a
 * policy notice, never a crash), and a 409 conflict refreshes local state
 * from the server instead of guessing.
 */

import { ApiError, SessionInfo, StudioClient } from "./api.js";
import { parseSequence } from "./grammar.js";

export interface GridUpdate {
  target: string;
  png: Blob;
  iteration: number;
}

export interface SendOutcome {
  ok: boolean;
  grid: GridUpdate | null;
  notice: string | null;
}

export interface AnswerOutcome {
  accepted: boolean;
  correct: boolean | null;
  notice: string | null;
}

export class PlaySession {
  private info: SessionInfo;
  private grids = new Map<string, GridUpdate>();

  private constructor(private readonly client: StudioClient, info: SessionInfo) {
    this.info = info;
  }

  static async start(
    client: StudioClient, problemId: string, overrides: Record<string, unknown> = {},
  ): Promise<PlaySession> {
    const info = await client.createSession({ problem_id: problemId, ...overrides });
    return new PlaySession(client, info);
  }

  get sessionId(): string {
    return this.info.session_id;
  }

  get problemId(): string {
    return this.info.problem_id;
  }

  get status(): string {
    return this.info.status;
  }

  get nextIteration(): number {
    return this.info.next_iteration;
  }

  get minIterations(): number {
    return this.info.config.min_iterations;
  }

  get resetEnabled(): boolean {
    return this.info.config.reset_enabled;
  }

  /** Targets the composer may address, honoring the original-object gate. */
  get targets(): string[] {
    const options = ["A", "B", "C"];
    return this.info.config.allow_original_target
      ? ["original", ...options]
      : options;
  }

  get finished(): boolean {
    return this.info.status !== "live";
  }

  /** Answer buttons enable exactly when the server would accept an answer. */
  get canAnswer(): boolean {
    return !this.finished && this.nextIteration >= this.minIterations;
  }

  lastGrid(target: string): GridUpdate | null {
    return this.grids.get(target) ?? null;
  }

  /** Re-pull authoritative session state (used after conflicts). */
  async refresh(): Promise<void> {
    this.info = await this.client.getSession(this.info.session_id);
  }

  /**
   * Send one grammar-validated sequence at one target. Grammar errors throw
   * before any network traffic; server-side rejections come back as notices.
   */
  async send(target: string, sequenceText: string): Promise<SendOutcome> {
    parseSequence(sequenceText); // composer output must already be valid
    try {
      const result = await this.client.sendCommands(
        this.info.session_id, target, sequenceText,
      );
      const grid = { target, png: result.png, iteration: result.iteration };
      this.grids.set(target, grid);
      this.info = {
        ...this.info,
        status: result.status,
        iteration_count: result.iteration,
        next_iteration: result.iteration + 1,
      };
      return { ok: true, grid, notice: null };
    } catch (exc) {
      if (exc instanceof ApiError && exc.status === 409) {
        await this.refresh();
        return { ok: false, grid: null, notice: exc.message_text };
      }
      if (exc instanceof ApiError && exc.status === 422) {
        return { ok: false, grid: null, notice: exc.message_text };
      }
      throw exc;
    }
  }

  async submitAnswer(label: string): Promise<AnswerOutcome> {
    const result = await this.client.submitAnswer(this.info.session_id, label);
    if (result.accepted) {
      this.info = { ...this.info, status: result.status, final_answer: label };
      return { accepted: true, correct: result.correct, notice: null };
    }
    await this.refresh();
    return { accepted: false, correct: null, notice: result.notice };
  }
}
