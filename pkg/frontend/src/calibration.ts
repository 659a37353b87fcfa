/**
 * Calibration workflow: nudge a stored pose until the live render matches
 * the reference tile, then commit it back into the dataset.
 *
 * The browser never simulates rotation. Every nudge is a server round trip
 * and the tracked pose is always the last server-acknowledged one (taken
 * from the nudge response itself), so the live render and the pose readout
 * can never drift apart.
 */

import { ApiError, OfflineError, StudioClient } from "./api.js";
import { GrammarError, parseCommand, surface } from "./grammar.js";

export type NudgeAxis = "yaw" | "pitch" | "roll";

/** Button granularity: coarse and fine steps per axis, both signs. */
export const NUDGE_STEPS: readonly number[] = [5, 15];

export type OverlayMode = "side-by-side" | "difference";

const POSE_TOL = 1e-9;

/** Unit-quaternion equality up to sign, mirroring the server's tolerance. */
export function posesMatch(a: readonly number[], b: readonly number[]): boolean {
  if (a.length !== 4 || b.length !== 4) return false;
  let dot = 0;
  for (let i = 0; i < 4; i += 1) dot += (a[i] as number) * (b[i] as number);
  return Math.abs(dot) >= 1 - POSE_TOL;
}

/**
 * Map an axis nudge to grammar text: positive yaw orbits right, positive
 * pitch orbits up, positive roll spins clockwise; negatives go the other way.
 */
export function nudgeCommand(axis: NudgeAxis, degrees: number): string {
  if (!Number.isFinite(degrees)) {
    throw new GrammarError(`nudge angle must be finite, got ${degrees}`);
  }
  const magnitude = Math.abs(degrees);
  const positive = degrees >= 0;
  let token: string;
  if (axis === "yaw") {
    token = `${positive ? "right" : "left"}:${magnitude}`;
  } else if (axis === "pitch") {
    token = `${positive ? "up" : "down"}:${magnitude}`;
  } else {
    token = `rotate:${positive ? "cw" : "ccw"}:${magnitude}`;
  }
  return surface(parseCommand(token));
}

export interface CalibrationSnapshot {
  pose: number[];
  dirty: boolean;
  nudges: string[];
  lastRender: Blob | null;
}

export class CalibrationWorkflow {
  readonly calibrationId: string;
  readonly problemId: string;
  readonly object: string;
  overlay: OverlayMode = "side-by-side";

  private pose: number[];
  private committedPose: number[];
  private nudges: string[] = [];
  private lastRender: Blob | null = null;

  private constructor(
    private readonly client: StudioClient,
    info: { calibration_id: string; problem_id: string; object: string; pose: number[] },
  ) {
    this.calibrationId = info.calibration_id;
    this.problemId = info.problem_id;
    this.object = info.object;
    this.pose = [...info.pose];
    this.committedPose = [...info.pose];
  }

  static async start(
    client: StudioClient, problemId: string, object: string,
  ): Promise<CalibrationWorkflow> {
    return new CalibrationWorkflow(client, await client.calibrationStart(problemId, object));
  }

  state(): CalibrationSnapshot {
    return {
      pose: [...this.pose],
      dirty: !posesMatch(this.pose, this.committedPose),
      nudges: [...this.nudges],
      lastRender: this.lastRender,
    };
  }

  /** Reference image the user aligns against (served, never synthesized). */
  referencePath(): string {
    return this.client.tilePath(this.problemId, this.object);
  }

  private async applyNudge(command: string): Promise<CalibrationSnapshot> {
    const result = await this.client.nudge(this.calibrationId, command);
    this.pose = result.pose;
    this.lastRender = result.png;
    this.nudges.push(command);
    return this.state();
  }

  /** One button press: +-5 or +-15 degrees about one axis. */
  nudgeBy(axis: NudgeAxis, degrees: number): Promise<CalibrationSnapshot> {
    return this.applyNudge(nudgeCommand(axis, degrees));
  }

  /** Free-angle entry; validated by the grammar before it leaves the client. */
  nudgeFree(axis: NudgeAxis, degrees: number): Promise<CalibrationSnapshot> {
    if (!Number.isFinite(degrees)) {
      return Promise.reject(new GrammarError(`angle must be a number, got ${degrees}`));
    }
    return this.applyNudge(nudgeCommand(axis, degrees));
  }

  /** Discard all uncommitted nudges; the server restores the stored pose. */
  async revert(): Promise<CalibrationSnapshot> {
    const result = await this.client.revert(this.calibrationId);
    this.pose = result.pose;
    this.nudges = [];
    this.lastRender = null;
    return this.state();
  }

  /** Persist the working pose into the dataset; returns the new checksum. */
  async commit(author: string): Promise<string> {
    const result = await this.client.commit(this.calibrationId, author);
    this.pose = result.pose;
    this.committedPose = [...result.pose];
    this.nudges = [];
    return result.checksum;
  }
}

export function isOffline(error: unknown): boolean {
  return error instanceof OfflineError;
}

export function isReadOnly(error: unknown): boolean {
  return error instanceof ApiError && error.status === 403;
}
