/**
 * Sequence composer: the only path through which the UI builds command text.
 *
 * Every step is validated by the grammar before it joins the list, so the
 * composed sequence is grammar-valid by construction. Invalid input throws
 * a GrammarError and leaves the composer untouched.
 */

import {
  GrammarError,
  RotationCommand,
  parseCommand,
  serializeSequence,
  surface,
} from "./grammar.js";

export type ComposerDirection = "left" | "right" | "up" | "down" | "cw" | "ccw";

export const COMPOSER_DIRECTIONS: readonly ComposerDirection[] = [
  "left", "right", "up", "down", "cw", "ccw",
];

function tokenFor(direction: ComposerDirection, angleText: string): string {
  const angle = angleText.trim();
  if (direction === "cw" || direction === "ccw") {
    return `rotate:${direction}:${angle}`;
  }
  return `${direction}:${angle}`;
}

export class SequenceComposer {
  private steps: RotationCommand[] = [];

  /** Add one direction + angle step; throws GrammarError on a bad angle. */
  addStep(direction: ComposerDirection, angle: string | number): RotationCommand {
    const command = parseCommand(tokenFor(direction, String(angle)));
    this.steps.push(command);
    return command;
  }

  /** Add a reset step (the caller gates this on the session config). */
  addReset(): RotationCommand {
    const command = parseCommand("reset");
    this.steps.push(command);
    return command;
  }

  removeStep(index: number): void {
    if (index < 0 || index >= this.steps.length) {
      throw new GrammarError(`no step at index ${index}`);
    }
    this.steps.splice(index, 1);
  }

  clear(): void {
    this.steps = [];
  }

  get length(): number {
    return this.steps.length;
  }

  /** Canonical per-step texts, for rendering the sequence list. */
  list(): string[] {
    return this.steps.map(surface);
  }

  /** The full comma-joined sequence; empty composer yields "". */
  text(): string {
    return this.steps.length === 0 ? "" : serializeSequence(this.steps);
  }
}
