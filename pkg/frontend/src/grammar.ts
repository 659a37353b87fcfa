/**
 * Client-side mirror of the rotation-command grammar.
 *
 *     left:V | right:V | up:V | down:V | rotate:cw:V | rotate:ccw:V | reset
 *
 * Keywords are case-insensitive, V is a plain decimal angle in degrees, and
 * sequences are comma-separated. The UI funnels every command through this
 * module, so nothing the browser sends can be outside the grammar; the
 * server re-validates with the same rules and stays the authority.
 */

const NUMBER_RE = /^[+-]?(?:\d+(?:\.\d*)?|\.\d+)$/;

export type OrbitDirection = "left" | "right" | "up" | "down";
export type RollDirection = "cw" | "ccw";
export type Direction = OrbitDirection | RollDirection | "reset";

export interface RotationCommand {
  readonly direction: Direction;
  readonly angle: number | null;
}

export class GrammarError extends Error {
  readonly token: string;
  readonly index: number | null;

  constructor(message: string, token = "", index: number | null = null) {
    super(index !== null ? `command ${index}: ${message}` : message);
    this.name = "GrammarError";
    this.token = token;
    this.index = index;
  }
}

function formatAngle(angle: number): string {
  return Number.isInteger(angle) ? String(Math.trunc(angle)) : String(angle);
}

/** Canonical text for a parsed command, e.g. "left:30" or "rotate:cw:45". */
export function surface(cmd: RotationCommand): string {
  if (cmd.direction === "reset") return "reset";
  const angle = formatAngle(cmd.angle as number);
  if (cmd.direction === "cw" || cmd.direction === "ccw") {
    return `rotate:${cmd.direction}:${angle}`;
  }
  return `${cmd.direction}:${angle}`;
}

function parseAngle(text: string, token: string, index: number | null): number {
  if (!NUMBER_RE.test(text)) {
    throw new GrammarError(
      `angle '${text}' is not a decimal number in '${token}'`, token, index,
    );
  }
  return Number(text);
}

/** Parse one command token; throws GrammarError naming the token. */
export function parseCommand(text: string, index: number | null = null): RotationCommand {
  const token = text.trim();
  if (!token) {
    throw new GrammarError("empty command token", text, index);
  }
  const parts = token.toLowerCase().split(":").map((p) => p.trim());
  const head = parts[0] as string;
  if (head === "reset") {
    if (parts.length !== 1) {
      throw new GrammarError(`'reset' takes no angle, got '${token}'`, token, index);
    }
    return { direction: "reset", angle: null };
  }
  if (head === "rotate") {
    if (parts.length !== 3 || (parts[1] !== "cw" && parts[1] !== "ccw")) {
      throw new GrammarError(
        `rotate needs the form rotate:cw:V or rotate:ccw:V, got '${token}'`,
        token, index,
      );
    }
    return {
      direction: parts[1] as RollDirection,
      angle: parseAngle(parts[2] as string, token, index),
    };
  }
  if (head === "cw" || head === "ccw") {
    throw new GrammarError(
      `'${head}' is not a command on its own; use rotate:${head}:V`, token, index,
    );
  }
  if (head === "left" || head === "right" || head === "up" || head === "down") {
    if (parts.length !== 2) {
      throw new GrammarError(
        `'${head}' needs exactly one angle, got '${token}'`, token, index,
      );
    }
    return { direction: head, angle: parseAngle(parts[1] as string, token, index) };
  }
  throw new GrammarError(`unknown command keyword '${head}'`, token, index);
}

/** Parse a comma-separated sequence; errors carry the 0-based token index. */
export function parseSequence(text: string): RotationCommand[] {
  if (!text.trim()) {
    throw new GrammarError("empty command sequence", text);
  }
  return text.split(",").map((tok, i) => parseCommand(tok, i));
}

export function serializeSequence(commands: readonly RotationCommand[]): string {
  return commands.map(surface).join(",");
}
