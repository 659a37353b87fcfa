"""Rotation-command grammar and the JSON turn protocol spoken by agents.

The surface grammar is deliberately tiny:

    left:V | right:V | up:V | down:V | rotate:cw:V | rotate:ccw:V | reset

Keywords are case-insensitive, V is a decimal angle in degrees (negative
means the opposite direction), and sequences are comma-separated. A bare
"cw"/"ccw" is rejected: planar spins always need the rotate: prefix.
"""

from __future__ import annotations

import base64
import json
import re
from dataclasses import dataclass, field

DIRECTIONS = ("left", "right", "up", "down", "cw", "ccw")
ANSWER_LABELS = ("A", "B", "C")
OPTION_TARGETS = ("A", "B", "C")
ALL_TARGETS = ("original", "A", "B", "C")
CONCLUSIONS = ("unknown", "probably_not_the_answer", "probably_the_odd_one")

PROBLEM_STATEMENT = (
    "The left image shows the original cube stack made of equal-sized small "
    "cubes. Which of the options on the right cannot be obtained by rotating "
    "the original cube stack? Please answer from options A, B or C."
)

_NUMBER_RE = re.compile(r"^[+-]?(?:\d+(?:\.\d*)?|\.\d+)$")


class CommandParseError(ValueError):
    """A command token failed the grammar; `token` and `index` name the culprit."""

    def __init__(self, message: str, token: str = "", index: int | None = None):
        self.token = token
        self.index = index
        if index is not None:
            message = f"command {index}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class RotationCommand:
    """One grammar step: a direction and an angle in degrees (None for reset)."""

    direction: str
    angle: float | None

    def surface(self) -> str:
        if self.direction == "reset":
            return "reset"
        a = self.angle
        text = str(int(a)) if float(a).is_integer() else str(a)
        if self.direction in ("cw", "ccw"):
            return f"rotate:{self.direction}:{text}"
        return f"{self.direction}:{text}"


def _parse_angle(text: str, token: str, index: int | None) -> float:
    if not _NUMBER_RE.match(text):
        raise CommandParseError(
            f"angle '{text}' is not a decimal number in '{token}'", token, index
        )
    return float(text)


def parse_command(text: str, index: int | None = None) -> RotationCommand:
    """Parse a single command token; raises CommandParseError naming the token."""
    token = text.strip()
    if not token:
        raise CommandParseError("empty command token", token=text, index=index)
    parts = [p.strip() for p in token.lower().split(":")]
    head = parts[0]
    if head == "reset":
        if len(parts) != 1:
            raise CommandParseError(
                f"'reset' takes no angle, got '{token}'", token, index
            )
        return RotationCommand("reset", None)
    if head == "rotate":
        if len(parts) != 3 or parts[1] not in ("cw", "ccw"):
            raise CommandParseError(
                f"rotate needs the form rotate:cw:V or rotate:ccw:V, got '{token}'",
                token,
                index,
            )
        return RotationCommand(parts[1], _parse_angle(parts[2], token, index))
    if head in ("cw", "ccw"):
        raise CommandParseError(
            f"'{head}' is not a command on its own; use rotate:{head}:V", token, index
        )
    if head in ("left", "right", "up", "down"):
        if len(parts) != 2:
            raise CommandParseError(
                f"'{head}' needs exactly one angle, got '{token}'", token, index
            )
        return RotationCommand(head, _parse_angle(parts[1], token, index))
    raise CommandParseError(f"unknown command keyword '{head}'", token, index)


def parse_sequence(text: str) -> tuple[RotationCommand, ...]:
    """Parse a comma-separated command sequence; errors carry the 0-based index."""
    if not isinstance(text, str):
        raise CommandParseError(f"sequence must be a string, got {type(text).__name__}")
    if not text.strip():
        raise CommandParseError("empty command sequence", token=text)
    return tuple(
        parse_command(tok, index=i) for i, tok in enumerate(text.split(","))
    )


def serialize_sequence(commands) -> str:
    return ",".join(c.surface() for c in commands)


@dataclass(frozen=True)
class CommandSequence:
    """A target plus its raw sequence text; `error` is set when the text is bad.

    A malformed sequence invalidates only itself: the rest of the turn still
    executes and the error is echoed back to the agent on the next turn.
    """

    target: str
    raw: str
    steps: tuple[RotationCommand, ...] = ()
    error: str | None = None


@dataclass(frozen=True)
class TurnMemory:
    rationale: str
    partial_conclusion: tuple[tuple[str, str], ...]  # ((label, conclusion), ...)

    def conclusion(self, label: str) -> str:
        return dict(self.partial_conclusion)[label]


@dataclass(frozen=True)
class TurnOutput:
    memory: TurnMemory
    iteration_number: int
    commands: tuple[CommandSequence, ...]
    final_answer: str | None = None


class TurnParseError(ValueError):
    """Raised when an agent reply has no JSON object or violates the schema."""

    def __init__(self, category: str, problems: list[str]):
        self.category = category
        self.problems = tuple(problems)
        super().__init__(f"{category}: " + "; ".join(problems))


_FENCE_RE = re.compile(r"```json\s*(.*?)```", re.IGNORECASE | re.DOTALL)


def _balanced_objects(raw: str):
    """Yield top-level {...} substrings, tolerating strings and escapes."""
    depth = 0
    start = None
    in_str = False
    escape = False
    for i, ch in enumerate(raw):
        if in_str:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_str = False
            continue
        if ch == '"':
            in_str = True
        elif ch == "{":
            if depth == 0:
                start = i
            depth += 1
        elif ch == "}" and depth > 0:
            depth -= 1
            if depth == 0 and start is not None:
                yield raw[start : i + 1]
                start = None


def _extract_json(raw: str) -> dict:
    candidates = []
    m = _FENCE_RE.search(raw)
    if m:
        candidates.append(m.group(1))
    candidates.extend(_balanced_objects(raw))
    for text in candidates:
        try:
            obj = json.loads(text)
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            return obj
    raise TurnParseError("no-json-found", ["reply contains no parseable JSON object"])


def _normalize_target(value) -> str | None:
    if not isinstance(value, str):
        return None
    t = value.strip()
    if t.upper() in ANSWER_LABELS:
        return t.upper()
    if t.lower() == "original":
        return "original"
    return t  # left as-is; the session rejects unknown targets softly


def _normalize_answer(value, problems: list[str]) -> str | None:
    if value is None:
        return None
    if isinstance(value, str):
        v = value.strip().upper()
        if v in ANSWER_LABELS:
            return v
        if v in ("", "NULL", "NONE"):
            return None
    problems.append(f"final_answer must be one of {list(ANSWER_LABELS)} or null")
    return None


def parse_turn_output(raw: str) -> TurnOutput:
    """Extract and validate one turn reply.

    The JSON payload is taken from the first ```json fence, falling back to
    the first balanced top-level object. Unknown extra fields are ignored;
    missing required fields raise TurnParseError("schema-violation", ...).
    """
    obj = _extract_json(raw)
    problems: list[str] = []

    memory = obj.get("memory")
    rationale = ""
    conclusions: list[tuple[str, str]] = []
    if not isinstance(memory, dict):
        problems.append("memory: required object is missing")
    else:
        rationale = memory.get("rationale")
        if not isinstance(rationale, str):
            problems.append("memory.rationale: required string is missing")
            rationale = ""
        pc = memory.get("partial_conclusion")
        if not isinstance(pc, dict):
            problems.append("memory.partial_conclusion: required object is missing")
        else:
            for label in ANSWER_LABELS:
                value = pc.get(label)
                if value not in CONCLUSIONS:
                    problems.append(
                        f"memory.partial_conclusion.{label}: must be one of {list(CONCLUSIONS)}"
                    )
                    value = "unknown"
                conclusions.append((label, value))
    if not conclusions:
        conclusions = [(label, "unknown") for label in ANSWER_LABELS]

    iteration = obj.get("iteration_number")
    if isinstance(iteration, bool) or not isinstance(iteration, int) or iteration < 1:
        problems.append("iteration_number: required integer >= 1 is missing")
        iteration = 0

    raw_commands = obj.get("commands")
    sequences: list[CommandSequence] = []
    if not isinstance(raw_commands, list):
        problems.append("commands: required array is missing")
    else:
        for i, entry in enumerate(raw_commands):
            if not isinstance(entry, dict):
                problems.append(f"commands[{i}]: must be an object")
                continue
            target = _normalize_target(entry.get("target"))
            seq_text = entry.get("rotation_sequence")
            if target is None:
                problems.append(f"commands[{i}].target: must be a string")
                continue
            if not isinstance(seq_text, str):
                problems.append(f"commands[{i}].rotation_sequence: must be a string")
                continue
            try:
                steps = parse_sequence(seq_text)
                sequences.append(CommandSequence(target, seq_text, steps))
            except CommandParseError as exc:
                sequences.append(CommandSequence(target, seq_text, (), str(exc)))

    final_answer = _normalize_answer(obj.get("final_answer"), problems)

    if isinstance(raw_commands, list) and not raw_commands and final_answer is None:
        problems.append("commands: may be empty only when final_answer is given")

    if problems:
        raise TurnParseError("schema-violation", problems)
    return TurnOutput(
        memory=TurnMemory(rationale, tuple(conclusions)),
        iteration_number=iteration,
        commands=tuple(sequences),
        final_answer=final_answer,
    )


def serialize_turn_output(turn: TurnOutput, fenced: bool = False) -> str:
    """Emit the canonical JSON form; parse_turn_output round-trips it."""
    obj = {
        "memory": {
            "rationale": turn.memory.rationale,
            "partial_conclusion": dict(turn.memory.partial_conclusion),
        },
        "iteration_number": turn.iteration_number,
        "commands": [
            {"target": seq.target, "rotation_sequence": seq.raw}
            for seq in turn.commands
        ],
        "final_answer": turn.final_answer,
    }
    text = json.dumps(obj, indent=2)
    if fenced:
        return f"```json\n{text}\n```"
    return text


# ---------------------------------------------------------------------------
# Turn context: what an agent is shown each iteration.


@dataclass(frozen=True)
class TurnContext:
    """Everything shown to the agent for one turn.

    Images are PNG bytes. prior_outputs are the agent's earlier replies,
    verbatim; last_grids holds only the previous iteration's snapshot grids,
    one composed image per target. notices echo errors and policy rejections
    from the previous turn.
    """

    problem_id: str
    iteration: int
    statement: str
    problem_image: bytes
    prior_outputs: tuple[str, ...] = ()
    last_grids: tuple[tuple[str, bytes], ...] = ()
    original_snapshot: bytes = b""
    notices: tuple[str, ...] = ()


def _text_part(text: str) -> dict:
    return {"type": "text", "text": text}


def _image_part(name: str, png: bytes) -> dict:
    return {
        "type": "image_png",
        "name": name,
        "base64": base64.b64encode(png).decode("ascii"),
    }


def serialize_turn_context(ctx: TurnContext) -> list[dict]:
    """Flatten a TurnContext into an ordered message list for chat transports."""
    messages = [
        {
            "role": "user",
            "content": [
                _text_part(ctx.statement),
                _image_part("problem", ctx.problem_image),
            ],
        }
    ]
    for output in ctx.prior_outputs:
        messages.append({"role": "assistant", "content": [_text_part(output)]})
    parts: list[dict] = []
    if ctx.notices:
        parts.append(_text_part("Notices:\n" + "\n".join(ctx.notices)))
    for target, png in ctx.last_grids:
        parts.append(_text_part(f"Snapshots for {target} (iteration {ctx.iteration - 1}):"))
        parts.append(_image_part(f"grid_{target}", png))
    if ctx.original_snapshot:
        parts.append(_text_part("Current view of the original:"))
        parts.append(_image_part("original", ctx.original_snapshot))
    parts.append(
        _text_part(
            f"This is iteration {ctx.iteration}. Reply with exactly one JSON object."
        )
    )
    messages.append({"role": "user", "content": parts})
    return messages


# ---------------------------------------------------------------------------
# Task prompt.

PROMPT_VARIANTS = {
    "default": "",
    "match-first": (
        "Strategy hint: before judging any option, rotate it until its view "
        "matches the original as closely as possible, then compare cube by cube."
    ),
    "stepwise": (
        "Strategy hint: prefer many small rotations (15-30 degrees) over large "
        "jumps, and re-examine after every step."
    ),
    "classify": (
        "Strategy hint: first classify each option as same-shape or "
        "mirrored/different, then verify the single suspect before answering."
    ),
}


def build_task_prompt(
    *,
    min_iterations: int = 5,
    max_iterations: int = 15,
    reset_enabled: bool = False,
    hint_360: bool = False,
    allow_original_target: bool = False,
    prompt_variant: str = "default",
) -> str:
    """Compose the full task instruction block sent on every turn."""
    if prompt_variant not in PROMPT_VARIANTS:
        raise ValueError(f"unknown prompt variant '{prompt_variant}'")
    targets = "A, B or C" + (" (or original)" if allow_original_target else "")
    lines = [
        "You are solving a 3D odd-one-out rotation puzzle.",
        "",
        PROBLEM_STATEMENT,
        "",
        "A stateful 3D viewer holds each object. You never see raw 3D data; "
        "instead you send rotation commands and receive fresh renders next turn.",
        "",
        "Rotation commands (camera frame, angles in degrees; 0 is valid; a "
        "negative angle turns the opposite way):",
        "  left:V / right:V        orbit around the vertical axis",
        "  up:V / down:V           orbit around the horizontal axis",
        "  rotate:cw:V / rotate:ccw:V   spin in the image plane",
    ]
    if reset_enabled:
        lines.append("  reset                   return the object to its build orientation")
    lines += [
        "",
        f"Rotatable targets: {targets}. Commands are comma-separated sequences, "
        'e.g. "right:15,right:15,up:10"; every step is rendered, so a sequence '
        "returns a filmstrip of views.",
        "",
        "Reply on every turn with exactly one JSON object of this shape:",
        "```json",
        "{",
        '  "memory": {',
        '    "rationale": "your notes; returned to you verbatim next turn",',
        '    "partial_conclusion": {"A": "unknown", "B": "probably_not_the_answer", "C": "probably_the_odd_one"}',
        "  },",
        '  "iteration_number": 1,',
        '  "commands": [{"target": "A", "rotation_sequence": "right:15,right:15,up:10"}],',
        '  "final_answer": null',
        "}",
        "```",
        "",
        "Rules:",
        f"- Perform at least {min_iterations} iterations before giving a final "
        f"answer; the session ends after {max_iterations}.",
        "- Do not imagine renders you have not received; request rotations and "
        "wait for the returned images.",
        '- partial_conclusion values must be "unknown", '
        '"probably_not_the_answer" or "probably_the_odd_one".',
        '- Set final_answer to "A", "B" or "C" only when you are done.',
    ]
    if reset_enabled:
        lines.append(
            "- All objects were built in one shared coordinate frame, so reset "
            "brings matching objects to the identical canonical view; resetting "
            "and comparing renders directly is allowed."
        )
    if hint_360:
        lines.append(
            "- Sweeps are cheap: a sequence such as twelve steps of right:30 "
            "shows a full 360-degree orbit, so you can search for a viewpoint "
            "that reproduces the original image instead of imagining rotations."
        )
    variant = PROMPT_VARIANTS[prompt_variant]
    if variant:
        lines += ["", variant]
    return "\n".join(lines)
