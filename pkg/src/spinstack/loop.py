"""Stateful session engine: per-object poses, turn execution, context assembly.

A session owns four camera poses (original, A, B, C), starting at the
problem's calibrated viewing poses so the first snapshots equal the problem
image tiles.  Each accepted turn applies its command sequences step by step,
renders one snapshot per step, composes one grid per target, and fills in a
single zero-rotation "current" snapshot for every object the turn did not
touch, so all four objects appear at least once per iteration.

Rejections (early answers, reset when disabled, unknown targets, sequences
over the cap) never abort the turn: the offending piece is skipped and a
notice is echoed into the next context.  Replaying a transcript's commands
from the calibrated poses reproduces the final poses within 1e-9.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from .forge import Problem, problem_image
from .geometry import CameraRig, Polycube, Pose, apply_camera_rotation
from .protocol import (
    ANSWER_LABELS,
    RotationCommand,
    TurnContext,
    TurnOutput,
    TurnParseError,
    parse_turn_output,
    serialize_turn_output,
)
from .render import DEFAULT_RIG, DEFAULT_SETTINGS, RenderSettings, encode_png, render

TRANSCRIPT_VERSION = 1

# Pose every object returns to on "reset": the shared build orientation.
RESET_POSE = Pose.identity()


class StaleTurnError(Exception):
    """Raised when a turn's iteration_number does not match the session."""

    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got
        super().__init__(f"expected iteration {expected}, got {got}")


class SessionClosedError(Exception):
    """Raised when a turn is submitted to a finished session."""


@dataclass(frozen=True)
class LoopConfig:
    """Iteration policy and condition flags for one session."""

    min_iterations: int = 5
    max_iterations: int = 15
    reset_enabled: bool = False
    hint_360: bool = False
    prompt_variant: str = "default"
    max_sequences_per_turn: int = 8
    allow_original_target: bool = False

    def __post_init__(self) -> None:
        if not (1 <= self.min_iterations <= self.max_iterations):
            raise ValueError("need 1 <= min_iterations <= max_iterations")
        if self.max_sequences_per_turn < 1:
            raise ValueError("max_sequences_per_turn must be at least 1")

    def to_dict(self) -> dict:
        return {
            "min_iterations": self.min_iterations,
            "max_iterations": self.max_iterations,
            "reset_enabled": self.reset_enabled,
            "hint_360": self.hint_360,
            "prompt_variant": self.prompt_variant,
            "max_sequences_per_turn": self.max_sequences_per_turn,
            "allow_original_target": self.allow_original_target,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LoopConfig":
        return cls(**{k: data[k] for k in cls().to_dict() if k in data})


@dataclass
class ObjectState:
    """Camera pose state for one object, with its full rotation history."""

    label: str
    shape: Polycube
    calibrated_pose: Pose
    current_pose: Pose
    history: list[tuple[RotationCommand, Pose]] = field(default_factory=list)

    def apply(self, command: RotationCommand, reset_pose: Pose = RESET_POSE) -> Pose:
        if command.direction == "reset":
            self.current_pose = reset_pose
        else:
            self.current_pose = apply_camera_rotation(self.current_pose, command)
        self.history.append((command, self.current_pose))
        return self.current_pose


@dataclass
class IterationRecord:
    """Everything one iteration produced, including rejections."""

    index: int
    raw_text: str
    turn: TurnOutput | None
    executed: tuple[tuple[str, tuple[RotationCommand, ...]], ...]
    grids: tuple[tuple[str, bytes], ...]  # (target, composed grid PNG)
    errors: tuple[str, ...]
    notices: tuple[str, ...]  # echoed into the NEXT context
    answer_recorded: str | None = None
    answer_accepted: bool = False
    wall_clock_s: float = 0.0


@dataclass
class SessionTranscript:
    problem_id: str
    config: LoopConfig
    iterations: tuple[IterationRecord, ...]
    status: str  # answered | abstained | failed
    final_answer: str | None
    answer_iteration: int | None
    forced_termination: bool
    failure_reason: str | None
    correct: bool | None


class Session:
    """One live odd-one-out session over a single problem."""

    def __init__(
        self,
        problem: Problem,
        config: LoopConfig = LoopConfig(),
        rig: CameraRig = DEFAULT_RIG,
        settings: RenderSettings = DEFAULT_SETTINGS,
    ):
        self.problem = problem
        self.config = config
        self.rig = rig
        self.settings = settings
        self.states: dict[str, ObjectState] = {}
        for key in problem.object_keys:
            pose = problem.pose(key)
            self.states[key] = ObjectState(
                label=key,
                shape=problem.shape(key),
                calibrated_pose=pose,
                current_pose=pose,
            )
        self.problem_png = encode_png(problem_image(problem, rig, settings))
        self.records: list[IterationRecord] = []
        self.status = "live"
        self.final_answer: str | None = None
        self.answer_iteration: int | None = None
        self.forced_termination = False
        self.failure_reason: str | None = None

    # --- queries ---------------------------------------------------------

    @property
    def iteration_count(self) -> int:
        return len(self.records)

    @property
    def next_iteration(self) -> int:
        return len(self.records) + 1

    @property
    def finished(self) -> bool:
        return self.status != "live"

    def allowed_targets(self) -> tuple[str, ...]:
        if self.config.allow_original_target:
            return ("original",) + ANSWER_LABELS
        return ANSWER_LABELS

    def snapshot(self, key: str) -> bytes:
        """PNG of one object at its current pose."""
        state = self.states[key]
        return encode_png(render(state.shape, state.current_pose, self.rig, self.settings))

    # --- context ---------------------------------------------------------

    def build_context(self) -> TurnContext:
        prior = []
        for rec in self.records:
            if rec.turn is not None:
                prior.append(serialize_turn_output(rec.turn, fenced=True))
            else:
                prior.append(rec.raw_text)
        last = self.records[-1] if self.records else None
        return TurnContext(
            problem_id=self.problem.id,
            iteration=self.next_iteration,
            statement=self.problem.statement,
            problem_image=self.problem_png,
            prior_outputs=tuple(prior),
            last_grids=last.grids if last else (),
            original_snapshot=self.snapshot("original"),
            notices=last.notices if last else (),
        )

    # --- execution -------------------------------------------------------

    def _snapshot_grid(self, steps) -> bytes:
        from .render import compose_grid

        return encode_png(compose_grid(steps, self.settings))

    def _render_current(self, key: str):
        state = self.states[key]
        return render(state.shape, state.current_pose, self.rig, self.settings)

    def execute_turn(self, turn: TurnOutput, raw_text: str | None = None,
                     wall_clock_s: float = 0.0) -> IterationRecord:
        """Apply one parsed turn; returns the iteration's record."""
        if self.finished:
            raise SessionClosedError(f"session is {self.status}")
        expected = self.next_iteration
        if turn.iteration_number != expected:
            raise StaleTurnError(expected, turn.iteration_number)

        errors: list[str] = []
        notices: list[str] = []
        executed: list[tuple[str, tuple[RotationCommand, ...]]] = []
        step_snaps: dict[str, list[tuple[str, bytes]]] = {}

        sequences = list(turn.commands)
        cap = self.config.max_sequences_per_turn
        if len(sequences) > cap:
            msg = (f"sequence count {len(sequences)} exceeds the per-iteration "
                   f"cap of {cap}; extra sequences were not executed")
            errors.append(msg)
            notices.append(msg)
            sequences = sequences[:cap]

        allowed = self.allowed_targets()
        for seq in sequences:
            if seq.target not in allowed:
                msg = f"sequence for target '{seq.target}' rejected: unknown target"
                if seq.target == "original" and not self.config.allow_original_target:
                    msg = ("sequence for target 'original' rejected: rotating the "
                           "original is disabled for this session")
                errors.append(msg)
                notices.append(msg)
                continue
            if seq.error is not None:
                msg = f"sequence '{seq.raw}' for {seq.target} invalid: {seq.error}"
                errors.append(msg)
                notices.append(msg)
                continue
            if any(c.direction == "reset" for c in seq.steps) and not self.config.reset_enabled:
                msg = (f"sequence '{seq.raw}' for {seq.target} rejected: "
                       "reset is disabled for this session")
                errors.append(msg)
                notices.append(msg)
                continue
            state = self.states[seq.target]
            applied: list[RotationCommand] = []
            snaps = step_snaps.setdefault(seq.target, [])
            for cmd in seq.steps:
                state.apply(cmd)
                applied.append(cmd)
                snaps.append((self._render_current(seq.target), cmd.surface()))
            executed.append((seq.target, tuple(applied)))

        # answer policy
        answer_recorded = turn.final_answer
        answer_accepted = False
        if turn.final_answer is not None:
            if expected < self.config.min_iterations:
                notices.append(
                    f"final answer '{turn.final_answer}' rejected: at least "
                    f"{self.config.min_iterations} iterations are required "
                    f"(this is iteration {expected}); keep exploring"
                )
            else:
                answer_accepted = True

        # fill snapshots so every object appears at least once
        grids: list[tuple[str, bytes]] = []
        for key in self.problem.object_keys:
            steps = step_snaps.get(key)
            if not steps:
                steps = [(self._render_current(key), "current")]
            grids.append((key, self._snapshot_grid(steps)))

        record = IterationRecord(
            index=expected,
            raw_text=raw_text if raw_text is not None else serialize_turn_output(turn, fenced=True),
            turn=turn,
            executed=tuple(executed),
            grids=tuple(grids),
            errors=tuple(errors),
            notices=tuple(notices),
            answer_recorded=answer_recorded,
            answer_accepted=answer_accepted,
            wall_clock_s=wall_clock_s,
        )
        self.records.append(record)

        if answer_accepted:
            self.status = "answered"
            self.final_answer = turn.final_answer
            self.answer_iteration = expected
        elif len(self.records) >= self.config.max_iterations:
            self._terminate_at_budget()
        return record

    def record_invalid_turn(self, raw_text: str, error: str,
                            wall_clock_s: float = 0.0) -> IterationRecord:
        """Record an unparseable reply as a full iteration with fill snapshots."""
        if self.finished:
            raise SessionClosedError(f"session is {self.status}")
        index = self.next_iteration
        grids = tuple(
            (key, self._snapshot_grid([(self._render_current(key), "current")]))
            for key in self.problem.object_keys
        )
        msg = f"previous reply could not be used: {error}"
        record = IterationRecord(
            index=index,
            raw_text=raw_text,
            turn=None,
            executed=(),
            grids=grids,
            errors=(error,),
            notices=(msg,),
            wall_clock_s=wall_clock_s,
        )
        self.records.append(record)
        if len(self.records) >= self.config.max_iterations:
            self._terminate_at_budget()
        return record

    def submit_raw(self, raw_text: str, wall_clock_s: float = 0.0) -> IterationRecord:
        """Parse and execute a raw agent reply, downgrading errors to records."""
        try:
            turn = parse_turn_output(raw_text)
        except TurnParseError as exc:
            return self.record_invalid_turn(raw_text, str(exc), wall_clock_s)
        try:
            return self.execute_turn(turn, raw_text, wall_clock_s)
        except StaleTurnError as exc:
            return self.record_invalid_turn(raw_text, str(exc), wall_clock_s)

    def mark_failed(self, reason: str) -> None:
        self.status = "failed"
        self.failure_reason = reason

    def _terminate_at_budget(self) -> None:
        """Pick a final answer from the last valid conclusions, else abstain."""
        last_turn = next(
            (r.turn for r in reversed(self.records) if r.turn is not None), None
        )
        self.forced_termination = True
        if last_turn is not None:
            conclusions = {l: last_turn.memory.conclusion(l) for l in ANSWER_LABELS}
            votes = [l for l in ANSWER_LABELS if conclusions[l] == "probably_the_odd_one"]
            if len(votes) == 1:
                self.status = "answered"
                self.final_answer = votes[0]
                self.answer_iteration = self.iteration_count
                return
            not_excluded = [
                l for l in ANSWER_LABELS
                if conclusions[l] != "probably_not_the_answer"
            ]
            if len(not_excluded) == 1:
                self.status = "answered"
                self.final_answer = not_excluded[0]
                self.answer_iteration = self.iteration_count
                return
            if votes:
                self.status = "answered"
                self.final_answer = votes[0]
                self.answer_iteration = self.iteration_count
                return
        self.status = "abstained"

    # --- transcript ------------------------------------------------------

    def transcript(self) -> SessionTranscript:
        correct: bool | None = None
        if self.status == "answered" and self.final_answer is not None:
            correct = self.final_answer == self.problem.odd
        return SessionTranscript(
            problem_id=self.problem.id,
            config=self.config,
            iterations=tuple(self.records),
            status=self.status,
            final_answer=self.final_answer,
            answer_iteration=self.answer_iteration,
            forced_termination=self.forced_termination,
            failure_reason=self.failure_reason,
            correct=correct,
        )


def start_session(
    problem: Problem,
    config: LoopConfig = LoopConfig(),
    rig: CameraRig = DEFAULT_RIG,
    settings: RenderSettings = DEFAULT_SETTINGS,
) -> Session:
    return Session(problem, config, rig, settings)


class Agent(Protocol):
    name: str

    def take_turn(self, context: TurnContext) -> str: ...


class AgentTransportError(Exception):
    """Raised when an agent cannot produce a reply at all (after retries)."""


def run_loop(session: Session, agent) -> SessionTranscript:
    """Drive a session to completion with the given agent."""
    while not session.finished:
        context = session.build_context()
        started = time.perf_counter()
        try:
            raw = agent.take_turn(context)
        except AgentTransportError as exc:
            session.mark_failed(str(exc))
            break
        session.submit_raw(raw, wall_clock_s=time.perf_counter() - started)
    return session.transcript()


# --- persistence ----------------------------------------------------------

def _record_to_dict(rec: IterationRecord) -> dict:
    return {
        "index": rec.index,
        "raw_text": rec.raw_text,
        "valid": rec.turn is not None,
        "executed": [
            {"target": target, "sequence": ",".join(c.surface() for c in cmds)}
            for target, cmds in rec.executed
        ],
        "errors": list(rec.errors),
        "notices": list(rec.notices),
        "grids": {target: f"grids/{rec.index:02d}_{target}.png" for target, _ in rec.grids},
        "answer_recorded": rec.answer_recorded,
        "answer_accepted": rec.answer_accepted,
        "wall_clock_s": rec.wall_clock_s,
    }


def transcript_to_dict(transcript: SessionTranscript) -> dict:
    return {
        "format_version": TRANSCRIPT_VERSION,
        "problem_id": transcript.problem_id,
        "config": transcript.config.to_dict(),
        "status": transcript.status,
        "final_answer": transcript.final_answer,
        "answer_iteration": transcript.answer_iteration,
        "forced_termination": transcript.forced_termination,
        "failure_reason": transcript.failure_reason,
        "correct": transcript.correct,
        "iterations": [_record_to_dict(r) for r in transcript.iterations],
    }


def canonical_transcript_bytes(transcript: SessionTranscript) -> bytes:
    """Deterministic byte form: wall-clock timing is zeroed out."""
    doc = transcript_to_dict(transcript)
    for it in doc["iterations"]:
        it["wall_clock_s"] = 0.0
    return json.dumps(doc, sort_keys=True, indent=2).encode("utf-8")


def save_transcript(transcript: SessionTranscript, directory: str | Path) -> Path:
    """Write transcript.json plus one PNG per (iteration, target) grid."""
    root = Path(directory)
    (root / "grids").mkdir(parents=True, exist_ok=True)
    for rec in transcript.iterations:
        for target, png in rec.grids:
            (root / "grids" / f"{rec.index:02d}_{target}.png").write_bytes(png)
    path = root / "transcript.json"
    path.write_text(json.dumps(transcript_to_dict(transcript), indent=2, sort_keys=True))
    return path


def load_transcript(directory: str | Path) -> dict:
    """Load a saved transcript as a plain dict (commands kept as text)."""
    root = Path(directory)
    path = root / "transcript.json"
    if not path.is_file():
        raise FileNotFoundError(f"missing transcript: {path}")
    doc = json.loads(path.read_text())
    if doc.get("format_version") != TRANSCRIPT_VERSION:
        raise ValueError("unsupported transcript format_version")
    return doc


def replay_transcript(problem: Problem, transcript_doc: dict) -> dict[str, Pose]:
    """Re-apply every executed command from the calibrated poses.

    Returns the final pose per object key, for comparison against the live
    session's poses (they must agree within 1e-9).
    """
    from .protocol import parse_sequence

    poses = {key: problem.pose(key) for key in problem.object_keys}
    for it in transcript_doc["iterations"]:
        for item in it["executed"]:
            target = item["target"]
            for cmd in parse_sequence(item["sequence"]):
                if cmd.direction == "reset":
                    poses[target] = RESET_POSE
                else:
                    poses[target] = apply_camera_rotation(poses[target], cmd)
    return poses


def transcript_markdown(transcript: SessionTranscript) -> str:
    """Render a human-readable thread of the whole session."""
    lines = [f"# Session {transcript.problem_id}", ""]
    lines.append(f"- status: {transcript.status}")
    lines.append(f"- final answer: {transcript.final_answer}")
    if transcript.correct is not None:
        lines.append(f"- correct: {transcript.correct}")
    lines.append("")
    for rec in transcript.iterations:
        lines.append(f"## Iteration {rec.index}")
        lines.append("")
        if rec.turn is not None:
            lines.append(rec.raw_text if rec.raw_text.startswith("```")
                         else f"```json\n{rec.raw_text}\n```")
        else:
            lines.append("*(unparseable reply)*")
            lines.append("")
            lines.append(f"> {rec.raw_text}")
        lines.append("")
        for target, cmds in rec.executed:
            lines.append(f"- executed on {target}: `{','.join(c.surface() for c in cmds)}`")
        for err in rec.errors:
            lines.append(f"- error: {err}")
        if rec.answer_recorded:
            verdict = "accepted" if rec.answer_accepted else "rejected"
            lines.append(f"- answer {rec.answer_recorded}: {verdict}")
        for target, _ in rec.grids:
            lines.append(f"- grid: grids/{rec.index:02d}_{target}.png")
        lines.append("")
    return "\n".join(lines)
