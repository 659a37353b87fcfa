"""Benchmark runner, probe scoring, Euler verification, and report emission.

Conditions map to loop flags:

    C1-reset        reset available, original may be re-posed
    C2-360hint      the 360-degree sweep hint is added to the prompt
    C3-incremental  plain incremental rotation (the default flags)

Accuracy counts correct answered sessions over scored sessions, where scored
means the session produced a final answer.  Transport-failed and abstained
sessions are excluded from the denominator and reported as their own counts,
never as wrong answers.
"""

from __future__ import annotations

import base64
import csv
import io
import json
import re
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from . import __version__
from .forge import ProbePair, ProblemSet, euler_for_command
from .geometry import CameraRig, EulerAnglesDeg, pose_from_euler
from .loop import LoopConfig, run_loop, save_transcript, start_session
from .protocol import build_task_prompt
from .render import DEFAULT_RIG, DEFAULT_SETTINGS, RenderSettings, decode_png, image_diff, render

CONDITIONS = ("C1-reset", "C2-360hint", "C3-incremental")

EULER_MATCH_TOL = 0.01


def condition_config(condition: str, base: LoopConfig | None = None) -> LoopConfig:
    """Translate a condition name into loop flags, on top of base settings."""
    cfg = base if base is not None else LoopConfig()
    if condition == "C1-reset":
        return LoopConfig(**{**cfg.to_dict(), "reset_enabled": True,
                             "allow_original_target": True})
    if condition == "C2-360hint":
        return LoopConfig(**{**cfg.to_dict(), "hint_360": True})
    if condition == "C3-incremental":
        return cfg
    raise ValueError(f"unknown condition {condition!r}; expected one of {CONDITIONS}")


@dataclass(frozen=True)
class RunConfig:
    """One benchmark run request: dataset, agent, condition, repetitions."""

    agent: str
    condition: str = "C3-incremental"
    n_runs: int = 1
    seed: int | None = None
    loop_overrides: tuple[tuple[str, object], ...] = ()

    def __post_init__(self) -> None:
        if self.condition not in CONDITIONS:
            raise ValueError(f"unknown condition {self.condition!r}")
        if self.n_runs < 1:
            raise ValueError("n_runs must be at least 1")

    def loop_config(self) -> LoopConfig:
        base = LoopConfig.from_dict(dict(self.loop_overrides))
        return condition_config(self.condition, base)


@dataclass
class ProblemOutcome:
    run_index: int
    problem_id: str
    truth: str
    answer: str | None
    status: str
    correct: bool | None
    iterations: int
    forced: bool
    transcript_ref: str | None = None


@dataclass
class EvalReport:
    agent: str
    condition: str
    n_runs: int
    runs: list[dict]
    outcomes: list[ProblemOutcome]
    accuracy_min: float
    accuracy_mean: float
    accuracy_max: float
    provenance: dict
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "kind": "eval",
            "agent": self.agent,
            "condition": self.condition,
            "n_runs": self.n_runs,
            "runs": self.runs,
            "outcomes": [vars(o) for o in self.outcomes],
            "accuracy_min": self.accuracy_min,
            "accuracy_mean": self.accuracy_mean,
            "accuracy_max": self.accuracy_max,
            "provenance": self.provenance,
            "note": self.note,
        }


def _provenance(problem_set: ProblemSet, extra: dict | None = None) -> dict:
    doc = {
        "package_version": __version__,
        "dataset_seed": problem_set.seed,
        "dataset_checksum": problem_set.checksum,
        "problem_count": len(problem_set),
    }
    if extra:
        doc.update(extra)
    return doc


def _summarize_run(run_index: int, outcomes: list[ProblemOutcome]) -> dict:
    scored = [o for o in outcomes if o.status == "answered"]
    correct = sum(1 for o in scored if o.correct)
    failed = sum(1 for o in outcomes if o.status == "failed")
    abstained = sum(1 for o in outcomes if o.status == "abstained")
    accuracy = correct / len(scored) if scored else 0.0
    return {
        "run_index": run_index,
        "attempted": len(outcomes),
        "scored": len(scored),
        "correct": correct,
        "wrong": len(scored) - correct,
        "failed": failed,
        "abstained": abstained,
        "accuracy": accuracy,
    }


def run_benchmark(
    problem_set: ProblemSet,
    agent_factory: Callable[[], object],
    config: RunConfig,
    transcript_root: str | Path | None = None,
    rig: CameraRig = DEFAULT_RIG,
    settings: RenderSettings = DEFAULT_SETTINGS,
) -> EvalReport:
    """Run every problem n_runs times and aggregate outcomes."""
    loop_config = config.loop_config()
    outcomes: list[ProblemOutcome] = []
    runs: list[dict] = []
    for run_index in range(1, config.n_runs + 1):
        agent = agent_factory()
        run_outcomes: list[ProblemOutcome] = []
        for problem in problem_set:
            session = start_session(problem, loop_config, rig, settings)
            transcript = run_loop(session, agent)
            ref = None
            if transcript_root is not None:
                directory = Path(transcript_root) / f"run{run_index:02d}" / problem.id
                save_transcript(transcript, directory)
                ref = str(directory)
            run_outcomes.append(
                ProblemOutcome(
                    run_index=run_index,
                    problem_id=problem.id,
                    truth=problem.odd,
                    answer=transcript.final_answer,
                    status=transcript.status,
                    correct=transcript.correct,
                    iterations=len(transcript.iterations),
                    forced=transcript.forced_termination,
                    transcript_ref=ref,
                )
            )
        runs.append(_summarize_run(run_index, run_outcomes))
        outcomes.extend(run_outcomes)
    accuracies = [r["accuracy"] for r in runs]
    return EvalReport(
        agent=config.agent,
        condition=config.condition,
        n_runs=config.n_runs,
        runs=runs,
        outcomes=outcomes,
        accuracy_min=min(accuracies),
        accuracy_mean=statistics.fmean(accuracies),
        accuracy_max=max(accuracies),
        provenance=_provenance(
            problem_set,
            {
                "agent": config.agent,
                "condition": config.condition,
                "loop_config": loop_config.to_dict(),
                "run_seed": config.seed,
            },
        ),
    )


def score_transcripts(problem_set: ProblemSet, transcript_docs: Sequence[dict]) -> dict:
    """Score already-recorded transcripts (e.g. human play) against the oracle labels."""
    outcomes = []
    for doc in transcript_docs:
        problem = problem_set.get(doc["problem_id"])
        answer = doc.get("final_answer")
        status = doc.get("status", "answered" if answer else "abstained")
        correct = (answer == problem.odd) if (status == "answered" and answer) else None
        outcomes.append(
            ProblemOutcome(
                run_index=1,
                problem_id=problem.id,
                truth=problem.odd,
                answer=answer,
                status=status,
                correct=correct,
                iterations=len(doc.get("iterations", [])),
                forced=bool(doc.get("forced_termination", False)),
            )
        )
    summary = _summarize_run(1, outcomes)
    summary["outcomes"] = [vars(o) for o in outcomes]
    summary["provenance"] = _provenance(problem_set)
    return summary


# --- probe evaluation -------------------------------------------------------

PROBE_INSTRUCTION = (
    "The first image shows a cube stack; the second shows the same stack "
    "after one camera-frame rotation command. Estimate the rotation "
    "direction and angle. Reply in the form direction:angle, for example "
    "right:90. Directions: left, right, up, down, cw, ccw."
)

_DIRECTION_WORDS = {
    "left": "left",
    "right": "right",
    "up": "up",
    "down": "down",
    "cw": "cw",
    "ccw": "ccw",
    "clockwise": "cw",
    "counterclockwise": "ccw",
    "counter-clockwise": "ccw",
    "anticlockwise": "ccw",
    "anti-clockwise": "ccw",
}

_PROBE_DIRECTION_RE = re.compile(
    r"\b(left|right|up|down|ccw|cw|counter-?clockwise|anti-?clockwise|clockwise)\b",
    re.IGNORECASE,
)
_PROBE_ANGLE_RE = re.compile(r"[-+]?\d+(?:\.\d+)?")


@dataclass(frozen=True)
class ProbePrediction:
    direction: str | None
    angle: float | None
    raw: str
    flagged: bool  # set when the reply had no usable first component


def parse_probe_reply(raw: str) -> ProbePrediction:
    """Extract the first direction/angle component from a free-form reply.

    Multi-command replies are scored by their first component; the raw text
    is retained. A reply with no recognizable direction is flagged.
    """
    first = raw.split(",")[0] if raw else ""
    match = _PROBE_DIRECTION_RE.search(first)
    if match is None:
        # tolerate the direction living past a comma in prose-style replies
        match = _PROBE_DIRECTION_RE.search(raw or "")
        if match is None:
            return ProbePrediction(None, None, raw, True)
        first = raw[match.start():].split(",")[0]
        match = _PROBE_DIRECTION_RE.search(first)
    direction = _DIRECTION_WORDS[match.group(1).lower()]
    angle_match = _PROBE_ANGLE_RE.search(first[match.end():])
    angle = float(angle_match.group(0)) if angle_match else None
    return ProbePrediction(direction, angle, raw, False)


@dataclass
class ProbeReport:
    rows: list[dict]
    direction_accuracy: float
    per_direction_accuracy: dict
    angle_mae: float | None
    confusion: dict
    provenance: dict

    def to_dict(self) -> dict:
        return {
            "kind": "probe",
            "rows": self.rows,
            "direction_accuracy": self.direction_accuracy,
            "per_direction_accuracy": self.per_direction_accuracy,
            "angle_mae": self.angle_mae,
            "confusion": {f"{t}->{p}": n for (t, p), n in sorted(self.confusion.items())},
            "provenance": self.provenance,
        }


def run_probe_eval(
    pairs: Sequence[ProbePair],
    predictor: Callable[[ProbePair], str],
    provenance: dict | None = None,
) -> ProbeReport:
    """Score one predictor reply per probe pair.

    Direction is exact-match; angle MAE is computed over direction-correct
    rows that supplied an angle.
    """
    rows = []
    confusion: dict[tuple[str, str], int] = {}
    angle_errors = []
    per_dir: dict[str, list[bool]] = {}
    for pair in pairs:
        raw = predictor(pair)
        pred = parse_probe_reply(raw)
        truth_dir = pair.command.direction
        truth_angle = pair.command.angle
        direction_correct = pred.direction == truth_dir
        angle_err = None
        if direction_correct and pred.angle is not None:
            angle_err = abs(pred.angle - truth_angle)
            angle_errors.append(angle_err)
        predicted_key = pred.direction if pred.direction else "none"
        confusion[(truth_dir, predicted_key)] = confusion.get((truth_dir, predicted_key), 0) + 1
        per_dir.setdefault(truth_dir, []).append(direction_correct)
        rows.append(
            {
                "id": pair.id,
                "true_direction": truth_dir,
                "true_angle": truth_angle,
                "predicted_direction": pred.direction,
                "predicted_angle": pred.angle,
                "direction_correct": direction_correct,
                "angle_abs_error": angle_err,
                "flagged": pred.flagged,
                "raw": pred.raw,
            }
        )
    n = len(rows)
    correct = sum(1 for r in rows if r["direction_correct"])
    return ProbeReport(
        rows=rows,
        direction_accuracy=(correct / n) if n else 0.0,
        per_direction_accuracy={
            d: (sum(v) / len(v)) for d, v in sorted(per_dir.items())
        },
        angle_mae=(statistics.fmean(angle_errors) if angle_errors else None),
        confusion=confusion,
        provenance={"package_version": __version__, **(provenance or {})},
    )


def probe_agent_adapter(agent) -> Callable[[ProbePair], str]:
    """Wrap a chat agent as a probe predictor using the probe prompt."""

    def image_part(png: bytes) -> dict:
        url = "data:image/png;base64," + base64.b64encode(png).decode("ascii")
        return {"type": "image_url", "image_url": {"url": url}}

    def predict(pair: ProbePair) -> str:
        messages = [
            {
                "role": "user",
                "content": [
                    {"type": "text", "text": PROBE_INSTRUCTION},
                    image_part(pair.before_png),
                    image_part(pair.after_png),
                ],
            }
        ]
        return agent.complete(messages)

    return predict


def truth_probe_predictor(pair: ProbePair) -> str:
    """Reference stub: replays the hidden command's exact surface form."""
    return pair.command.surface()


def scripted_probe_predictor(table: dict[str, str]) -> Callable[[ProbePair], str]:
    """Stub that answers from a fixed id -> reply table ('' when missing)."""

    def predict(pair: ProbePair) -> str:
        return table.get(pair.id, "")

    return predict


# --- Euler verification -----------------------------------------------------

def verify_euler_prediction(
    pair: ProbePair,
    predicted: EulerAnglesDeg,
    tol: float = EULER_MATCH_TOL,
    rig: CameraRig = DEFAULT_RIG,
    settings: RenderSettings = DEFAULT_SETTINGS,
) -> str:
    """Re-apply a predicted rotation and classify it: match, mirror, or fail.

    A render from the predicted pose matching the after-image within tol is a
    match. Otherwise each single-axis sign flip is tried; any flip matching
    means the prediction was mirrored across that axis (reported distinctly,
    scored as a failure). Everything else is a plain fail.
    """
    target = decode_png(pair.after_png)

    def matches(euler: EulerAnglesDeg) -> bool:
        pose = pose_from_euler(euler).compose(pair.base_pose)
        return image_diff(render(pair.shape, pose, rig, settings), target) < tol

    if matches(predicted):
        return "match"
    flips = (
        EulerAnglesDeg(-predicted.pitch_deg, predicted.yaw_deg, predicted.roll_deg),
        EulerAnglesDeg(predicted.pitch_deg, -predicted.yaw_deg, predicted.roll_deg),
        EulerAnglesDeg(predicted.pitch_deg, predicted.yaw_deg, -predicted.roll_deg),
    )
    if any(matches(flip) for flip in flips):
        return "mirror"
    return "fail"


@dataclass
class EulerReport:
    rows: list[dict]
    matches: int
    mirrors: int
    fails: int
    provenance: dict

    @property
    def match_rate(self) -> float:
        return self.matches / len(self.rows) if self.rows else 0.0

    def to_dict(self) -> dict:
        return {
            "kind": "euler",
            "rows": self.rows,
            "matches": self.matches,
            "mirrors": self.mirrors,
            "fails": self.fails,
            "match_rate": self.match_rate,
            "provenance": self.provenance,
        }


def run_euler_verification(
    pairs: Sequence[ProbePair],
    predictions: dict[str, EulerAnglesDeg],
    tol: float = EULER_MATCH_TOL,
    rig: CameraRig = DEFAULT_RIG,
    settings: RenderSettings = DEFAULT_SETTINGS,
) -> EulerReport:
    """Classify one Euler prediction per pair; missing predictions fail."""
    rows = []
    counts = {"match": 0, "mirror": 0, "fail": 0}
    for pair in pairs:
        predicted = predictions.get(pair.id)
        if predicted is None:
            verdict = "fail"
        else:
            verdict = verify_euler_prediction(pair, predicted, tol, rig, settings)
        counts[verdict] += 1
        truth = euler_for_command(pair.command)
        rows.append(
            {
                "id": pair.id,
                "command": pair.command.surface(),
                "truth": [truth.pitch_deg, truth.yaw_deg, truth.roll_deg],
                "predicted": (
                    [predicted.pitch_deg, predicted.yaw_deg, predicted.roll_deg]
                    if predicted is not None
                    else None
                ),
                "verdict": verdict,
            }
        )
    return EulerReport(
        rows=rows,
        matches=counts["match"],
        mirrors=counts["mirror"],
        fails=counts["fail"],
        provenance={"package_version": __version__, "tolerance": tol},
    )


# --- report emission --------------------------------------------------------

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["kind", "provenance"],
    "properties": {
        "kind": {"enum": ["eval", "probe", "euler"]},
        "provenance": {"type": "object"},
        "agent": {"type": "string"},
        "condition": {"type": "string"},
        "n_runs": {"type": "integer", "minimum": 1},
        "runs": {"type": "array", "items": {"type": "object"}},
        "outcomes": {"type": "array", "items": {"type": "object"}},
        "accuracy_min": {"type": "number", "minimum": 0, "maximum": 1},
        "accuracy_mean": {"type": "number", "minimum": 0, "maximum": 1},
        "accuracy_max": {"type": "number", "minimum": 0, "maximum": 1},
        "note": {"type": "string"},
        "rows": {"type": "array", "items": {"type": "object"}},
        "direction_accuracy": {"type": "number"},
        "per_direction_accuracy": {"type": "object"},
        "angle_mae": {"type": ["number", "null"]},
        "confusion": {"type": "object"},
        "matches": {"type": "integer"},
        "mirrors": {"type": "integer"},
        "fails": {"type": "integer"},
        "match_rate": {"type": "number"},
    },
}


def _pct(x: float) -> str:
    return f"{x * 100:g}"


def _eval_markdown(doc: dict) -> str:
    lines = [
        f"# Benchmark report: {doc['agent']} under {doc['condition']}",
        "",
        "| run | scored | correct | wrong | failed | abstained | accuracy % |",
        "|---|---|---|---|---|---|---|",
    ]
    for run in doc["runs"]:
        lines.append(
            f"| {run['run_index']} | {run['scored']} | {run['correct']} | "
            f"{run['wrong']} | {run['failed']} | {run['abstained']} | "
            f"{_pct(run['accuracy'])} |"
        )
    range_text = (
        _pct(doc["accuracy_min"])
        if doc["accuracy_min"] == doc["accuracy_max"]
        else f"{_pct(doc['accuracy_min'])}–{_pct(doc['accuracy_max'])}"
    )
    lines.append(f"| range | | | | | | {range_text} |")
    lines += [
        "",
        f"- mean accuracy: {_pct(doc['accuracy_mean'])}%",
        f"- provenance: `{json.dumps(doc['provenance'], sort_keys=True)}`",
    ]
    if doc.get("note"):
        lines.append(f"- note: {doc['note']}")
    lines += ["", "| run | problem | truth | answer | status | correct | iterations |",
              "|---|---|---|---|---|---|---|"]
    for o in doc["outcomes"]:
        lines.append(
            f"| {o['run_index']} | {o['problem_id']} | {o['truth']} | "
            f"{o['answer']} | {o['status']} | {o['correct']} | {o['iterations']} |"
        )
    lines.append("")
    return "\n".join(lines)


def _probe_markdown(doc: dict) -> str:
    lines = [
        "# Probe report",
        "",
        f"- direction accuracy: {_pct(doc['direction_accuracy'])}%",
        f"- angle MAE (direction-correct rows): {doc['angle_mae']}",
        f"- provenance: `{json.dumps(doc['provenance'], sort_keys=True)}`",
        "",
        "| direction | accuracy % |",
        "|---|---|",
    ]
    for d, acc in doc["per_direction_accuracy"].items():
        lines.append(f"| {d} | {_pct(acc)} |")
    lines += ["", "| id | truth | predicted | correct | angle err |", "|---|---|---|---|---|"]
    for r in doc["rows"]:
        pred = r["predicted_direction"]
        if r["predicted_angle"] is not None:
            pred = f"{pred}:{r['predicted_angle']:g}"
        lines.append(
            f"| {r['id']} | {r['true_direction']}:{r['true_angle']:g} | {pred} | "
            f"{'yes' if r['direction_correct'] else 'no'} | {r['angle_abs_error']} |"
        )
    lines.append("")
    return "\n".join(lines)


def _euler_markdown(doc: dict) -> str:
    lines = [
        "# Euler verification report",
        "",
        f"- match: {doc['matches']}  mirror: {doc['mirrors']}  fail: {doc['fails']}",
        f"- match rate: {_pct(doc['match_rate'])}%",
        f"- provenance: `{json.dumps(doc['provenance'], sort_keys=True)}`",
        "",
        "| id | command | predicted | verdict |",
        "|---|---|---|---|",
    ]
    for r in doc["rows"]:
        lines.append(f"| {r['id']} | {r['command']} | {r['predicted']} | {r['verdict']} |")
    lines.append("")
    return "\n".join(lines)


def _eval_csv(doc: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["run_index", "problem_id", "truth", "answer", "status",
                     "correct", "iterations", "forced"])
    for o in doc["outcomes"]:
        writer.writerow([o["run_index"], o["problem_id"], o["truth"], o["answer"],
                         o["status"], o["correct"], o["iterations"], o["forced"]])
    return buf.getvalue()


def _probe_csv(doc: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["id", "true_direction", "true_angle", "predicted_direction",
                     "predicted_angle", "direction_correct", "angle_abs_error", "flagged"])
    for r in doc["rows"]:
        writer.writerow([r["id"], r["true_direction"], r["true_angle"],
                         r["predicted_direction"], r["predicted_angle"],
                         r["direction_correct"], r["angle_abs_error"], r["flagged"]])
    return buf.getvalue()


def _euler_csv(doc: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["id", "command", "predicted", "verdict"])
    for r in doc["rows"]:
        pred = "" if r["predicted"] is None else ";".join(str(v) for v in r["predicted"])
        writer.writerow([r["id"], r["command"], pred, r["verdict"]])
    return buf.getvalue()


def emit_report(report, fmt: str = "markdown") -> bytes:
    """Render an EvalReport/ProbeReport/EulerReport as markdown, CSV, or JSON."""
    doc = report.to_dict() if hasattr(report, "to_dict") else dict(report)
    if fmt in ("json",):
        return json.dumps(doc, indent=2, sort_keys=True).encode("utf-8")
    kind = doc.get("kind")
    if fmt in ("markdown", "md"):
        if kind == "eval":
            return _eval_markdown(doc).encode("utf-8")
        if kind == "probe":
            return _probe_markdown(doc).encode("utf-8")
        if kind == "euler":
            return _euler_markdown(doc).encode("utf-8")
        raise ValueError(f"unknown report kind {kind!r}")
    if fmt == "csv":
        if kind == "eval":
            return _eval_csv(doc).encode("utf-8")
        if kind == "probe":
            return _probe_csv(doc).encode("utf-8")
        if kind == "euler":
            return _euler_csv(doc).encode("utf-8")
        raise ValueError(f"unknown report kind {kind!r}")
    raise ValueError(f"unknown report format {fmt!r}; expected markdown, csv, or json")


# --- agent registry ---------------------------------------------------------

AGENT_NAMES = ("voxel_oracle", "reset_match", "orbit_search", "eager", "remote")


def build_agent(
    name: str,
    problem_set: ProblemSet | None = None,
    loop_config: LoopConfig | None = None,
    remote: dict | None = None,
):
    """Construct an agent by registry name."""
    from . import agents

    base, _, arg = name.partition(":")
    if base == "voxel_oracle":
        if problem_set is None:
            raise ValueError("voxel_oracle needs the problem set")
        cfg = loop_config or LoopConfig()
        return agents.VoxelOracleAgent(problem_set, min_iterations=cfg.min_iterations)
    if base == "reset_match":
        return agents.ResetMatchAgent()
    if base == "orbit_search":
        return agents.OrbitSearchAgent()
    if base == "eager":
        return agents.EagerAnswerAgent(arg or "A")
    if base == "remote":
        if not remote:
            raise ValueError("remote agent needs a remote config block")
        cfg = loop_config or LoopConfig()
        prompt = build_task_prompt(
            min_iterations=cfg.min_iterations,
            max_iterations=cfg.max_iterations,
            reset_enabled=cfg.reset_enabled,
            hint_360=cfg.hint_360,
            allow_original_target=cfg.allow_original_target,
            prompt_variant=cfg.prompt_variant,
        )
        return agents.RemoteChatAgent(agents.RemoteChatConfig(**remote), prompt)
    raise ValueError(f"unknown agent {name!r}; expected one of {AGENT_NAMES}")
