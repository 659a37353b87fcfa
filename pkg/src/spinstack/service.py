"""HTTP studio service: sessions, rendering, calibration, and human answers.

All endpoints live under /v1/.  Sessions share the exact session-loop core
the CLI uses, so identical command streams produce identical transcripts.
Calibration nudges are session-scoped until committed; commits rewrite the
dataset atomically (tmp file + rename) and only affect sessions created
afterwards.  The service holds no secrets and performs no authentication;
it is a single-operator local tool.
"""

from __future__ import annotations

import dataclasses
import io
import json
import threading
import time
import zipfile
from pathlib import Path

from fastapi import FastAPI, HTTPException, Response
from pydantic import BaseModel

from .forge import (
    Problem,
    ProblemSet,
    load_problem_set,
    problem_image,
    problem_tile,
    _pose_to_list,
    _sha256,
)
from .geometry import CameraRig, Pose, apply_camera_rotation
from .harness import CONDITIONS, condition_config
from .loop import (
    LoopConfig,
    Session,
    StaleTurnError,
    start_session,
    transcript_to_dict,
)
from .protocol import (
    ANSWER_LABELS,
    CommandParseError,
    CommandSequence,
    TurnMemory,
    TurnOutput,
    TurnParseError,
    parse_sequence,
    parse_turn_output,
    serialize_turn_context,
)
from .render import DEFAULT_RIG, DEFAULT_SETTINGS, RenderSettings, encode_png, render


class CreateSessionBody(BaseModel):
    problem_id: str
    condition: str | None = None
    min_iterations: int | None = None
    max_iterations: int | None = None
    reset_enabled: bool | None = None
    hint_360: bool | None = None
    allow_original_target: bool | None = None
    max_sequences_per_turn: int | None = None
    prompt_variant: str | None = None


class TurnBody(BaseModel):
    raw: str


class CommandBody(BaseModel):
    target: str
    sequence: str


class AnswerBody(BaseModel):
    answer: str


class CalibrationStartBody(BaseModel):
    problem_id: str
    object: str


class NudgeBody(BaseModel):
    command: str


class CommitBody(BaseModel):
    author: str = "anonymous"


class _SessionHolder:
    def __init__(self, session: Session):
        self.session = session
        self.lock = threading.Lock()
        self.created_at = time.time()


class _CalibrationHolder:
    def __init__(self, problem_id: str, key: str, pose: Pose):
        self.problem_id = problem_id
        self.key = key
        self.working_pose = pose
        self.lock = threading.Lock()


class ServiceStore:
    """Shared state: problems (with live calibration), sessions, answers."""

    def __init__(
        self,
        dataset,
        read_only: bool = False,
        answers_path: str | Path | None = None,
        rig: CameraRig = DEFAULT_RIG,
        settings: RenderSettings = DEFAULT_SETTINGS,
    ):
        if isinstance(dataset, ProblemSet):
            self.dataset_dir: Path | None = None
            problem_set = dataset
        else:
            self.dataset_dir = Path(dataset)
            problem_set = load_problem_set(self.dataset_dir)
        self.seed = problem_set.seed
        self.checksum = problem_set.checksum
        self.constraints = problem_set.constraints
        self.order = [p.id for p in problem_set]
        self.problems: dict[str, Problem] = {p.id: p for p in problem_set}
        self.read_only = read_only
        self.answers_path = Path(answers_path) if answers_path else None
        self.rig = rig
        self.settings = settings
        self.sessions: dict[str, _SessionHolder] = {}
        self.calibrations: dict[str, _CalibrationHolder] = {}
        self.answers: list[dict] = []
        self.lock = threading.Lock()
        self._counter = 0

    def next_id(self, prefix: str) -> str:
        with self.lock:
            self._counter += 1
            return f"{prefix}{self._counter:04d}"

    def problem(self, problem_id: str) -> Problem:
        try:
            return self.problems[problem_id]
        except KeyError:
            raise HTTPException(404, f"unknown problem {problem_id!r}")

    def session(self, session_id: str) -> _SessionHolder:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise HTTPException(404, f"unknown session {session_id!r}")

    def calibration(self, calibration_id: str) -> _CalibrationHolder:
        try:
            return self.calibrations[calibration_id]
        except KeyError:
            raise HTTPException(404, f"unknown calibration {calibration_id!r}")

    # --- calibration persistence -----------------------------------------

    def commit_calibration(self, holder: _CalibrationHolder, author: str) -> Problem:
        if self.read_only:
            raise HTTPException(403, "dataset is read-only")
        problem = self.problem(holder.problem_id)
        new_poses = tuple(
            (key, holder.working_pose if key == holder.key else pose)
            for key, pose in problem.poses
        )
        updated = dataclasses.replace(problem, poses=new_poses)
        with self.lock:
            self.problems[problem.id] = updated
            if self.dataset_dir is not None:
                self._persist(updated, holder.key, author)
        return updated

    def _persist(self, problem: Problem, key: str, author: str) -> None:
        root = self.dataset_dir
        manifest_path = root / "manifest.json"
        manifest = json.loads(manifest_path.read_text())
        files = manifest["files"]

        def write_atomic(rel: str, data: bytes) -> None:
            target = root / rel
            tmp = target.with_suffix(target.suffix + ".tmp")
            tmp.write_bytes(data)
            tmp.replace(target)
            files[rel] = _sha256(data)

        for obj_key in problem.object_keys:
            tile = problem_tile(problem, obj_key, self.rig, self.settings)
            write_atomic(f"images/{problem.id}_{obj_key}.png", encode_png(tile))
        composite = problem_image(problem, self.rig, self.settings)
        write_atomic(f"images/{problem.id}_problem.png", encode_png(composite))

        poses_doc = {
            pid: {k: _pose_to_list(p.pose(k)) for k in p.object_keys}
            for pid, p in ((i, self.problems[i]) for i in self.order)
        }
        write_atomic(
            "poses.json", json.dumps(poses_doc, indent=2, sort_keys=True).encode("ascii")
        )
        manifest["checksum"] = _sha256(json.dumps(files, sort_keys=True).encode("ascii"))
        self.checksum = manifest["checksum"]
        tmp = manifest_path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True))
        tmp.replace(manifest_path)

        record = {
            "dataset": str(root),
            "problem_id": problem.id,
            "object": key,
            "pose": _pose_to_list(problem.pose(key)),
            "author": author,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        }
        with (root / "calibration.jsonl").open("a") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    def record_answer(self, record: dict) -> None:
        with self.lock:
            self.answers.append(record)
            if self.answers_path is not None:
                with self.answers_path.open("a") as fh:
                    fh.write(json.dumps(record, sort_keys=True) + "\n")


def _png(data: bytes, **headers: str) -> Response:
    return Response(content=data, media_type="image/png", headers=headers or None)


def create_app(
    dataset,
    read_only: bool = False,
    human_min_iterations: int = 1,
    answers_path: str | Path | None = None,
    ui_dir: str | Path | None = None,
    rig: CameraRig = DEFAULT_RIG,
    settings: RenderSettings = DEFAULT_SETTINGS,
) -> FastAPI:
    """Build the studio FastAPI app over a dataset directory or ProblemSet."""
    store = ServiceStore(dataset, read_only, answers_path, rig, settings)
    app = FastAPI(title="spinstack studio", version="1")
    app.state.store = store

    # --- problems ---------------------------------------------------------

    @app.get("/v1/problems")
    def list_problems():
        return {
            "count": len(store.order),
            "checksum": store.checksum,
            "problems": [
                {
                    "id": pid,
                    "statement": store.problems[pid].statement,
                    "objects": list(store.problems[pid].object_keys),
                }
                for pid in store.order
            ],
        }

    @app.get("/v1/problems/{problem_id}/image")
    def get_problem_image(problem_id: str):
        problem = store.problem(problem_id)
        return _png(encode_png(problem_image(problem, store.rig, store.settings)))

    @app.get("/v1/problems/{problem_id}/tiles/{key}")
    def get_problem_tile(problem_id: str, key: str):
        problem = store.problem(problem_id)
        if key not in problem.object_keys:
            raise HTTPException(404, f"unknown object {key!r}")
        return _png(encode_png(problem_tile(problem, key, store.rig, store.settings)))

    # --- sessions ---------------------------------------------------------

    def _loop_config(body: CreateSessionBody) -> LoopConfig:
        if body.condition is not None:
            if body.condition not in CONDITIONS:
                raise HTTPException(422, f"unknown condition {body.condition!r}")
            base = condition_config(body.condition)
        else:
            base = LoopConfig(min_iterations=human_min_iterations)
        overrides = {
            k: v
            for k, v in {
                "min_iterations": body.min_iterations,
                "max_iterations": body.max_iterations,
                "reset_enabled": body.reset_enabled,
                "hint_360": body.hint_360,
                "allow_original_target": body.allow_original_target,
                "max_sequences_per_turn": body.max_sequences_per_turn,
                "prompt_variant": body.prompt_variant,
            }.items()
            if v is not None
        }
        try:
            return LoopConfig(**{**base.to_dict(), **overrides})
        except ValueError as exc:
            raise HTTPException(422, str(exc))

    def _context_payload(session: Session) -> dict:
        context = session.build_context()
        return {
            "iteration": context.iteration,
            "messages": serialize_turn_context(context),
        }

    def _session_summary(sid: str, session: Session) -> dict:
        return {
            "session_id": sid,
            "problem_id": session.problem.id,
            "status": session.status,
            "iteration_count": session.iteration_count,
            "next_iteration": session.next_iteration,
            "final_answer": session.final_answer,
            "config": session.config.to_dict(),
        }

    @app.post("/v1/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        problem = store.problem(body.problem_id)
        config = _loop_config(body)
        session = start_session(problem, config, store.rig, store.settings)
        sid = store.next_id("s")
        with store.lock:
            store.sessions[sid] = _SessionHolder(session)
        return {**_session_summary(sid, session), "context": _context_payload(session)}

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str):
        holder = store.session(session_id)
        return _session_summary(session_id, holder.session)

    @app.get("/v1/sessions/{session_id}/context")
    def get_context(session_id: str):
        holder = store.session(session_id)
        with holder.lock:
            if holder.session.finished:
                raise HTTPException(409, f"session is {holder.session.status}")
            return _context_payload(holder.session)

    def _record_payload(sid: str, session: Session, record) -> dict:
        return {
            "iteration": record.index,
            "executed": [
                {"target": t, "sequence": ",".join(c.surface() for c in cmds)}
                for t, cmds in record.executed
            ],
            "errors": list(record.errors),
            "notices": list(record.notices),
            "answer_recorded": record.answer_recorded,
            "answer_accepted": record.answer_accepted,
            "grids": {
                target: f"/v1/sessions/{sid}/iterations/{record.index}/grids/{target}"
                for target, _ in record.grids
            },
            "status": session.status,
            "final_answer": session.final_answer,
        }

    @app.post("/v1/sessions/{session_id}/turn")
    def post_turn(session_id: str, body: TurnBody):
        holder = store.session(session_id)
        with holder.lock:
            session = holder.session
            if session.finished:
                raise HTTPException(409, f"session is {session.status}")
            try:
                turn = parse_turn_output(body.raw)
            except TurnParseError as exc:
                raise HTTPException(
                    422, {"category": exc.category, "problems": list(exc.problems)}
                )
            try:
                record = session.execute_turn(turn, body.raw)
            except StaleTurnError as exc:
                raise HTTPException(
                    409,
                    {
                        "error": str(exc),
                        "expected": exc.expected,
                        "got": exc.got,
                        "context": _context_payload(session),
                    },
                )
            return _record_payload(session_id, session, record)

    @app.post("/v1/sessions/{session_id}/commands")
    def post_commands(session_id: str, body: CommandBody):
        holder = store.session(session_id)
        with holder.lock:
            session = holder.session
            if session.finished:
                raise HTTPException(409, f"session is {session.status}")
            try:
                steps = tuple(parse_sequence(body.sequence))
            except CommandParseError as exc:
                raise HTTPException(422, {"error": str(exc), "token": exc.token})
            if body.target not in session.allowed_targets():
                raise HTTPException(422, {"error": f"unknown target {body.target!r}"})
            if any(c.direction == "reset" for c in steps) and not session.config.reset_enabled:
                raise HTTPException(
                    422, {"error": "reset is disabled for this session"}
                )
            turn = TurnOutput(
                memory=TurnMemory(
                    rationale="studio command",
                    partial_conclusion=tuple((l, "unknown") for l in ANSWER_LABELS),
                ),
                iteration_number=session.next_iteration,
                commands=(
                    CommandSequence(target=body.target, raw=body.sequence, steps=steps),
                ),
            )
            record = session.execute_turn(turn)
            for target, png in record.grids:
                if target == body.target:
                    return _png(
                        png,
                        **{
                            "X-Iteration": str(record.index),
                            "X-Session-Status": session.status,
                        },
                    )
            raise HTTPException(500, "no grid produced for target")

    @app.post("/v1/sessions/{session_id}/answer")
    def post_answer(session_id: str, body: AnswerBody):
        if body.answer not in ANSWER_LABELS:
            raise HTTPException(422, {"error": f"answer must be one of {ANSWER_LABELS}"})
        holder = store.session(session_id)
        with holder.lock:
            session = holder.session
            if session.finished:
                raise HTTPException(409, f"session is {session.status}")
            conclusions = tuple(
                (l, "probably_the_odd_one" if l == body.answer else "unknown")
                for l in ANSWER_LABELS
            )
            turn = TurnOutput(
                memory=TurnMemory(rationale="studio answer", partial_conclusion=conclusions),
                iteration_number=session.next_iteration,
                commands=(),
                final_answer=body.answer,
            )
            record = session.execute_turn(turn)
            if not record.answer_accepted:
                raise HTTPException(409, {"error": record.notices[0]})
            correct = session.final_answer == session.problem.odd
            commands_log = [
                {"iteration": r.index,
                 "commands": [
                     {"target": t, "sequence": ",".join(c.surface() for c in cmds)}
                     for t, cmds in r.executed
                 ]}
                for r in session.records
            ]
            store.record_answer(
                {
                    "session_id": session_id,
                    "problem_id": session.problem.id,
                    "answer": body.answer,
                    "correct": correct,
                    "commands": commands_log,
                    "elapsed_s": round(time.time() - holder.created_at, 3),
                }
            )
            return {
                "accepted": True,
                "correct": correct,
                "status": session.status,
                "iteration": record.index,
            }

    @app.get("/v1/sessions/{session_id}/objects/{key}/snapshot")
    def get_snapshot(session_id: str, key: str):
        holder = store.session(session_id)
        with holder.lock:
            session = holder.session
            if key not in session.problem.object_keys:
                raise HTTPException(404, f"unknown object {key!r}")
            return _png(session.snapshot(key))

    @app.get("/v1/sessions/{session_id}/iterations/{index}/grids/{target}")
    def get_grid(session_id: str, index: int, target: str):
        holder = store.session(session_id)
        with holder.lock:
            for record in holder.session.records:
                if record.index == index:
                    for t, png in record.grids:
                        if t == target:
                            return _png(png)
                    raise HTTPException(404, f"no grid for target {target!r}")
            raise HTTPException(404, f"no iteration {index}")

    @app.get("/v1/sessions/{session_id}/transcript")
    def get_transcript(session_id: str):
        holder = store.session(session_id)
        with holder.lock:
            return transcript_to_dict(holder.session.transcript())

    @app.get("/v1/sessions/{session_id}/transcript.zip")
    def get_transcript_zip(session_id: str):
        holder = store.session(session_id)
        with holder.lock:
            transcript = holder.session.transcript()
        doc = transcript_to_dict(transcript)
        buf = io.BytesIO()
        with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
            zf.writestr("transcript.json", json.dumps(doc, indent=2, sort_keys=True))
            for record in transcript.iterations:
                for target, png in record.grids:
                    zf.writestr(f"grids/{record.index:02d}_{target}.png", png)
        return Response(
            content=buf.getvalue(),
            media_type="application/zip",
            headers={
                "Content-Disposition": f'attachment; filename="{session_id}.zip"'
            },
        )

    # --- calibration ------------------------------------------------------

    @app.post("/v1/calibration/start", status_code=201)
    def calibration_start(body: CalibrationStartBody):
        problem = store.problem(body.problem_id)
        if body.object not in problem.object_keys:
            raise HTTPException(404, f"unknown object {body.object!r}")
        cid = store.next_id("c")
        holder = _CalibrationHolder(problem.id, body.object, problem.pose(body.object))
        with store.lock:
            store.calibrations[cid] = holder
        return {
            "calibration_id": cid,
            "problem_id": problem.id,
            "object": body.object,
            "pose": _pose_to_list(holder.working_pose),
        }

    def _calibration_render(holder: _CalibrationHolder) -> bytes:
        problem = store.problem(holder.problem_id)
        shape = problem.shape(holder.key)
        return encode_png(render(shape, holder.working_pose, store.rig, store.settings))

    @app.get("/v1/calibration/{calibration_id}")
    def calibration_state(calibration_id: str):
        holder = store.calibration(calibration_id)
        problem = store.problem(holder.problem_id)
        committed = problem.pose(holder.key)
        with holder.lock:
            return {
                "calibration_id": calibration_id,
                "problem_id": holder.problem_id,
                "object": holder.key,
                "working_pose": _pose_to_list(holder.working_pose),
                "committed_pose": _pose_to_list(committed),
                "dirty": not holder.working_pose.approx_equal(committed),
            }

    @app.get("/v1/calibration/{calibration_id}/render")
    def calibration_render(calibration_id: str):
        holder = store.calibration(calibration_id)
        with holder.lock:
            return _png(_calibration_render(holder))

    @app.post("/v1/calibration/{calibration_id}/nudge")
    def calibration_nudge(calibration_id: str, body: NudgeBody):
        holder = store.calibration(calibration_id)
        try:
            steps = parse_sequence(body.command)
        except CommandParseError as exc:
            raise HTTPException(422, {"error": str(exc), "token": exc.token})
        if any(c.direction == "reset" for c in steps):
            raise HTTPException(
                422, {"error": "use revert to discard nudges, not reset"}
            )
        with holder.lock:
            for cmd in steps:
                holder.working_pose = apply_camera_rotation(holder.working_pose, cmd)
            return _png(
                _calibration_render(holder),
                **{"X-Pose": json.dumps(_pose_to_list(holder.working_pose))},
            )

    @app.post("/v1/calibration/{calibration_id}/commit")
    def calibration_commit(calibration_id: str, body: CommitBody | None = None):
        holder = store.calibration(calibration_id)
        with holder.lock:
            updated = store.commit_calibration(
                holder, body.author if body else "anonymous"
            )
            return {
                "committed": True,
                "problem_id": updated.id,
                "object": holder.key,
                "pose": _pose_to_list(updated.pose(holder.key)),
                "checksum": store.checksum,
            }

    @app.post("/v1/calibration/{calibration_id}/revert")
    def calibration_revert(calibration_id: str):
        holder = store.calibration(calibration_id)
        problem = store.problem(holder.problem_id)
        with holder.lock:
            holder.working_pose = problem.pose(holder.key)
            return {"pose": _pose_to_list(holder.working_pose)}

    # --- human answers ----------------------------------------------------

    @app.get("/v1/answers")
    def list_answers():
        with store.lock:
            answers = list(store.answers)
        scored = [a for a in answers if a.get("correct") is not None]
        correct = sum(1 for a in scored if a["correct"])
        return {
            "answers": answers,
            "count": len(answers),
            "accuracy": (correct / len(scored)) if scored else None,
        }

    # --- optional static UI ------------------------------------------------

    candidates = []
    if ui_dir is not None:
        candidates.append(Path(ui_dir))
    candidates.append(Path.cwd() / "frontend" / "dist")
    for candidate in candidates:
        if candidate.is_dir():
            from fastapi.staticfiles import StaticFiles

            app.mount("/ui", StaticFiles(directory=str(candidate), html=True), name="ui")
            break

    return app
