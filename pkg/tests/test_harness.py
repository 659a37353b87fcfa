import csv
import io
import json

import jsonschema
import pytest

from spinstack.agents import EagerAnswerAgent, VoxelOracleAgent
from spinstack.forge import SweepSpec, euler_for_command, make_probe_pair, probe_objects
from spinstack.geometry import EulerAnglesDeg
from spinstack.harness import (
    AGENT_NAMES,
    CONDITIONS,
    EULER_MATCH_TOL,
    EvalReport,
    REPORT_SCHEMA,
    RunConfig,
    build_agent,
    condition_config,
    emit_report,
    parse_probe_reply,
    run_benchmark,
    run_euler_verification,
    run_probe_eval,
    score_transcripts,
    scripted_probe_predictor,
    truth_probe_predictor,
    verify_euler_prediction,
)
from spinstack.loop import (
    AgentTransportError,
    LoopConfig,
    start_session,
    transcript_to_dict,
)
from spinstack.protocol import parse_command


def test_condition_config_mapping():
    c1 = condition_config("C1-reset")
    assert c1.reset_enabled and c1.allow_original_target and not c1.hint_360
    c2 = condition_config("C2-360hint")
    assert c2.hint_360 and not c2.reset_enabled
    c3 = condition_config("C3-incremental")
    assert not c3.hint_360 and not c3.reset_enabled
    base = LoopConfig(min_iterations=2, max_iterations=9)
    assert condition_config("C1-reset", base).min_iterations == 2
    with pytest.raises(ValueError):
        condition_config("C4-imaginary")


def test_run_config_validation():
    RunConfig(agent="eager")
    with pytest.raises(ValueError):
        RunConfig(agent="eager", condition="nope")
    with pytest.raises(ValueError):
        RunConfig(agent="eager", n_runs=0)
    cfg = RunConfig(
        agent="eager",
        condition="C1-reset",
        loop_overrides=(("min_iterations", 2), ("max_iterations", 6)),
    )
    loop = cfg.loop_config()
    assert loop.min_iterations == 2 and loop.reset_enabled


def test_accuracy_percentage_formatting():
    from spinstack.harness import _pct

    assert _pct(25 / 40) == "62.5"
    assert _pct(0.5) == "50"
    assert _pct(1.0) == "100"
    assert _pct(0.0) == "0"


def test_benchmark_with_oracle(small_set):
    report = run_benchmark(
        small_set,
        lambda: VoxelOracleAgent(small_set),
        RunConfig(agent="voxel_oracle", n_runs=2),
    )
    assert report.accuracy_min == report.accuracy_max == 1.0
    assert len(report.outcomes) == 2 * len(small_set)
    for run in report.runs:
        assert run["scored"] == len(small_set)
        assert run["failed"] == 0 and run["abstained"] == 0
    assert report.provenance["dataset_seed"] == small_set.seed
    assert report.provenance["problem_count"] == len(small_set)


def test_benchmark_accuracy_arithmetic(small_set):
    # a constant answer scores exactly its share of the odd labels
    report = run_benchmark(
        small_set, lambda: EagerAnswerAgent("A"), RunConfig(agent="eager:A")
    )
    expected = sum(1 for p in small_set if p.odd == "A") / len(small_set)
    assert report.accuracy_mean == pytest.approx(expected)
    run = report.runs[0]
    assert run["correct"] + run["wrong"] == run["scored"] == len(small_set)


def test_failed_sessions_shrink_the_denominator(small_set):
    target = small_set.problems[0].id

    class MostlyOracle:
        """Fails on one problem by transport error, perfect elsewhere."""

        def __init__(self):
            self.inner = VoxelOracleAgent(small_set)

        def take_turn(self, context):
            if context.problem_id == target:
                raise AgentTransportError("socket torn")
            return self.inner.take_turn(context)

    report = run_benchmark(small_set, MostlyOracle, RunConfig(agent="voxel_oracle"))
    run = report.runs[0]
    assert run["failed"] == 1
    assert run["scored"] == len(small_set) - 1
    # a failed problem is excluded from accuracy, not counted as wrong
    assert run["accuracy"] == 1.0
    assert run["wrong"] == 0
    failed = [o for o in report.outcomes if o.status == "failed"]
    assert [o.problem_id for o in failed] == [target]
    assert failed[0].correct is None


def test_benchmark_saves_transcripts(small_set, tmp_path):
    report = run_benchmark(
        small_set,
        lambda: VoxelOracleAgent(small_set),
        RunConfig(agent="voxel_oracle"),
        transcript_root=tmp_path,
    )
    for outcome in report.outcomes:
        assert outcome.transcript_ref is not None
        assert (tmp_path / "run01" / outcome.problem_id / "transcript.json").is_file()


def test_score_transcripts_matches_live_scoring(small_set):
    docs = []
    agent = VoxelOracleAgent(small_set)
    from spinstack.loop import run_loop

    for problem in small_set:
        transcript = run_loop(start_session(problem, LoopConfig()), agent)
        docs.append(transcript_to_dict(transcript))
    summary = score_transcripts(small_set, docs)
    assert summary["scored"] == len(small_set)
    assert summary["correct"] == len(small_set)
    assert summary["accuracy"] == 1.0


# ---------------------------------------------------------------------------
# probe replies


@pytest.mark.parametrize(
    "raw,direction,angle",
    [
        ("right:90", "right", 90.0),
        ("left:45.5", "left", 45.5),
        ("rotate:cw:30", "cw", 30.0),
        ("rotate:ccw:15", "ccw", 15.0),
        ("The stack turned clockwise by 60 degrees.", "cw", 60.0),
        ("counterclockwise 45", "ccw", 45.0),
        ("counter-clockwise 45", "ccw", 45.0),
        ("anticlockwise about 30 deg", "ccw", 30.0),
        ("UP : 120", "up", 120.0),
        ("I think it moved down, maybe 15 degrees", "down", None),
        ("right", "right", None),
        ("right:30,up:45", "right", 30.0),
        ("left:10, then left:20 more", "left", 10.0),
    ],
)
def test_parse_probe_reply(raw, direction, angle):
    pred = parse_probe_reply(raw)
    assert not pred.flagged
    assert pred.direction == direction
    assert pred.angle == angle
    assert pred.raw == raw


@pytest.mark.parametrize("raw", ["", "no rotation visible", "42", "backwards:30"])
def test_parse_probe_reply_flags_unusable(raw):
    pred = parse_probe_reply(raw)
    assert pred.flagged
    assert pred.direction is None


def test_truth_probe_predictor_is_perfect(sweep_pairs):
    subset = sweep_pairs[:36]
    report = run_probe_eval(subset, truth_probe_predictor)
    assert report.direction_accuracy == 1.0
    assert report.angle_mae == 0.0
    assert all(v == 1.0 for v in report.per_direction_accuracy.values())
    assert all(row["direction_correct"] for row in report.rows)


def test_probe_misdirection_is_scored_wrong(sweep_pairs):
    pair = next(p for p in sweep_pairs if p.command.surface() == "down:15" or p.command.direction == "up")
    table = {pair.id: "down:15" if pair.command.direction == "up" else "up:15"}
    report = run_probe_eval([pair], scripted_probe_predictor(table))
    assert report.direction_accuracy == 0.0
    row = report.rows[0]
    assert not row["direction_correct"]
    truth = pair.command.direction
    predicted = "down" if truth == "up" else "up"
    assert report.to_dict()["confusion"][f"{truth}->{predicted}"] == 1


def test_probe_empty_reply_flagged_and_wrong(sweep_pairs):
    pair = sweep_pairs[0]
    report = run_probe_eval([pair], scripted_probe_predictor({}))
    assert report.direction_accuracy == 0.0
    assert report.rows[0]["flagged"]
    assert report.angle_mae is None


def test_probe_multi_command_scored_by_first_component():
    shape = probe_objects(1)[0]
    pair = make_probe_pair(shape, parse_command("right:30"), pair_id="multi")
    report = run_probe_eval([pair], scripted_probe_predictor({"multi": "right:30,up:45"}))
    assert report.direction_accuracy == 1.0
    assert report.angle_mae == 0.0


def test_probe_angle_mae_arithmetic():
    shape = probe_objects(1)[0]
    pairs = [
        make_probe_pair(shape, parse_command("right:30"), pair_id="a"),
        make_probe_pair(shape, parse_command("right:60"), pair_id="b"),
    ]
    table = {"a": "right:40", "b": "right:40"}  # errors 10 and 20
    report = run_probe_eval(pairs, scripted_probe_predictor(table))
    assert report.direction_accuracy == 1.0
    assert report.angle_mae == pytest.approx(15.0)


# ---------------------------------------------------------------------------
# euler verification


def euler_truth(pair):
    return euler_for_command(pair.command)


def test_verify_euler_truth_matches(sweep_pairs):
    for pair in sweep_pairs[:12]:
        assert verify_euler_prediction(pair, euler_truth(pair)) == "match"


def test_verify_euler_sign_flip_is_mirror(sweep_pairs):
    # flipping the sign of the active axis renders the mirrored trajectory;
    # 0 and 180 degrees are excluded because negation changes nothing there
    flipped = 0
    for pair in sweep_pairs:
        angle = pair.command.angle % 360.0
        if angle in (0.0, 180.0):
            continue
        e = euler_truth(pair)
        mirrored = EulerAnglesDeg(-e.pitch_deg, -e.yaw_deg, -e.roll_deg)
        assert verify_euler_prediction(pair, mirrored) == "mirror", pair.id
        flipped += 1
        if flipped >= 12:
            break
    assert flipped == 12


def test_verify_euler_garbage_fails(sweep_pairs):
    pair = next(p for p in sweep_pairs if p.command.angle == 90.0)
    assert verify_euler_prediction(pair, EulerAnglesDeg(17.0, 121.0, -40.0)) == "fail"


def test_run_euler_verification_counts(sweep_pairs):
    subset = [p for p in sweep_pairs[:12]]
    predictions = {p.id: euler_truth(p) for p in subset[:-1]}  # one missing
    report = run_euler_verification(subset, predictions)
    assert report.matches == len(subset) - 1
    assert report.fails == 1
    assert report.match_rate == pytest.approx((len(subset) - 1) / len(subset))
    missing = [r for r in report.rows if r["verdict"] == "fail"]
    assert missing and missing[0]["predicted"] is None
    assert 0 < EULER_MATCH_TOL < 0.05


# ---------------------------------------------------------------------------
# report emission


def make_eval_report(**overrides):
    doc = {
        "agent": "eager:A",
        "condition": "C3-incremental",
        "n_runs": 2,
        "runs": [
            {
                "run_index": 1,
                "attempted": 40,
                "scored": 40,
                "correct": 22,
                "wrong": 18,
                "failed": 0,
                "abstained": 0,
                "accuracy": 0.55,
            },
            {
                "run_index": 2,
                "attempted": 40,
                "scored": 40,
                "correct": 25,
                "wrong": 15,
                "failed": 0,
                "abstained": 0,
                "accuracy": 0.625,
            },
        ],
        "outcomes": [],
        "accuracy_min": 0.55,
        "accuracy_mean": 0.5875,
        "accuracy_max": 0.625,
        "provenance": {"dataset_seed": 7},
        "note": "",
    }
    doc.update(overrides)
    return EvalReport(**{k: v for k, v in doc.items()})


def test_eval_markdown_range_row():
    text = emit_report(make_eval_report(), "markdown").decode()
    assert "55–62.5" in text  # en dash, not a hyphen
    assert "| 1 | 40 | 22 |" in text
    single = make_eval_report(accuracy_min=0.625, accuracy_max=0.625)
    text = emit_report(single, "markdown").decode()
    assert "62.5–" not in text and "–62.5" not in text


def test_eval_json_validates_against_schema(small_set):
    report = run_benchmark(
        small_set, lambda: VoxelOracleAgent(small_set), RunConfig(agent="voxel_oracle")
    )
    doc = json.loads(emit_report(report, "json"))
    jsonschema.validate(doc, REPORT_SCHEMA)
    assert doc["kind"] == "eval"


def test_probe_json_validates_against_schema(sweep_pairs):
    report = run_probe_eval(sweep_pairs[:6], truth_probe_predictor)
    doc = json.loads(emit_report(report, "json"))
    jsonschema.validate(doc, REPORT_SCHEMA)
    assert doc["kind"] == "probe"


def test_euler_json_validates_against_schema(sweep_pairs):
    subset = sweep_pairs[:6]
    report = run_euler_verification(subset, {p.id: euler_truth(p) for p in subset})
    doc = json.loads(emit_report(report, "json"))
    jsonschema.validate(doc, REPORT_SCHEMA)
    assert doc["kind"] == "euler"


def test_csv_outputs_parse(small_set, sweep_pairs):
    eval_report = run_benchmark(
        small_set, lambda: VoxelOracleAgent(small_set), RunConfig(agent="voxel_oracle")
    )
    probe_report = run_probe_eval(sweep_pairs[:6], truth_probe_predictor)
    subset = sweep_pairs[:6]
    euler_report = run_euler_verification(subset, {p.id: euler_truth(p) for p in subset})
    for report, expect_rows in (
        (eval_report, len(small_set)),
        (probe_report, 6),
        (euler_report, 6),
    ):
        text = emit_report(report, "csv").decode()
        rows = list(csv.reader(io.StringIO(text)))
        assert len(rows) >= expect_rows  # header plus data
        width = len(rows[0])
        assert all(len(r) == width for r in rows)


def test_emit_report_rejects_unknown_format(small_set):
    report = run_benchmark(
        small_set, lambda: VoxelOracleAgent(small_set), RunConfig(agent="voxel_oracle")
    )
    with pytest.raises(ValueError):
        emit_report(report, "xml")


def test_probe_markdown_contains_confusion(sweep_pairs):
    report = run_probe_eval(sweep_pairs[:6], truth_probe_predictor)
    text = emit_report(report, "markdown").decode()
    assert "# Probe report" in text
    assert "direction accuracy" in text.lower()


def test_build_agent_registry(small_set):
    assert set(AGENT_NAMES) == {"voxel_oracle", "reset_match", "orbit_search", "eager", "remote"}
    oracle = build_agent("voxel_oracle", small_set)
    assert oracle.name == "voxel_oracle"
    assert build_agent("reset_match").name == "reset_match"
    assert build_agent("orbit_search").name == "orbit_search"
    eager = build_agent("eager:B")
    assert eager.answer == "B"
    with pytest.raises(ValueError):
        build_agent("teleport")
    with pytest.raises(ValueError):
        build_agent("voxel_oracle")  # needs the problem set
    with pytest.raises(ValueError):
        build_agent("remote")  # needs a remote config block
    remote = build_agent(
        "remote",
        remote={"endpoint": "https://example.invalid/v1", "model": "m"},
    )
    assert remote.name == "remote"
    remote.close()


def test_conditions_constant():
    assert CONDITIONS == ("C1-reset", "C2-360hint", "C3-incremental")
