import json
import random

import numpy as np
import pytest

from spinstack.forge import (
    AUDIT_MARGIN,
    DEFAULT_CONSTRAINTS,
    DatasetError,
    ForgeError,
    GenerationConstraints,
    Problem,
    SweepSpec,
    VIEW_POOL,
    euler_for_command,
    forge_problem_set,
    generate_polycube,
    load_problem_set,
    load_sweep_dataset,
    make_generation_probe,
    make_probe_pair,
    make_problem,
    make_sweep_dataset,
    probe_objects,
    problem_image,
    problem_tile,
    reset_check_poses,
    save_problem_set,
    save_sweep_dataset,
)
from spinstack.geometry import (
    EulerAnglesDeg,
    Polycube,
    Pose,
    canonical_orientations,
    is_chiral,
    mirror,
    pose_from_euler,
    rotation_equivalent,
)
from spinstack.protocol import ANSWER_LABELS, PROBLEM_STATEMENT, parse_command
from spinstack.render import DEFAULT_SETTINGS, decode_png, encode_png, image_diff, render


def test_generate_polycube_is_deterministic():
    for seed in (0, 1, 99):
        assert generate_polycube(seed).cells == generate_polycube(seed).cells


def test_generated_shapes_respect_constraints():
    c = DEFAULT_CONSTRAINTS
    for seed in range(300):
        shape = generate_polycube(seed)
        assert c.min_cells <= shape.size <= c.max_cells
        w, h, d = shape.dims()
        assert w <= c.max_width and h <= c.max_height and d <= c.max_depth


def test_constraints_validation():
    with pytest.raises(ValueError):
        GenerationConstraints(min_cells=9, max_cells=8)
    with pytest.raises(ValueError):
        GenerationConstraints(max_width=0)
    with pytest.raises(ValueError):
        GenerationConstraints(max_width=1, max_height=1, max_depth=1, min_cells=2, max_cells=2)


def test_make_problem_deterministic():
    a = make_problem(5)
    b = make_problem(5)
    assert a.id == b.id and a.odd == b.odd
    assert a.original.cells == b.original.cells
    for key in a.object_keys:
        assert a.pose(key) == b.pose(key)
        assert a.shape(key).cells == b.shape(key).cells


def test_problem_invariants(default_set):
    for problem in default_set:
        labels = [label for label, _ in problem.options]
        assert labels == list(ANSWER_LABELS)
        assert problem.statement == PROBLEM_STATEMENT
        odd_labels = [
            label
            for label, shape in problem.options
            if not rotation_equivalent(shape, problem.original)
        ]
        assert odd_labels == [problem.odd]
        for label, shape in problem.options:
            if label != problem.odd:
                # matchable options reuse the original's cells verbatim
                assert shape.cells == problem.original.cells


def test_option_poses_are_grid_rotations_of_the_view(default_set):
    group = {
        tuple(np.asarray(g, dtype=np.int64).reshape(-1)) for g in canonical_orientations()
    }
    for problem in list(default_set)[:10]:
        base = problem.pose("original")
        assert base in VIEW_POOL
        for label in ANSWER_LABELS:
            rel = problem.pose(label).compose(base.inverse()).to_matrix()
            key = tuple(int(round(v)) for v in rel.reshape(-1))
            assert key in group
            assert np.allclose(rel, np.array(key).reshape(3, 3), atol=1e-9)


def test_matchables_align_after_reset(default_set):
    problem = default_set.problems[0]
    base = encode_png(render(problem.original, Pose.identity()))
    for label, shape in problem.options:
        same = encode_png(render(shape, Pose.identity())) == base
        assert same == (label != problem.odd)


def test_audit_margins_hold(default_set):
    for problem in list(default_set)[:3]:
        odd_shape = problem.option(problem.odd)
        reset_gap = max(
            image_diff(render(problem.original, pose), render(odd_shape, pose))
            for pose in reset_check_poses()
        )
        assert reset_gap >= AUDIT_MARGIN
        from spinstack.geometry import rotation_pose

        base = render(problem.original, problem.pose("original"))
        orbit_gap = min(
            image_diff(
                render(odd_shape, rotation_pose(rot).compose(problem.pose("original"))),
                base,
            )
            for rot in canonical_orientations()
        )
        assert orbit_gap >= AUDIT_MARGIN


def test_odd_shape_construction_rules(default_set):
    for problem in default_set:
        odd_shape = problem.option(problem.odd)
        if is_chiral(problem.original) and DEFAULT_CONSTRAINTS.admits(mirror(problem.original)):
            assert odd_shape.cells == mirror(problem.original).cells
        else:
            assert odd_shape.size == problem.original.size


def test_forge_problem_set_shape(default_set):
    assert len(default_set) == 40
    ids = [p.id for p in default_set]
    assert len(set(ids)) == 40
    odd_counts = {label: 0 for label in ANSWER_LABELS}
    for p in default_set:
        odd_counts[p.odd] += 1
    # no label may be degenerate on the benchmark set
    assert all(v >= 5 for v in odd_counts.values())


def test_forge_is_impossible_for_dominoes():
    # every 2-cell shape is a rotation of every other, so no odd option exists
    constraints = GenerationConstraints(min_cells=2, max_cells=2)
    with pytest.raises(ForgeError):
        make_problem(3, constraints, max_attempts=3)


def test_problem_rejects_bad_construction(default_set):
    p = default_set.problems[0]
    with pytest.raises(ValueError):
        Problem(
            id=p.id,
            seed=p.seed,
            original=p.original,
            options=tuple((label, p.original) for label, _ in p.options),
            odd=p.odd,
            poses=p.poses,
        )
    with pytest.raises(ValueError):
        Problem(
            id=p.id,
            seed=p.seed,
            original=p.original,
            options=p.options,
            odd="D",
            poses=p.poses,
        )


def test_problem_image_layout(default_set):
    p = default_set.problems[0]
    s = DEFAULT_SETTINGS
    img = problem_image(p)
    assert img.width == 4 * s.width
    assert img.height == s.height + s.banner_height
    tile = problem_tile(p, "A")
    assert tile.width == s.width and tile.height == s.height


def test_view_pool_shows_three_faces():
    cube = Polycube.from_cells([(0, 0, 0)])
    shades = {
        DEFAULT_SETTINGS.face_top,
        DEFAULT_SETTINGS.face_side,
        DEFAULT_SETTINGS.face_front,
    }
    for pose in VIEW_POOL:
        img = render(cube, pose)
        seen = {tuple(int(v) for v in row) for row in img.to_array().reshape(-1, 3)}
        assert shades <= seen


# ---------------------------------------------------------------------------
# dataset persistence


def test_save_load_round_trip(default_set, saved_dataset_dir):
    loaded = load_problem_set(saved_dataset_dir)
    assert loaded.seed == default_set.seed
    assert loaded.checksum == default_set.checksum
    assert len(loaded) == len(default_set)
    for a, b in zip(default_set, loaded):
        assert a.id == b.id and a.odd == b.odd
        assert a.original.cells == b.original.cells
        for key in a.object_keys:
            assert a.shape(key).cells == b.shape(key).cells
            assert a.pose(key).approx_equal(b.pose(key), 1e-12)


def test_saved_images_match_rerenders(default_set, saved_dataset_dir):
    p = default_set.problems[0]
    on_disk = (saved_dataset_dir / "images" / f"{p.id}_original.png").read_bytes()
    assert on_disk == encode_png(problem_tile(p, "original"))
    composite = (saved_dataset_dir / "images" / f"{p.id}_problem.png").read_bytes()
    assert composite == encode_png(problem_image(p))


def test_tampered_object_file_is_detected(dataset_copy):
    victim = sorted((dataset_copy / "objects").glob("*.cells"))[0]
    victim.write_bytes(victim.read_bytes() + b"9,9,9\n")
    with pytest.raises(DatasetError) as exc:
        load_problem_set(dataset_copy)
    assert victim.name in str(exc.value)


def test_tampered_image_is_detected(dataset_copy):
    victim = sorted((dataset_copy / "images").glob("*_A.png"))[0]
    data = bytearray(victim.read_bytes())
    data[-8] ^= 0x01
    victim.write_bytes(bytes(data))
    with pytest.raises(DatasetError) as exc:
        load_problem_set(dataset_copy)
    assert victim.name in str(exc.value)


def test_missing_file_is_detected(dataset_copy):
    victim = sorted((dataset_copy / "images").glob("*_B.png"))[0]
    victim.unlink()
    with pytest.raises(DatasetError):
        load_problem_set(dataset_copy)


def test_tampered_poses_are_detected(dataset_copy):
    path = dataset_copy / "poses.json"
    doc = json.loads(path.read_text())
    first = sorted(doc)[0]
    doc[first]["A"][0] += 0.25
    path.write_text(json.dumps(doc, indent=2, sort_keys=True))
    with pytest.raises(DatasetError):
        load_problem_set(dataset_copy)


def test_manifest_kind_mismatch(dataset_copy):
    path = dataset_copy / "manifest.json"
    doc = json.loads(path.read_text())
    doc["kind"] = "sweep"
    path.write_text(json.dumps(doc))
    with pytest.raises(DatasetError):
        load_problem_set(dataset_copy)


def test_missing_manifest(tmp_path):
    with pytest.raises(DatasetError):
        load_problem_set(tmp_path)


def test_checksum_covers_file_table(dataset_copy):
    path = dataset_copy / "manifest.json"
    doc = json.loads(path.read_text())
    doc["checksum"] = "0" * 64
    path.write_text(json.dumps(doc))
    with pytest.raises(DatasetError):
        load_problem_set(dataset_copy)


# ---------------------------------------------------------------------------
# probe pairs and sweeps


def test_euler_for_command_table():
    cases = {
        "right:30": (0.0, 30.0, 0.0),
        "left:30": (0.0, -30.0, 0.0),
        "down:45": (45.0, 0.0, 0.0),
        "up:45": (-45.0, 0.0, 0.0),
        "rotate:ccw:60": (0.0, 0.0, 60.0),
        "rotate:cw:60": (0.0, 0.0, -60.0),
    }
    for text, (pitch, yaw, roll) in cases.items():
        e = euler_for_command(parse_command(text))
        assert (e.pitch_deg, e.yaw_deg, e.roll_deg) == (pitch, yaw, roll)
    with pytest.raises(ValueError):
        euler_for_command(parse_command("reset"))


def test_euler_for_command_matches_pose_algebra():
    from spinstack.geometry import command_rotation

    for text in ("right:30", "left:45", "up:15", "down:75", "rotate:cw:120", "rotate:ccw:5"):
        cmd = parse_command(text)
        assert pose_from_euler(euler_for_command(cmd)).approx_equal(
            command_rotation(cmd), 1e-9
        )


def test_make_probe_pair_fields():
    shape = probe_objects(1)[0]
    pair = make_probe_pair(shape, parse_command("right:30"), pair_id="x1")
    assert pair.id == "x1"
    assert pair.base_pose == VIEW_POOL[0]
    before = decode_png(pair.before_png)
    after = decode_png(pair.after_png)
    assert before.width == after.width
    assert image_diff(before, after) > 0.0


def test_sweep_spec_angles():
    spec = SweepSpec()
    assert spec.angles() == tuple(range(0, 360, 30))
    assert len(spec.commands()) == 36
    with pytest.raises(ValueError):
        SweepSpec(step_deg=0)
    with pytest.raises(ValueError):
        SweepSpec(directions=("sideways",))


def test_sweep_dataset_ids_and_zero_angle(sweep_pairs):
    assert len(sweep_pairs) == 108
    ids = [p.id for p in sweep_pairs]
    assert len(set(ids)) == 108
    assert "obj0_right000" in ids
    zero = [p for p in sweep_pairs if p.command.angle == 0.0]
    assert len(zero) == 9
    for pair in zero:
        assert pair.before_png == pair.after_png
    nonzero = [p for p in sweep_pairs if p.command.angle != 0.0]
    for pair in nonzero[:12]:
        assert pair.before_png != pair.after_png


def test_sweep_save_load_round_trip(sweep_pairs, saved_sweep_dir):
    loaded = load_sweep_dataset(saved_sweep_dir)
    assert len(loaded) == len(sweep_pairs)
    by_id = {p.id: p for p in loaded}
    for pair in sweep_pairs:
        back = by_id[pair.id]
        assert back.shape.cells == pair.shape.cells
        assert back.command == pair.command
        assert back.before_png == pair.before_png
        assert back.after_png == pair.after_png
        assert back.base_pose.approx_equal(pair.base_pose, 1e-12)


def test_sweep_tamper_detection(tmp_path, sweep_pairs):
    save_sweep_dataset(sweep_pairs[:4], tmp_path / "s")
    victim = sorted((tmp_path / "s" / "pairs").glob("*.png"))[0]
    data = bytearray(victim.read_bytes())
    data[-1] ^= 0xFF
    victim.write_bytes(bytes(data))
    with pytest.raises(DatasetError):
        load_sweep_dataset(tmp_path / "s")


def test_probe_objects_are_distinct():
    objects = probe_objects(count=3, seed=1)
    assert len(objects) == 3
    for i, a in enumerate(objects):
        for b in objects[i + 1 :]:
            assert not rotation_equivalent(a, b)
    again = probe_objects(count=3, seed=1)
    for a, b in zip(objects, again):
        assert a.cells == b.cells


def test_generation_probe():
    shape = probe_objects(1)[0]
    probe = make_generation_probe(shape, parse_command("left:45"))
    assert "left:45" in probe.instruction
    assert probe.input_png
    assert probe.target_png
    assert probe.input_png != probe.target_png
