"""Procedural generation of odd-one-out rotation problems and probe datasets.

Every generator in this module is a pure function of its seed: the same seed
always yields the same shapes, poses, labels, and bytes, across processes and
platforms.  Randomness comes from ``random.Random`` seeded with strings, which
CPython hashes with SHA-512 and therefore keeps stable between versions.

Dataset layout on disk::

    manifest.json            metadata + sha256 of every other file
    poses.json               calibrated viewing pose per object
    objects/{id}_{label}.cells
    images/{id}_{label}.png  one raw tile per object
    images/{id}_problem.png  labeled composite shown to the solver

Matchable options store exactly the same cell set as the original; the grid
rotation that distinguishes them is folded into the calibrated viewing pose.
That shared coordinate frame is what makes "reset" comparisons exact and lets
an orbit search recover the correction as a product of 90 degree moves.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

from .geometry import (
    Cell,
    CameraRig,
    EulerAnglesDeg,
    GridRotation,
    IDENTITY_ROTATION,
    Polycube,
    Pose,
    apply_camera_rotation,
    canonical_orientations,
    is_chiral,
    mirror,
    normalize_polycube,
    polycube_from_text,
    polycube_to_text,
    pose_from_euler,
    rotation_equivalent,
    rotation_pose,
)
from .protocol import ANSWER_LABELS, PROBLEM_STATEMENT, RotationCommand, parse_sequence
from .render import (
    DEFAULT_RIG,
    DEFAULT_SETTINGS,
    RasterImage,
    RenderSettings,
    compose_grid,
    encode_png,
    image_diff,
    render,
)

FORMAT_VERSION = 1

DEFAULT_SET_SEED = 7
DEFAULT_PROBLEM_COUNT = 40

# Minimum mean-pixel separation the audit demands between the odd object and
# the original, both at shared reset views and across the full orbit of the
# calibrated view.  Solvers may then use any threshold comfortably below it.
AUDIT_MARGIN = 1e-3

# Reset-frame check views shared between the forge audit and match-by-reset
# solvers: identity plus five rotations that together expose every face.
RESET_CHECK_SEQUENCES = ("", "down:90", "left:90", "left:180", "left:270", "up:90")


class ForgeError(Exception):
    """Raised when generation cannot satisfy its constraints or audits."""


class DatasetError(Exception):
    """Raised when a saved dataset is missing, malformed, or tampered with."""


@dataclass(frozen=True)
class GenerationConstraints:
    """Bounding-box and cell-count limits for generated objects.

    Width runs along x, height along y, depth along z.
    """

    max_width: int = 5
    max_height: int = 2
    max_depth: int = 5
    min_cells: int = 5
    max_cells: int = 8

    def __post_init__(self) -> None:
        for name in ("max_width", "max_height", "max_depth"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.min_cells < 1:
            raise ValueError("min_cells must be at least 1")
        if self.max_cells < self.min_cells:
            raise ValueError("max_cells must be >= min_cells")
        if self.max_cells > self.max_width * self.max_height * self.max_depth:
            raise ValueError("max_cells exceeds the bounding-box capacity")

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.max_width, self.max_height, self.max_depth)

    def admits(self, shape: Polycube) -> bool:
        if not (self.min_cells <= shape.size <= self.max_cells):
            return False
        return all(d <= m for d, m in zip(shape.dims(), self.dims))


DEFAULT_CONSTRAINTS = GenerationConstraints()

_NEIGHBOR_OFFSETS = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))


def _grow(rng: random.Random, constraints: GenerationConstraints) -> Polycube:
    """Grow a connected shape one face-adjacent cell at a time."""
    target = rng.randint(constraints.min_cells, constraints.max_cells)
    cells: set[Cell] = {(0, 0, 0)}
    while len(cells) < target:
        lo = [min(c[i] for c in cells) for i in range(3)]
        hi = [max(c[i] for c in cells) for i in range(3)]
        candidates = []
        for cell in sorted(cells):
            for dx, dy, dz in _NEIGHBOR_OFFSETS:
                cand = (cell[0] + dx, cell[1] + dy, cell[2] + dz)
                if cand in cells:
                    continue
                extents = [
                    max(hi[i], cand[i]) - min(lo[i], cand[i]) + 1 for i in range(3)
                ]
                if all(e <= m for e, m in zip(extents, constraints.dims)):
                    candidates.append(cand)
        if not candidates:
            break
        cells.add(rng.choice(sorted(set(candidates))))
    return normalize_polycube(Polycube.from_cells(cells))


def generate_polycube(
    seed: int, constraints: GenerationConstraints = DEFAULT_CONSTRAINTS
) -> Polycube:
    """Deterministically generate one connected shape within the constraints."""
    rng = random.Random(f"spinstack-shape-{seed}")
    shape = _grow(rng, constraints)
    if not constraints.admits(shape):
        raise ForgeError(f"shape for seed {seed} violates its own constraints")
    return shape


# Calibrated three-quarter viewing poses: pitch lifts the camera off the
# horizon, yaw keeps face normals away from the axes so three faces stay
# visible and no silhouette degenerates.
_VIEW_EULERS = (
    (-24.0, 33.0),
    (-18.0, 49.0),
    (-29.0, 38.0),
    (21.0, 33.0),
    (-24.0, 57.0),
    (-16.0, 24.0),
    (24.0, 44.0),
    (-31.0, 52.0),
)

VIEW_POOL: tuple[Pose, ...] = tuple(
    pose_from_euler(EulerAnglesDeg(pitch, yaw, 0.0)) for pitch, yaw in _VIEW_EULERS
)


def reset_check_poses() -> tuple[Pose, ...]:
    poses = []
    for seq in RESET_CHECK_SEQUENCES:
        pose = Pose.identity()
        for cmd in parse_sequence(seq) if seq else ():
            pose = apply_camera_rotation(pose, cmd)
        poses.append(pose)
    return tuple(poses)


@dataclass(frozen=True)
class Problem:
    """One odd-one-out task: an original object and three labeled options.

    Exactly one option (``odd``) is not a rotation of the original.  The other
    two share the original's cell set verbatim; their distinguishing grid
    rotation lives in ``poses``, the calibrated viewing pose per object key
    ("original", "A", "B", "C").
    """

    id: str
    seed: int
    original: Polycube
    options: tuple[tuple[str, Polycube], ...]
    odd: str
    poses: tuple[tuple[str, Pose], ...]
    statement: str = PROBLEM_STATEMENT

    def __post_init__(self) -> None:
        labels = tuple(label for label, _ in self.options)
        if labels != ANSWER_LABELS:
            raise ValueError(f"options must be labeled {ANSWER_LABELS}, got {labels}")
        if self.odd not in labels:
            raise ValueError(f"odd label {self.odd!r} is not an option")
        pose_keys = tuple(key for key, _ in self.poses)
        if pose_keys != ("original",) + ANSWER_LABELS:
            raise ValueError("poses must cover original, A, B, C in order")
        odd_count = sum(
            1
            for _, shape in self.options
            if not rotation_equivalent(shape, self.original)
        )
        if odd_count != 1:
            raise ValueError(f"expected exactly one odd option, found {odd_count}")
        if rotation_equivalent(self.option(self.odd), self.original):
            raise ValueError(f"option {self.odd} is labeled odd but matches")

    def option(self, label: str) -> Polycube:
        for key, shape in self.options:
            if key == label:
                return shape
        raise KeyError(label)

    def pose(self, key: str) -> Pose:
        for name, pose in self.poses:
            if name == key:
                return pose
        raise KeyError(key)

    def shape(self, key: str) -> Polycube:
        return self.original if key == "original" else self.option(key)

    @property
    def object_keys(self) -> tuple[str, ...]:
        return ("original",) + ANSWER_LABELS


def problem_tile(
    problem: Problem,
    key: str,
    rig: CameraRig = DEFAULT_RIG,
    settings: RenderSettings = DEFAULT_SETTINGS,
) -> RasterImage:
    """Render one object of a problem at its calibrated pose."""
    return render(problem.shape(key), problem.pose(key), rig, settings)


def problem_image(
    problem: Problem,
    rig: CameraRig = DEFAULT_RIG,
    settings: RenderSettings = DEFAULT_SETTINGS,
) -> RasterImage:
    """Compose the labeled presentation image: original then options A, B, C."""
    cells = [(problem_tile(problem, key, rig, settings), key) for key in problem.object_keys]
    return compose_grid(cells, settings)


def _edit_one_cell(
    rng: random.Random, original: Polycube, constraints: GenerationConstraints
) -> Polycube | None:
    """Move one cell of an achiral shape so the result is inequivalent.

    Keeps the cell count, connectivity, and bounding-box constraints intact.
    """
    cells = set(original.cells)
    removable = []
    for cell in sorted(cells):
        rest = cells - {cell}
        if rest and Polycube.is_connected(rest):
            removable.append(cell)
    rng.shuffle(removable)
    for gone in removable:
        rest = cells - {gone}
        sites = set()
        for cell in rest:
            for dx, dy, dz in _NEIGHBOR_OFFSETS:
                cand = (cell[0] + dx, cell[1] + dy, cell[2] + dz)
                if cand not in rest and cand != gone:
                    sites.add(cand)
        ordered = sorted(sites)
        rng.shuffle(ordered)
        for site in ordered:
            shape = normalize_polycube(Polycube.from_cells(rest | {site}))
            if not constraints.admits(shape):
                continue
            if rotation_equivalent(shape, original):
                continue
            return shape
    return None


def _audit_problem(
    problem: Problem,
    rig: CameraRig,
    settings: RenderSettings,
) -> bool:
    """Check that the odd object is robustly distinguishable by rendering.

    Two separations must exceed AUDIT_MARGIN: the best case over the shared
    reset views, and the worst case over the odd object's full view orbit
    against the original's calibrated view.
    """
    original = problem.original
    odd_shape = problem.option(problem.odd)
    reset_gap = max(
        image_diff(
            render(original, pose, rig, settings),
            render(odd_shape, pose, rig, settings),
        )
        for pose in reset_check_poses()
    )
    if reset_gap < AUDIT_MARGIN:
        return False
    base = render(original, problem.pose("original"), rig, settings)
    orbit_gap = min(
        image_diff(
            render(odd_shape, rotation_pose(rot).compose(problem.pose("original")), rig, settings),
            base,
        )
        for rot in canonical_orientations()
    )
    return orbit_gap >= AUDIT_MARGIN


def make_problem(
    seed: int,
    constraints: GenerationConstraints = DEFAULT_CONSTRAINTS,
    rig: CameraRig = DEFAULT_RIG,
    settings: RenderSettings = DEFAULT_SETTINGS,
    max_attempts: int = 20,
) -> Problem:
    """Forge one audited problem deterministically from its seed."""
    rng = random.Random(f"spinstack-problem-{seed}")
    orientations = canonical_orientations()
    turned = [rot for rot in orientations if rot != IDENTITY_ROTATION]
    for _ in range(max_attempts):
        original = _grow(rng, constraints)
        if not constraints.admits(original):
            continue
        if is_chiral(original):
            odd_shape = mirror(original)
            if not constraints.admits(odd_shape):
                odd_shape = _edit_one_cell(rng, original, constraints)
        else:
            odd_shape = _edit_one_cell(rng, original, constraints)
        if odd_shape is None:
            continue
        odd_label = rng.choice(ANSWER_LABELS)
        view = rng.choice(VIEW_POOL)
        options = []
        poses: list[tuple[str, Pose]] = [("original", view)]
        for label in ANSWER_LABELS:
            shape = odd_shape if label == odd_label else original
            rotation = rng.choice(turned)
            options.append((label, shape))
            poses.append((label, rotation_pose(rotation).compose(view)))
        problem = Problem(
            id=f"p{seed}",
            seed=seed,
            original=original,
            options=tuple(options),
            odd=odd_label,
            poses=tuple(poses),
        )
        if _audit_problem(problem, rig, settings):
            return problem
    raise ForgeError(f"could not forge an auditable problem for seed {seed}")


@dataclass
class ProblemSet:
    """An ordered collection of problems plus its generation provenance."""

    problems: tuple[Problem, ...]
    seed: int
    constraints: GenerationConstraints = DEFAULT_CONSTRAINTS
    checksum: str | None = None

    def __post_init__(self) -> None:
        ids = [p.id for p in self.problems]
        if len(set(ids)) != len(ids):
            raise ValueError("problem ids must be unique")

    def __iter__(self) -> Iterator[Problem]:
        return iter(self.problems)

    def __len__(self) -> int:
        return len(self.problems)

    def get(self, problem_id: str) -> Problem:
        for problem in self.problems:
            if problem.id == problem_id:
                return problem
        raise KeyError(problem_id)


def forge_problem_set(
    seed: int = DEFAULT_SET_SEED,
    count: int = DEFAULT_PROBLEM_COUNT,
    constraints: GenerationConstraints = DEFAULT_CONSTRAINTS,
    rig: CameraRig = DEFAULT_RIG,
    settings: RenderSettings = DEFAULT_SETTINGS,
) -> ProblemSet:
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = random.Random(f"spinstack-set-{seed}")
    seeds: list[int] = []
    seen: set[int] = set()
    while len(seeds) < count:
        s = rng.randrange(2**32)
        if s not in seen:
            seen.add(s)
            seeds.append(s)
    problems = tuple(
        make_problem(s, constraints, rig, settings) for s in seeds
    )
    return ProblemSet(problems=problems, seed=seed, constraints=constraints)


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _pose_to_list(pose: Pose) -> list[float]:
    return [pose.w, pose.x, pose.y, pose.z]


def _pose_from_list(values: Sequence[float]) -> Pose:
    if len(values) != 4 or not all(isinstance(v, (int, float)) for v in values):
        raise DatasetError("poses must be [w, x, y, z] number quadruples")
    return Pose.from_quat(*(float(v) for v in values))


def save_problem_set(
    problem_set: ProblemSet,
    directory: str | Path,
    rig: CameraRig = DEFAULT_RIG,
    settings: RenderSettings = DEFAULT_SETTINGS,
) -> str:
    """Write the dataset layout and return the set checksum."""
    root = Path(directory)
    (root / "objects").mkdir(parents=True, exist_ok=True)
    (root / "images").mkdir(parents=True, exist_ok=True)

    files: dict[str, str] = {}

    def write(rel: str, data: bytes) -> None:
        (root / rel).write_bytes(data)
        files[rel] = _sha256(data)

    poses_doc: dict[str, dict[str, list[float]]] = {}
    for problem in problem_set:
        for key in problem.object_keys:
            text = polycube_to_text(problem.shape(key))
            write(f"objects/{problem.id}_{key}.cells", text.encode("ascii"))
            tile = problem_tile(problem, key, rig, settings)
            write(f"images/{problem.id}_{key}.png", encode_png(tile))
        write(f"images/{problem.id}_problem.png", encode_png(problem_image(problem, rig, settings)))
        poses_doc[problem.id] = {
            key: _pose_to_list(problem.pose(key)) for key in problem.object_keys
        }
    write("poses.json", json.dumps(poses_doc, indent=2, sort_keys=True).encode("ascii"))

    checksum = _sha256(json.dumps(files, sort_keys=True).encode("ascii"))
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": "problem-set",
        "seed": problem_set.seed,
        "count": len(problem_set),
        "checksum": checksum,
        "constraints": {
            "max_width": problem_set.constraints.max_width,
            "max_height": problem_set.constraints.max_height,
            "max_depth": problem_set.constraints.max_depth,
            "min_cells": problem_set.constraints.min_cells,
            "max_cells": problem_set.constraints.max_cells,
        },
        "statement": PROBLEM_STATEMENT,
        "problems": [
            {"id": p.id, "seed": p.seed, "odd": p.odd} for p in problem_set
        ],
        "files": files,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    problem_set.checksum = checksum
    return checksum


def _read_manifest(root: Path, kind: str) -> dict:
    path = root / "manifest.json"
    if not path.is_file():
        raise DatasetError(f"missing manifest: {path}")
    try:
        manifest = json.loads(path.read_text())
    except (ValueError, UnicodeDecodeError) as exc:
        raise DatasetError(f"unreadable manifest {path}: {exc}") from None
    if not isinstance(manifest, dict) or manifest.get("kind") != kind:
        raise DatasetError(f"{path} is not a {kind} manifest")
    if manifest.get("format_version") != FORMAT_VERSION:
        raise DatasetError(f"unsupported format_version in {path}")
    files = manifest.get("files")
    if not isinstance(files, dict):
        raise DatasetError(f"{path} lacks a files table")
    for rel, expected in sorted(files.items()):
        target = root / rel
        if not target.is_file():
            raise DatasetError(f"missing dataset file: {rel}")
        actual = _sha256(target.read_bytes())
        if actual != expected:
            raise DatasetError(f"checksum mismatch for {rel}")
    checksum = _sha256(json.dumps(files, sort_keys=True).encode("ascii"))
    if checksum != manifest.get("checksum"):
        raise DatasetError("manifest checksum does not match its files table")
    return manifest


def load_problem_set(directory: str | Path) -> ProblemSet:
    """Load and integrity-check a saved problem set."""
    root = Path(directory)
    manifest = _read_manifest(root, "problem-set")
    try:
        poses_doc = json.loads((root / "poses.json").read_text())
    except ValueError as exc:
        raise DatasetError(f"unreadable poses.json: {exc}") from None
    c = manifest.get("constraints", {})
    try:
        constraints = GenerationConstraints(**{k: int(c[k]) for k in (
            "max_width", "max_height", "max_depth", "min_cells", "max_cells")})
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"bad constraints in manifest: {exc}") from None
    problems = []
    for entry in manifest.get("problems", []):
        pid, seed, odd = entry.get("id"), entry.get("seed"), entry.get("odd")
        if not isinstance(pid, str) or not isinstance(seed, int) or odd not in ANSWER_LABELS:
            raise DatasetError(f"malformed problem entry: {entry!r}")
        shapes = {}
        for key in ("original",) + ANSWER_LABELS:
            rel = f"objects/{pid}_{key}.cells"
            try:
                shapes[key] = polycube_from_text((root / rel).read_text())
            except (OSError, ValueError) as exc:
                raise DatasetError(f"bad object file {rel}: {exc}") from None
        pose_map = poses_doc.get(pid)
        if not isinstance(pose_map, dict):
            raise DatasetError(f"poses.json lacks an entry for {pid}")
        try:
            poses = tuple(
                (key, _pose_from_list(pose_map[key]))
                for key in ("original",) + ANSWER_LABELS
            )
        except KeyError as exc:
            raise DatasetError(f"poses.json entry for {pid} lacks key {exc}") from None
        try:
            problems.append(
                Problem(
                    id=pid,
                    seed=seed,
                    original=shapes["original"],
                    options=tuple((label, shapes[label]) for label in ANSWER_LABELS),
                    odd=odd,
                    poses=poses,
                )
            )
        except ValueError as exc:
            raise DatasetError(f"invalid problem {pid}: {exc}") from None
    problem_set = ProblemSet(
        problems=tuple(problems),
        seed=int(manifest.get("seed", 0)),
        constraints=constraints,
        checksum=str(manifest.get("checksum")),
    )
    if len(problem_set) != manifest.get("count"):
        raise DatasetError("manifest count disagrees with its problem list")
    return problem_set


# --- Probe datasets -------------------------------------------------------

@dataclass(frozen=True)
class ProbePair:
    """A before/after render pair produced by one rotation command."""

    id: str
    shape: Polycube
    base_pose: Pose
    command: RotationCommand
    before_png: bytes
    after_png: bytes


def euler_for_command(command: RotationCommand) -> EulerAnglesDeg:
    """Ground-truth net orientation change of a single command, as Euler angles."""
    theta = command.angle
    if command.direction == "right":
        return EulerAnglesDeg(0.0, theta, 0.0)
    if command.direction == "left":
        return EulerAnglesDeg(0.0, -theta, 0.0)
    if command.direction == "down":
        return EulerAnglesDeg(theta, 0.0, 0.0)
    if command.direction == "up":
        return EulerAnglesDeg(-theta, 0.0, 0.0)
    if command.direction == "ccw":
        return EulerAnglesDeg(0.0, 0.0, theta)
    if command.direction == "cw":
        return EulerAnglesDeg(0.0, 0.0, -theta)
    raise ValueError(f"no Euler ground truth for direction {command.direction!r}")


def make_probe_pair(
    shape: Polycube,
    command: RotationCommand,
    base_pose: Pose | None = None,
    pair_id: str | None = None,
    rig: CameraRig = DEFAULT_RIG,
    settings: RenderSettings = DEFAULT_SETTINGS,
) -> ProbePair:
    pose = VIEW_POOL[0] if base_pose is None else base_pose
    before = encode_png(render(shape, pose, rig, settings))
    after = encode_png(render(shape, apply_camera_rotation(pose, command), rig, settings))
    return ProbePair(
        id=pair_id if pair_id is not None else command.surface().replace(":", "_"),
        shape=shape,
        base_pose=pose,
        command=command,
        before_png=before,
        after_png=after,
    )


@dataclass(frozen=True)
class SweepSpec:
    """An axis/angle grid for systematic probe sweeps."""

    directions: tuple[str, ...] = ("right", "up", "cw")
    start_deg: int = 0
    stop_deg: int = 360
    step_deg: int = 30

    def __post_init__(self) -> None:
        from .protocol import DIRECTIONS

        for d in self.directions:
            if d not in DIRECTIONS:
                raise ValueError(f"unknown direction {d!r}")
        if self.step_deg <= 0:
            raise ValueError("step_deg must be positive")
        if not (0 <= self.start_deg < self.stop_deg <= 360):
            raise ValueError("sweep range must satisfy 0 <= start < stop <= 360")
        if (self.stop_deg - self.start_deg) % self.step_deg:
            raise ValueError("sweep range must be a multiple of step_deg")

    def angles(self) -> tuple[int, ...]:
        return tuple(range(self.start_deg, self.stop_deg, self.step_deg))

    def commands(self) -> tuple[RotationCommand, ...]:
        return tuple(
            RotationCommand(direction, float(angle))
            for direction in self.directions
            for angle in self.angles()
        )


def make_sweep_dataset(
    shape: Polycube,
    spec: SweepSpec = SweepSpec(),
    base_pose: Pose | None = None,
    id_prefix: str = "",
    rig: CameraRig = DEFAULT_RIG,
    settings: RenderSettings = DEFAULT_SETTINGS,
) -> tuple[ProbePair, ...]:
    """Render one before/after pair per (direction, angle) in the sweep."""
    pose = VIEW_POOL[0] if base_pose is None else base_pose
    pairs = []
    for command in spec.commands():
        pair_id = f"{id_prefix}{command.direction}{int(command.angle):03d}"
        pairs.append(
            make_probe_pair(shape, command, pose, pair_id, rig, settings)
        )
    return tuple(pairs)


def probe_objects(
    count: int = 3,
    seed: int = 1,
    constraints: GenerationConstraints = DEFAULT_CONSTRAINTS,
) -> tuple[Polycube, ...]:
    """Deterministic objects for probe sweeps, distinct from each other."""
    shapes: list[Polycube] = []
    offset = 0
    while len(shapes) < count:
        shape = generate_polycube(seed * 1000 + offset, constraints)
        offset += 1
        if any(rotation_equivalent(shape, s) for s in shapes):
            continue
        shapes.append(shape)
    return tuple(shapes)


def save_sweep_dataset(pairs: Sequence[ProbePair], directory: str | Path) -> str:
    root = Path(directory)
    (root / "pairs").mkdir(parents=True, exist_ok=True)
    (root / "objects").mkdir(parents=True, exist_ok=True)
    files: dict[str, str] = {}

    def write(rel: str, data: bytes) -> None:
        (root / rel).write_bytes(data)
        files[rel] = _sha256(data)

    entries = []
    seen_ids = set()
    for pair in pairs:
        if pair.id in seen_ids:
            raise ValueError(f"duplicate pair id {pair.id!r}")
        seen_ids.add(pair.id)
        write(f"objects/{pair.id}.cells", polycube_to_text(pair.shape).encode("ascii"))
        write(f"pairs/{pair.id}_before.png", pair.before_png)
        write(f"pairs/{pair.id}_after.png", pair.after_png)
        entries.append(
            {
                "id": pair.id,
                "base_pose": _pose_to_list(pair.base_pose),
                "command": pair.command.surface(),
            }
        )
    checksum = _sha256(json.dumps(files, sort_keys=True).encode("ascii"))
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": "sweep",
        "checksum": checksum,
        "pairs": entries,
        "files": files,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return checksum


def load_sweep_dataset(directory: str | Path) -> tuple[ProbePair, ...]:
    root = Path(directory)
    manifest = _read_manifest(root, "sweep")
    pairs = []
    for entry in manifest.get("pairs", []):
        pid = entry.get("id")
        if not isinstance(pid, str):
            raise DatasetError(f"malformed pair entry: {entry!r}")
        try:
            shape = polycube_from_text((root / f"objects/{pid}.cells").read_text())
            before = (root / f"pairs/{pid}_before.png").read_bytes()
            after = (root / f"pairs/{pid}_after.png").read_bytes()
        except (OSError, ValueError) as exc:
            raise DatasetError(f"bad files for pair {pid}: {exc}") from None
        commands = parse_sequence(entry.get("command", ""))
        if len(commands) != 1:
            raise DatasetError(f"pair {pid} must hold exactly one command")
        pairs.append(
            ProbePair(
                id=pid,
                shape=shape,
                base_pose=_pose_from_list(entry.get("base_pose", ())),
                command=commands[0],
                before_png=before,
                after_png=after,
            )
        )
    return tuple(pairs)


@dataclass(frozen=True)
class GenerationProbe:
    """An image-generation probe: reproduce the after-state of one rotation."""

    id: str
    instruction: str
    input_png: bytes
    target_png: bytes
    command: RotationCommand


def make_generation_probe(
    shape: Polycube,
    command: RotationCommand,
    base_pose: Pose | None = None,
    probe_id: str | None = None,
    rig: CameraRig = DEFAULT_RIG,
    settings: RenderSettings = DEFAULT_SETTINGS,
) -> GenerationProbe:
    pair = make_probe_pair(shape, command, base_pose, probe_id, rig, settings)
    instruction = (
        "Rotate the pictured cube stack by applying the camera-frame command "
        f"'{command.surface()}', then render the result from the same camera."
    )
    return GenerationProbe(
        id=pair.id,
        instruction=instruction,
        input_png=pair.before_png,
        target_png=pair.after_png,
        command=command,
    )
