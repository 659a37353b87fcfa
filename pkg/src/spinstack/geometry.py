"""Rotation algebra and voxel-shape equivalence.

Conventions, fixed once and tested against rendered goldens:

- Orientations are unit quaternions (w, x, y, z); q and -q are the same
  orientation, compared with |dot| >= 1 - 1e-9.
- The camera sits on +Z looking at the origin with up = +Y. Orbit commands
  rotate the object about camera axes: right:V is +V degrees about +Y,
  left:V is -V, down:V is +V about +X, up:V is -V, rotate:ccw:V is +V about
  +Z and rotate:cw:V is -V. Sequential commands pre-multiply: applying
  [c1, c2] yields R(c2) @ R(c1) @ p.
- Euler angles are extrinsic X then Y then Z, in degrees: pitch about X is
  applied first, then yaw about Y, then roll about Z, all in the fixed
  camera frame. The degenerate middle axis (|yaw| = 90) is resolved by the
  convention roll = 0; conversion is total, never an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator

import numpy as np

from .protocol import RotationCommand

Cell = tuple[int, int, int]
GridRotation = tuple[tuple[int, int, int], ...]  # 3x3 integer rotation matrix rows

ORIENTATION_TOL = 1e-9


@dataclass(frozen=True)
class Pose:
    """An orientation as a unit quaternion (w, x, y, z)."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        n2 = self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
        if not math.isfinite(n2) or abs(n2 - 1.0) > 1e-6:
            raise ValueError(f"quaternion is not unit length: norm^2 = {n2!r}")

    @classmethod
    def identity(cls) -> "Pose":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_quat(cls, w: float, x: float, y: float, z: float) -> "Pose":
        n = math.sqrt(w * w + x * x + y * y + z * z)
        if not math.isfinite(n) or n == 0.0:
            raise ValueError("cannot normalize a zero or non-finite quaternion")
        if abs(n - 1.0) <= 1e-12:  # keep already-unit values bit-stable
            return cls(w, x, y, z)
        return cls(w / n, x / n, y / n, z / n)

    @classmethod
    def from_axis_angle(cls, axis: tuple[float, float, float], angle_deg: float) -> "Pose":
        ax, ay, az = axis
        n = math.sqrt(ax * ax + ay * ay + az * az)
        if n == 0.0:
            raise ValueError("rotation axis must be non-zero")
        half = math.radians(angle_deg) / 2.0
        s = math.sin(half) / n
        return cls.from_quat(math.cos(half), ax * s, ay * s, az * s)

    def compose(self, other: "Pose") -> "Pose":
        """self applied after other (quaternion product self * other)."""
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = other.w, other.x, other.y, other.z
        return Pose.from_quat(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    def inverse(self) -> "Pose":
        return Pose(self.w, -self.x, -self.y, -self.z)

    def approx_equal(self, other: "Pose", tol: float = ORIENTATION_TOL) -> bool:
        dot = self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
        return abs(dot) >= 1.0 - tol

    def rotate_vector(self, v: tuple[float, float, float]) -> tuple[float, float, float]:
        m = self.to_matrix()
        x, y, z = v
        return (
            m[0][0] * x + m[0][1] * y + m[0][2] * z,
            m[1][0] * x + m[1][1] * y + m[1][2] * z,
            m[2][0] * x + m[2][1] * y + m[2][2] * z,
        )

    def to_matrix(self) -> np.ndarray:
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
                [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
                [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
            ],
            dtype=np.float64,
        )

    @classmethod
    def from_matrix(cls, m) -> "Pose":
        m = np.asarray(m, dtype=np.float64)
        t = m[0, 0] + m[1, 1] + m[2, 2]
        if t > 0:
            s = math.sqrt(t + 1.0) * 2
            return cls.from_quat(
                0.25 * s,
                (m[2, 1] - m[1, 2]) / s,
                (m[0, 2] - m[2, 0]) / s,
                (m[1, 0] - m[0, 1]) / s,
            )
        if m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
            s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
            return cls.from_quat(
                (m[2, 1] - m[1, 2]) / s, 0.25 * s,
                (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s,
            )
        if m[1, 1] >= m[2, 2]:
            s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
            return cls.from_quat(
                (m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s,
                0.25 * s, (m[1, 2] + m[2, 1]) / s,
            )
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        return cls.from_quat(
            (m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s,
            (m[1, 2] + m[2, 1]) / s, 0.25 * s,
        )


@dataclass(frozen=True)
class CameraRig:
    """Fixed viewing frame: camera on +Z at distance_factor x bounding radius."""

    distance_factor: float = 3.5
    fov_deg: float = 30.0

    def __post_init__(self):
        if not (self.distance_factor > 1.0 and math.isfinite(self.distance_factor)):
            raise ValueError("distance_factor must be a finite value > 1")
        if not (10.0 <= self.fov_deg <= 90.0):
            raise ValueError("fov_deg must be within [10, 90]")


# Camera-frame axes for each command direction: right-handed, +Y up, +Z out.
_COMMAND_AXES: dict[str, tuple[tuple[float, float, float], float]] = {
    "right": ((0.0, 1.0, 0.0), 1.0),
    "left": ((0.0, 1.0, 0.0), -1.0),
    "down": ((1.0, 0.0, 0.0), 1.0),
    "up": ((1.0, 0.0, 0.0), -1.0),
    "ccw": ((0.0, 0.0, 1.0), 1.0),
    "cw": ((0.0, 0.0, 1.0), -1.0),
}


def command_rotation(cmd: RotationCommand) -> Pose:
    """The camera-frame rotation a single directional command performs."""
    if cmd.direction == "reset":
        raise ValueError("reset is resolved by the session, not the rotation algebra")
    axis, sign = _COMMAND_AXES[cmd.direction]
    return Pose.from_axis_angle(axis, sign * cmd.angle)


def apply_camera_rotation(pose: Pose, cmd: RotationCommand) -> Pose:
    """Apply one command to a pose; camera-frame rotations pre-multiply."""
    return command_rotation(cmd).compose(pose)


def inverse_command(cmd: RotationCommand) -> RotationCommand:
    opposite = {"left": "right", "right": "left", "up": "down", "down": "up",
                "cw": "ccw", "ccw": "cw"}
    if cmd.direction == "reset":
        raise ValueError("reset has no inverse command")
    return RotationCommand(opposite[cmd.direction], cmd.angle)


@dataclass(frozen=True)
class EulerAnglesDeg:
    """Extrinsic X-Y-Z angles in degrees: pitch (X), yaw (Y), roll (Z)."""

    pitch_deg: float
    yaw_deg: float
    roll_deg: float


def pose_from_euler(e: EulerAnglesDeg) -> Pose:
    qx = Pose.from_axis_angle((1, 0, 0), e.pitch_deg)
    qy = Pose.from_axis_angle((0, 1, 0), e.yaw_deg)
    qz = Pose.from_axis_angle((0, 0, 1), e.roll_deg)
    return qz.compose(qy.compose(qx))


def pose_to_euler(p: Pose) -> EulerAnglesDeg:
    """Total conversion; at |yaw| = 90 the free axis is resolved as roll = 0."""
    m = p.to_matrix()
    sy = -m[2, 0]
    sy = min(1.0, max(-1.0, float(sy)))
    if abs(sy) < 1.0 - 1e-12:
        pitch = math.atan2(m[2, 1], m[2, 2])
        yaw = math.asin(sy)
        roll = math.atan2(m[1, 0], m[0, 0])
    else:
        yaw = math.copysign(math.pi / 2.0, sy)
        roll = 0.0
        if sy > 0:
            pitch = math.atan2(m[0, 1], m[0, 2])
        else:
            pitch = math.atan2(-m[0, 1], -m[0, 2])
    return EulerAnglesDeg(math.degrees(pitch), math.degrees(yaw), math.degrees(roll))


# ---------------------------------------------------------------------------
# The 24 proper rotations of the cube, as integer matrices.

_ROT_X90: GridRotation = ((1, 0, 0), (0, 0, -1), (0, 1, 0))
_ROT_Y90: GridRotation = ((0, 0, 1), (0, 1, 0), (-1, 0, 0))
_ROT_Z90: GridRotation = ((0, -1, 0), (1, 0, 0), (0, 0, 1))

IDENTITY_ROTATION: GridRotation = ((1, 0, 0), (0, 1, 0), (0, 0, 1))


def compose_rotations(a: GridRotation, b: GridRotation) -> GridRotation:
    """Matrix product a @ b (apply b first, then a)."""
    return tuple(
        tuple(sum(a[i][k] * b[k][j] for k in range(3)) for j in range(3))
        for i in range(3)
    )


def rotate_cell(rot: GridRotation, cell: Cell) -> Cell:
    x, y, z = cell
    return (
        rot[0][0] * x + rot[0][1] * y + rot[0][2] * z,
        rot[1][0] * x + rot[1][1] * y + rot[1][2] * z,
        rot[2][0] * x + rot[2][1] * y + rot[2][2] * z,
    )


@lru_cache(maxsize=1)
def canonical_orientations() -> tuple[GridRotation, ...]:
    """All 24 proper rotations of the cube, generated by 90-degree turns.

    Built by closure over the three generators and returned in a stable
    sorted order; the set is closed under composition and every element has
    order 1, 2, 3 or 4.
    """
    generators = (_ROT_X90, _ROT_Y90, _ROT_Z90)
    seen = {IDENTITY_ROTATION}
    frontier = [IDENTITY_ROTATION]
    while frontier:
        nxt = []
        for r in frontier:
            for g in generators:
                c = compose_rotations(g, r)
                if c not in seen:
                    seen.add(c)
                    nxt.append(c)
        frontier = nxt
    return tuple(sorted(seen))


def rotation_pose(rot: GridRotation) -> Pose:
    """The unit quaternion realizing a grid rotation."""
    return Pose.from_matrix(np.array(rot, dtype=np.float64))


# ---------------------------------------------------------------------------
# Polycubes.

_NEIGHBOR_OFFSETS: tuple[Cell, ...] = (
    (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1),
)


@dataclass(frozen=True)
class Polycube:
    """A non-empty, face-connected set of integer voxel cells."""

    cells: frozenset[Cell]

    def __post_init__(self):
        if not self.cells:
            raise ValueError("a polycube needs at least one cell")
        for c in self.cells:
            if len(c) != 3 or not all(isinstance(v, int) for v in c):
                raise ValueError(f"cell {c!r} is not an integer (x, y, z) triple")
        if not _is_face_connected(self.cells):
            raise ValueError("polycube cells must be face-connected")

    @classmethod
    def from_cells(cls, cells: Iterable[Cell]) -> "Polycube":
        return cls(frozenset(tuple(int(v) for v in c) for c in cells))

    @staticmethod
    def is_connected(cells: Iterable[Cell]) -> bool:
        """True when the cells form one non-empty face-connected component."""
        cellset = frozenset(cells)
        return bool(cellset) and _is_face_connected(cellset)

    @property
    def size(self) -> int:
        return len(self.cells)

    def bounds(self) -> tuple[Cell, Cell]:
        xs, ys, zs = zip(*self.cells)
        return (min(xs), min(ys), min(zs)), (max(xs), max(ys), max(zs))

    def dims(self) -> Cell:
        lo, hi = self.bounds()
        return (hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1)

    def sorted_cells(self) -> tuple[Cell, ...]:
        return tuple(sorted(self.cells))


def _is_face_connected(cells: frozenset[Cell]) -> bool:
    start = next(iter(cells))
    seen = {start}
    stack = [start]
    while stack:
        x, y, z = stack.pop()
        for dx, dy, dz in _NEIGHBOR_OFFSETS:
            n = (x + dx, y + dy, z + dz)
            if n in cells and n not in seen:
                seen.add(n)
                stack.append(n)
    return len(seen) == len(cells)


def normalize_polycube(p: Polycube) -> Polycube:
    """Translate so the minimum corner sits at (0, 0, 0)."""
    (x0, y0, z0), _ = p.bounds()
    return Polycube(frozenset((x - x0, y - y0, z - z0) for x, y, z in p.cells))


def rotate_polycube(p: Polycube, rot: GridRotation) -> Polycube:
    return normalize_polycube(
        Polycube(frozenset(rotate_cell(rot, c) for c in p.cells))
    )


def mirror(p: Polycube) -> Polycube:
    """Reflect across a plane of constant x, then normalize."""
    return normalize_polycube(Polycube(frozenset((-x, y, z) for x, y, z in p.cells)))


def rotation_equivalent(a: Polycube, b: Polycube) -> bool:
    """True when some proper 24-group rotation carries a onto b (translation-free)."""
    if a.size != b.size:
        return False
    target = normalize_polycube(b).cells
    for rot in canonical_orientations():
        if rotate_polycube(a, rot).cells == target:
            return True
    return False


def canonical_form(p: Polycube) -> tuple[Cell, ...]:
    """A rotation-invariant key: lexicographic minimum over all 24 orientations."""
    return min(rotate_polycube(p, rot).sorted_cells() for rot in canonical_orientations())


def is_chiral(p: Polycube) -> bool:
    """True when no proper rotation maps the shape onto its mirror image."""
    return not rotation_equivalent(p, mirror(p))


def polycube_to_text(p: Polycube) -> str:
    """Canonical text form: one 'x,y,z' line per cell, lexicographically sorted."""
    return "\n".join(f"{x},{y},{z}" for x, y, z in p.sorted_cells()) + "\n"


def polycube_from_text(text: str) -> Polycube:
    cells = []
    for i, line in enumerate(text.splitlines()):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ValueError(f"line {i + 1}: expected 'x,y,z', got {line!r}")
        try:
            cells.append(tuple(int(v) for v in parts))
        except ValueError as exc:
            raise ValueError(f"line {i + 1}: {exc}") from None
    if not cells:
        raise ValueError("no cells in polycube text")
    return Polycube.from_cells(cells)


def enumerate_polycubes(max_cells: int) -> Iterator[Polycube]:
    """All fixed polycubes (distinct up to translation) with <= max_cells cells."""
    seen: set[frozenset[Cell]] = set()
    layer = [normalize_polycube(Polycube(frozenset([(0, 0, 0)])))]
    for p in layer:
        seen.add(p.cells)
        yield p
    for _ in range(max_cells - 1):
        nxt = []
        for p in layer:
            for x, y, z in p.cells:
                for dx, dy, dz in _NEIGHBOR_OFFSETS:
                    n = (x + dx, y + dy, z + dz)
                    if n in p.cells:
                        continue
                    q = normalize_polycube(Polycube(p.cells | {n}))
                    if q.cells not in seen:
                        seen.add(q.cells)
                        nxt.append(q)
                        yield q
        layer = nxt
