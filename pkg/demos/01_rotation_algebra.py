"""
Rotation algebra: poses, camera commands, and the 24-element grid group
=======================================================================

Everything the rest of the package does rests on three small ideas: unit
quaternion poses, viewer-frame rotation commands, and the finite group of
axis-aligned grid rotations.  This script walks through each one.
"""

from spinstack.geometry import (
    IDENTITY_ROTATION,
    Pose,
    apply_camera_rotation,
    canonical_orientations,
    compose_rotations,
    inverse_command,
    rotation_pose,
)
from spinstack.protocol import parse_command, parse_sequence

# A pose is a unit quaternion.  The identity pose leaves the object in its
# build frame; from_axis_angle gives us arbitrary orientations.
identity = Pose.identity()
tilted = Pose.from_axis_angle((0.0, 1.0, 0.0), 30.0)
print("identity pose:", identity)
print("30 degrees about +y:", tilted)

# Commands are spelled in the viewer's frame: left/right orbit horizontally,
# up/down vertically, rotate:cw/ccw roll about the viewing axis.
cmd = parse_command("left:30")
print("\nparsed command:", cmd)

# Twelve 30-degree steps walk all the way around and come home.
pose = tilted
for _ in range(12):
    pose = apply_camera_rotation(pose, cmd)
print("12x left:30 returns to start:", pose.approx_equal(tilted, 1e-9))

# Every command has an exact inverse: same angle, opposite direction.
for text in ("left:45", "up:17.5", "rotate:cw:90"):
    c = parse_command(text)
    back = apply_camera_rotation(apply_camera_rotation(tilted, c), inverse_command(c))
    print(f"{text:>14} then {inverse_command(c).surface():<15} cancels:",
          back.approx_equal(tilted, 1e-9))

# Sequences compose left to right in the viewer frame, so "left:90,up:90"
# means: orbit left first, then up from the new viewpoint.
pose = identity
for c in parse_sequence("left:90,up:90"):
    pose = apply_camera_rotation(pose, c)
print("\nafter left:90,up:90:", pose)

# A cube on the grid has exactly 24 orientations that keep it on the grid.
# canonical_orientations() enumerates them as integer rotation matrices.
group = canonical_orientations()
print("\ngrid rotation group size:", len(group))
print("identity element:", IDENTITY_ROTATION)

# The group is closed: composing any two members lands on a third.
closed = all(compose_rotations(a, b) in set(group) for a in group for b in group)
print("closed under composition:", closed)

# Each integer rotation lifts to an exact pose, which is how the forge turns
# group elements into camera orientations.
sample = group[5]
print("group element", sample, "as a pose:", rotation_pose(sample))
