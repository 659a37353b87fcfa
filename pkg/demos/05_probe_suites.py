"""
Probe suites: rotation perception sweeps and Euler verification
===============================================================

Beyond full puzzles, the harness ships two controlled diagnostics.  The
sweep dataset renders one object before and after a single known rotation
at 30-degree increments, and two scorers grade predictions against it:
a direction/angle probe scorer and an Euler-angle verifier that also
recognizes mirrored (sign-flipped) estimates.
"""

from pathlib import Path

from spinstack.forge import (
    SweepSpec,
    euler_for_command,
    make_sweep_dataset,
    probe_objects,
)
from spinstack.geometry import EulerAnglesDeg
from spinstack.harness import (
    emit_report,
    parse_probe_reply,
    run_euler_verification,
    run_probe_eval,
    verify_euler_prediction,
)

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

# Three distinct probe objects, each swept through 3 directions x 12 angles.
objects = probe_objects(count=3, seed=1)
pairs = []
for i, shape in enumerate(objects):
    pairs.extend(make_sweep_dataset(shape, SweepSpec(), id_prefix=f"obj{i}_"))
print("sweep pairs:", len(pairs), "(first id:", pairs[0].id + ")")

# Each pair is a before/after PNG plus the command that separates them.
pair = pairs[1]
print("example pair:", pair.id, "command =", pair.command.surface())

# The probe scorer reads free-text replies: the first comma-separated
# component is graded, and prose like "clockwise by 60" still parses.
for reply in ("right:30", "rotated clockwise by 60 degrees", "up"):
    parsed = parse_probe_reply(reply)
    print(f"  reply {reply!r} -> direction={parsed.direction} angle={parsed.angle}")

# A predictor that reads the ground truth scores a perfect card; anything
# real lands somewhere below it.
def truth_predictor(p):
    return p.command.surface()

report = run_probe_eval(pairs, truth_predictor, provenance={"agent": "truth"})
print("\ntruth predictor direction accuracy:", report.direction_accuracy)
print("truth predictor angle MAE:", report.angle_mae)

(out / "probe_report.md").write_bytes(emit_report(report, "markdown"))
print("wrote", out / "probe_report.md")

# The Euler verifier classifies a predicted (pitch, yaw, roll) against the
# true relative rotation: match, mirror, or fail.
truth = {p.id: euler_for_command(p.command) for p in pairs}
euler_report = run_euler_verification(pairs, truth)
print("\neuler verification with ground truth:",
      euler_report.matches, "match /", euler_report.mirrors, "mirror /",
      euler_report.fails, "fail")

# Sign-flipped predictions are the classic mirrored-perception signature.
flipped_pair = next(p for p in pairs if p.command.angle % 360.0 not in (0.0, 180.0))
e = truth[flipped_pair.id]
mirrored = EulerAnglesDeg(-e.pitch_deg, -e.yaw_deg, -e.roll_deg)
print("sign-flipped estimate classifies as:",
      verify_euler_prediction(flipped_pair, mirrored))

(out / "euler_report.json").write_bytes(emit_report(euler_report, "json"))
print("wrote", out / "euler_report.json")
