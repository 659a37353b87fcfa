"""
Problem forge: audited odd-one-out puzzles from a seed
======================================================

Each problem shows an original object plus three options A, B, C.  Exactly
one option cannot be reached from the original by rotation alone; the other
two are true rotations.  The forge proves that property for every problem it
emits, so the answer key is exact rather than intended.
"""

from pathlib import Path

from spinstack.forge import (
    forge_problem_set,
    load_problem_set,
    problem_image,
    save_problem_set,
)
from spinstack.geometry import is_chiral, rotation_equivalent
from spinstack.render import encode_png

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

# Forging is deterministic: the same seed always yields the same problems,
# the same poses, and the same images.
problem_set = forge_problem_set(seed=11, count=6)
print("forged", len(problem_set), "problems from seed", problem_set.seed)

for problem in problem_set:
    original = problem.shape("original")
    verdicts = {
        label: rotation_equivalent(original, problem.shape(label))
        for label in ("A", "B", "C")
    }
    kind = "mirror" if is_chiral(original) else "different shape"
    print(f"  {problem.id}: {len(original.cells)} cells, odd={problem.odd} ({kind}),"
          f" rotations={[l for l, v in verdicts.items() if v]}")

# The composed strip (original plus options under label banners) is what a
# session shows on its first turn.
first = problem_set.problems[0]
strip = problem_image(first)
(out / f"{first.id}.png").write_bytes(encode_png(strip))
print("\nwrote", out / f"{first.id}.png", f"({strip.width} x {strip.height})")

# Saving writes cells, poses, images, and a checksummed manifest; loading
# re-verifies every byte, so silent corruption cannot sneak past.
dataset = out / "demo_dataset"
if dataset.exists():
    import shutil

    shutil.rmtree(dataset)
save_problem_set(problem_set, dataset)
reloaded = load_problem_set(dataset)
print("saved and reloaded, checksum", reloaded.checksum[:16], "...")
print("round trip kept every answer:",
      [p.odd for p in reloaded] == [p.odd for p in problem_set])

# Flip one byte inside a stored image and the loader refuses the dataset.
victim = sorted(dataset.glob("images/*.png"))[0]
blob = bytearray(victim.read_bytes())
blob[60] ^= 0xFF
victim.write_bytes(bytes(blob))
try:
    load_problem_set(dataset)
    print("tampering went unnoticed (this should not happen)")
except Exception as exc:
    print("tampered dataset rejected:", type(exc).__name__, "-", str(exc)[:80])
