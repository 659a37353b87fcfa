"""
Studio service: the HTTP surface for play and pose calibration
==============================================================

The same sessions that agents drive are exposed over JSON + PNG endpoints
under /v1, plus a calibration workflow that nudges a stored pose, previews
the result, and commits it back into the dataset with a fresh checksum.
This walkthrough drives the app in process; `bench serve` runs it for real.
"""

import json
import shutil
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from spinstack.forge import forge_problem_set, save_problem_set
from spinstack.service import create_app

# A tiny dataset on disk, so calibration commits have somewhere to persist.
root = Path(tempfile.mkdtemp(prefix="spinstack-demo-")) / "dataset"
save_problem_set(forge_problem_set(seed=11, count=2), root)
print("dataset at", root)

app = create_app(root)
client = TestClient(app)

# Problems are listed without their answer key.
listing = client.get("/v1/problems").json()
print("problems:", [p["id"] for p in listing["problems"]])
pid = listing["problems"][0]["id"]

# A session serializes its first context exactly as an agent would see it.
session = client.post("/v1/sessions", json={"problem_id": pid}).json()
sid = session["session_id"]
print("session", sid, "config min_iterations =", session["config"]["min_iterations"])

# The commands endpoint is the human-friendly path: one target, one
# sequence, and the labeled snapshot grid comes straight back as PNG.
response = client.post(f"/v1/sessions/{sid}/commands",
                       json={"target": "A", "sequence": "right:30,up:15"})
print("commands ->", response.headers["content-type"],
      f"({len(response.content)} bytes), iteration",
      response.headers["x-iteration"])

# Bad grammar is a 422 with the offending token, not a crashed session.
bad = client.post(f"/v1/sessions/{sid}/commands",
                  json={"target": "A", "sequence": "cw"})
print("bad grammar ->", bad.status_code, bad.json()["detail"]["error"][:56], "...")

# Answers are scored against the exact oracle and aggregated.
answer = client.post(f"/v1/sessions/{sid}/answer", json={"answer": "B"}).json()
print("answered:", answer["status"], "| correct:", answer["correct"])
print("aggregate:", client.get("/v1/answers").json())

# Calibration: nudge a stored pose, preview it, then commit.  The commit
# rewrites the affected images and manifest atomically and logs the change.
started = client.post("/v1/calibration/start",
                      json={"problem_id": pid, "object": "A"}).json()
cid = started["calibration_id"]
client.post(f"/v1/calibration/{cid}/nudge", json={"command": "left:5"})
state = client.get(f"/v1/calibration/{cid}").json()
print("\ncalibration dirty after nudge:", state["dirty"])
committed = client.post(f"/v1/calibration/{cid}/commit",
                        json={"author": "demo"}).json()
print("committed pose:", [round(v, 4) for v in committed["pose"]])
print("new dataset checksum:", committed["checksum"][:16], "...")
print("audit log:", (root / "calibration.jsonl").read_text().strip()[:96], "...")

# New sessions see the committed pose immediately.
fresh = client.post("/v1/sessions", json={"problem_id": pid}).json()
snap = client.get(f"/v1/sessions/{fresh['session_id']}/objects/A/snapshot")
print("fresh snapshot bytes:", len(snap.content))

shutil.rmtree(root.parent)
