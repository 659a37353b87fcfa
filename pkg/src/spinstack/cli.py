"""`bench` command-line interface.

Subcommands: forge, sweeps, run, probes, verify-euler, report, serve.
Run configs are JSON files; secrets (API tokens) come only from environment
variables named in the config, never from the config file itself.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .forge import (
    DEFAULT_PROBLEM_COUNT,
    DEFAULT_SET_SEED,
    SweepSpec,
    forge_problem_set,
    load_problem_set,
    load_sweep_dataset,
    make_sweep_dataset,
    probe_objects,
    save_problem_set,
    save_sweep_dataset,
)
from .geometry import EulerAnglesDeg
from .harness import (
    RunConfig,
    build_agent,
    emit_report,
    probe_agent_adapter,
    run_benchmark,
    run_euler_verification,
    run_probe_eval,
    score_transcripts,
    truth_probe_predictor,
)
from .loop import LoopConfig, load_transcript


@click.group()
def main():
    """Deterministic mental-rotation benchmark tools."""


@main.command()
@click.option("--seed", default=DEFAULT_SET_SEED, show_default=True, type=int)
@click.option("--count", default=DEFAULT_PROBLEM_COUNT, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path(file_okay=False))
def forge(seed: int, count: int, out: str):
    """Generate a problem set and save it as a dataset directory."""
    problem_set = forge_problem_set(seed=seed, count=count)
    checksum = save_problem_set(problem_set, out)
    click.echo(f"forged {count} problems (seed {seed}) into {out}")
    click.echo(f"checksum {checksum}")


@main.command()
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--objects", default=3, show_default=True, type=int)
@click.option("--seed", default=1, show_default=True, type=int)
@click.option("--step", default=30, show_default=True, type=int)
def sweeps(out: str, objects: int, seed: int, step: int):
    """Generate a sweep probe dataset (before/after pairs per axis and angle)."""
    spec = SweepSpec(step_deg=step)
    pairs = []
    for i, shape in enumerate(probe_objects(count=objects, seed=seed)):
        pairs.extend(make_sweep_dataset(shape, spec, id_prefix=f"obj{i}_"))
    checksum = save_sweep_dataset(pairs, out)
    click.echo(f"saved {len(pairs)} probe pairs into {out}")
    click.echo(f"checksum {checksum}")


def _load_or_forge(config: dict):
    if config.get("dataset"):
        return load_problem_set(config["dataset"])
    return forge_problem_set(
        seed=config.get("seed", DEFAULT_SET_SEED),
        count=config.get("count", DEFAULT_PROBLEM_COUNT),
    )


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
def run(config_path: str):
    """Run a benchmark from a JSON config file."""
    config = json.loads(Path(config_path).read_text())
    problem_set = _load_or_forge(config)
    run_config = RunConfig(
        agent=config["agent"],
        condition=config.get("condition", "C3-incremental"),
        n_runs=config.get("n_runs", 1),
        seed=config.get("seed"),
        loop_overrides=tuple(config.get("loop", {}).items()),
    )
    loop_config = run_config.loop_config()

    def agent_factory():
        return build_agent(
            run_config.agent,
            problem_set=problem_set,
            loop_config=loop_config,
            remote=config.get("remote"),
        )

    report = run_benchmark(
        problem_set,
        agent_factory,
        run_config,
        transcript_root=config.get("transcripts"),
    )
    fmt = config.get("report", {}).get("format", "markdown")
    payload = emit_report(report, fmt)
    out = config.get("report", {}).get("out")
    if out:
        Path(out).write_bytes(payload)
        click.echo(f"report written to {out}")
    else:
        click.echo(payload.decode("utf-8"))


@main.command()
@click.option("--agent", "agent_name", default="truth", show_default=True,
              help="'truth' replays ground truth; 'remote' queries the configured endpoint")
@click.option("--pairs", "pairs_dir", default=None, type=click.Path(file_okay=False),
              help="sweep dataset directory (generated on the fly when omitted)")
@click.option("--remote-config", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", default="markdown", show_default=True)
@click.option("--out", default=None, type=click.Path(dir_okay=False))
def probes(agent_name: str, pairs_dir: str | None, remote_config: str | None,
           fmt: str, out: str | None):
    """Run the rotation-detection probe suite."""
    if pairs_dir:
        pairs = load_sweep_dataset(pairs_dir)
    else:
        pairs = []
        for i, shape in enumerate(probe_objects()):
            pairs.extend(make_sweep_dataset(shape, SweepSpec(), id_prefix=f"obj{i}_"))
    if agent_name == "truth":
        predictor = truth_probe_predictor
    elif agent_name == "remote":
        if not remote_config:
            raise click.UsageError("--remote-config is required with --agent remote")
        remote = json.loads(Path(remote_config).read_text())
        agent = build_agent("remote", loop_config=LoopConfig(), remote=remote)
        predictor = probe_agent_adapter(agent)
    else:
        raise click.UsageError(f"unknown probe agent {agent_name!r}")
    report = run_probe_eval(pairs, predictor, provenance={"agent": agent_name})
    payload = emit_report(report, fmt)
    if out:
        Path(out).write_bytes(payload)
        click.echo(f"report written to {out}")
    else:
        click.echo(payload.decode("utf-8"))


@main.command("verify-euler")
@click.option("--pairs", "pairs_dir", required=True, type=click.Path(file_okay=False))
@click.option("--preds", "preds_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--tolerance", default=0.01, show_default=True, type=float)
@click.option("--format", "fmt", default="markdown", show_default=True)
@click.option("--out", default=None, type=click.Path(dir_okay=False))
def verify_euler(pairs_dir: str, preds_path: str, tolerance: float,
                 fmt: str, out: str | None):
    """Verify predicted Euler angles against a sweep dataset by re-rendering."""
    pairs = load_sweep_dataset(pairs_dir)
    doc = json.loads(Path(preds_path).read_text())
    table = doc.get("predictions", doc)
    predictions = {}
    for pair_id, values in table.items():
        if not isinstance(values, (list, tuple)) or len(values) != 3:
            raise click.UsageError(
                f"prediction for {pair_id!r} must be [pitch, yaw, roll]"
            )
        predictions[pair_id] = EulerAnglesDeg(*(float(v) for v in values))
    report = run_euler_verification(pairs, predictions, tol=tolerance)
    payload = emit_report(report, fmt)
    if out:
        Path(out).write_bytes(payload)
        click.echo(f"report written to {out}")
    else:
        click.echo(payload.decode("utf-8"))
    click.echo(
        f"match {report.matches}  mirror {report.mirrors}  fail {report.fails}"
    )


@main.command()
@click.option("--format", "fmt", default="markdown", show_default=True)
@click.option("--in", "in_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="a JSON report to re-emit in another format")
@click.option("--transcripts", default=None, type=click.Path(file_okay=False),
              help="directory of transcript directories to score")
@click.option("--dataset", default=None, type=click.Path(file_okay=False),
              help="dataset directory (required with --transcripts)")
@click.option("--out", default=None, type=click.Path(dir_okay=False))
def report(fmt: str, in_path: str | None, transcripts: str | None,
           dataset: str | None, out: str | None):
    """Re-emit a saved report, or score recorded transcripts."""
    if in_path:
        doc = json.loads(Path(in_path).read_text())
        payload = emit_report(doc, fmt)
    elif transcripts:
        if not dataset:
            raise click.UsageError("--dataset is required with --transcripts")
        problem_set = load_problem_set(dataset)
        docs = []
        root = Path(transcripts)
        for path in sorted(root.glob("**/transcript.json")):
            docs.append(load_transcript(path.parent))
        summary = score_transcripts(problem_set, docs)
        payload = json.dumps(summary, indent=2, sort_keys=True).encode("utf-8")
    else:
        raise click.UsageError("pass --in or --transcripts")
    if out:
        Path(out).write_bytes(payload)
        click.echo(f"written to {out}")
    else:
        click.echo(payload.decode("utf-8"))


@main.command()
@click.option("--dataset", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8787, show_default=True, type=int)
@click.option("--read-only", is_flag=True, default=False)
@click.option("--answers", default=None, type=click.Path(dir_okay=False),
              help="JSONL file to append human answer records to")
@click.option("--ui", default=None, type=click.Path(file_okay=False),
              help="built UI directory to serve at /ui (default: ./frontend/dist)")
def serve(dataset: str, host: str, port: int, read_only: bool,
          answers: str | None, ui: str | None):
    """Serve the studio HTTP API (and the UI when frontend/dist exists)."""
    import uvicorn

    from .service import create_app

    app = create_app(dataset, read_only=read_only, answers_path=answers, ui_dir=ui)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
