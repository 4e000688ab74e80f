"""Command-line entry points wiring the pipeline end to end."""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .backends.client import BackendClient, CallPolicy, HttpTransport
from .backends.mock import MockScript, MockTransport
from .backends.transcript import RecordingTransport, ReplayTransport
from .config import RunSettings, load_config
from .errors import MotionCurateError

logger = logging.getLogger(__name__)


def _build_client(
    settings: RunSettings,
    mock_dir: Path | None,
    transcript_dir: Path | None,
    replay_file: Path | None = None,
) -> BackendClient:
    if replay_file is not None:
        transport = ReplayTransport(replay_file)
    elif mock_dir is not None:
        script_path = Path(mock_dir)
        if script_path.is_dir():
            script_path = script_path / "mock_script.json"
        transport = MockTransport(MockScript.load(script_path))
    elif settings.backend_url:
        transport = HttpTransport(settings.backend_url, token=settings.backend_token)
    else:
        raise click.UsageError("no backend: set backend_url in the config or pass --mock/--replay")
    if transcript_dir is not None:
        transport = RecordingTransport(transport, Path(transcript_dir) / "transcript.jsonl")
    policy = CallPolicy(
        retries=settings.pipeline.retry_limit, max_in_flight=settings.pipeline.max_in_flight
    )
    return BackendClient(transport, policy)


_shared = [
    click.option("--config", "config_path", type=click.Path(path_type=Path), default=None),
    click.option("--seed", type=int, default=None, help="Override the config seed."),
    click.option("--mock", "mock_dir", type=click.Path(path_type=Path), default=None,
                 help="Directory with mock_script.json (or a script file) serving all backends."),
    click.option("--transcript", "transcript_dir", type=click.Path(path_type=Path), default=None,
                 help="Record every backend exchange under this directory."),
]


def _with_shared(fn):
    for option in reversed(_shared):
        fn = option(fn)
    return fn


@click.group()
@click.option("-v", "--verbose", is_flag=True)
def main(verbose: bool) -> None:
    """Motion-annotation dataset curation and evaluation."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command()
@click.argument("video_dir", type=click.Path(exists=True, path_type=Path))
@_with_shared
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None)
@click.option("--workers", type=int, default=None)
@click.option("--resume", is_flag=True, help="Skip stages already completed under this config.")
def curate(video_dir, config_path, seed, mock_dir, transcript_dir, out_dir, workers, resume):
    """Run the full annotation pipeline over a directory of videos."""
    from .pipeline import curate_run

    settings = load_config(config_path, {"seed": seed, "workers": workers})
    client = _build_client(settings, mock_dir, transcript_dir)
    out = Path(out_dir) if out_dir else Path(settings.output_dir)
    manifest = curate_run(
        video_dir,
        out,
        settings.pipeline,
        client,
        model_tag=settings.model_tag,
        workers=settings.workers,
        resume=resume,
    )
    done = sum(1 for r in manifest.videos.values() if r.status == "done")
    excluded = sum(1 for r in manifest.videos.values() if r.status == "excluded")
    failed = sum(1 for r in manifest.videos.values() if r.status == "failed")
    click.echo(f"curated {done} videos ({excluded} excluded, {failed} failed) -> {out}")
    for video_id, record in sorted(manifest.videos.items()):
        if record.status != "done":
            click.echo(f"  {video_id}: {record.status} {record.failure or ''}")


@main.command()
@click.argument("dataset_dir", type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_file", type=click.Path(path_type=Path), default=None)
def stats(dataset_dir, out_file):
    """Dataset statistics over qa.jsonl plus the run manifest's video durations."""
    from .evaluate import dataset_stats, load_qa_jsonl
    from .pipeline import RunManifest

    dataset_dir = Path(dataset_dir)
    items = load_qa_jsonl(dataset_dir / "qa.jsonl")
    durations = {}
    manifest_path = dataset_dir / "manifest.json"
    if manifest_path.exists():
        manifest = RunManifest.load(manifest_path)
        for video_id, record in manifest.videos.items():
            sampled = record.stages.get("sampled")
            if sampled:
                durations[video_id] = float(sampled["t_s"])
    if not durations:
        durations = {vid: 0.0 for vid in {item.video_id for item in items}}
        raise click.ClickException("no video durations found: run stats on a curate output dir")
    report = dataset_stats(items, durations)
    text = json.dumps(report.to_payload(), indent=2) + "\n"
    if out_file:
        Path(out_file).write_text(text, "utf-8")
    click.echo(text)


@main.command("eval")
@click.argument("qa_file", type=click.Path(exists=True, path_type=Path))
@_with_shared
@click.option("--name", default=None, help="Benchmark name in the report.")
@click.option("--out", "out_file", type=click.Path(path_type=Path), default=None)
def eval_cmd(qa_file, config_path, seed, mock_dir, transcript_dir, name, out_file):
    """Run a model backend over a QA file and report accuracy."""
    from .evaluate import format_accuracy_table, load_benchmark_file, load_qa_jsonl, run_benchmark

    settings = load_config(config_path, {"seed": seed})
    client = _build_client(settings, mock_dir, transcript_dir)
    qa_file = Path(qa_file)
    items = (
        load_qa_jsonl(qa_file) if qa_file.suffix == ".jsonl" else load_benchmark_file(qa_file)
    )
    run = run_benchmark(items, client, name=name or qa_file.stem)
    if out_file:
        Path(out_file).write_text(json.dumps(run.to_payload(), indent=2) + "\n", "utf-8")
    click.echo(format_accuracy_table([run]))


@main.command()
@click.argument("qa_a", type=click.Path(exists=True, path_type=Path))
@click.argument("qa_b", type=click.Path(exists=True, path_type=Path))
@_with_shared
@click.option("--runs", type=int, default=3, show_default=True)
def judge(qa_a, qa_b, config_path, seed, mock_dir, transcript_dir, runs):
    """Compare two QA sets with the judge backend, averaged over several runs."""
    from .evaluate import QUALITY_DIMENSIONS, judge_qa_quality, load_qa_jsonl

    settings = load_config(config_path, {"seed": seed})
    client = _build_client(settings, mock_dir, transcript_dir)
    score_a, score_b = judge_qa_quality(
        load_qa_jsonl(qa_a), load_qa_jsonl(qa_b), client, runs=runs
    )
    width = max(len(d) for d in QUALITY_DIMENSIONS)
    click.echo(f"{'Evaluation Dimension':<{width}}  {'Set A':>6}  {'Set B':>6}  {'Gain':>6}")
    for dimension in QUALITY_DIMENSIONS:
        a = getattr(score_a, dimension)
        b = getattr(score_b, dimension)
        click.echo(f"{dimension:<{width}}  {a:>6.1f}  {b:>6.1f}  {b - a:>+6.1f}")


@main.command("validate-schema")
@click.argument("paths", nargs=-1, type=click.Path(exists=True, path_type=Path))
def validate_schema(paths):
    """Validate motion annotation documents against the published schema."""
    from .annotate import parse_motion_json, validate_motion_document

    failures = 0
    for path in paths:
        try:
            validate_motion_document(parse_motion_json(Path(path).read_bytes()))
            click.echo(f"{path}: ok")
        except MotionCurateError as exc:
            failures += 1
            click.echo(f"{path}: INVALID - {exc}")
    if failures:
        raise click.ClickException(f"{failures} document(s) failed validation")


@main.command()
@click.argument("video_dir", type=click.Path(exists=True, path_type=Path))
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--transcript-file", type=click.Path(exists=True, path_type=Path), required=True,
              help="Transcript recorded by a previous run; responses served by request hash.")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None)
def replay(video_dir, config_path, seed, transcript_file, out_dir):
    """Re-run curation offline, serving backend replies from a transcript."""
    from .pipeline import curate_run

    settings = load_config(config_path, {"seed": seed})
    client = _build_client(settings, None, None, replay_file=Path(transcript_file))
    out = Path(out_dir) if out_dir else Path(settings.output_dir)
    manifest = curate_run(
        video_dir, out, settings.pipeline, client, model_tag=settings.model_tag, workers=1
    )
    done = sum(1 for r in manifest.videos.values() if r.status == "done")
    click.echo(f"replayed {done}/{len(manifest.videos)} videos -> {out}")


if __name__ == "__main__":
    sys.exit(main())
