#!/usr/bin/env python3
"""End-to-end demo: curate two synthetic videos against mock backends twice and
show that the output trees are byte-identical."""

import argparse
import hashlib
import tempfile
from pathlib import Path

from motioncurate.backends.client import BackendClient
from motioncurate.backends.mock import MockScript, MockTransport
from motioncurate.backends.transcript import RecordingTransport
from motioncurate.core import PipelineConfig
from motioncurate.demo import write_demo_workspace
from motioncurate.pipeline import curate_run


def digest_tree(out_dir: Path) -> dict[str, str]:
    return {
        f.name: hashlib.sha256(f.read_bytes()).hexdigest()[:16]
        for f in sorted(out_dir.iterdir())
        if f.is_file()
    }


def one_run(root: Path, seed: int) -> dict[str, str]:
    paths = write_demo_workspace(root)
    transport = RecordingTransport(
        MockTransport(MockScript.load(paths["script"])), root / "logs" / "transcript.jsonl"
    )
    client = BackendClient(transport)
    manifest = curate_run(paths["videos"], root / "out", PipelineConfig(seed=seed), client)
    for video_id, record in sorted(manifest.videos.items()):
        print(f"  {video_id}: {record.status}")
    return digest_tree(root / "out")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--root", type=Path, default=None, help="workspace (default: temp dir)")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()
    root = args.root or Path(tempfile.mkdtemp(prefix="motioncurate-demo-"))

    print("first run:")
    first = one_run(root / "run1", args.seed)
    print("second run:")
    second = one_run(root / "run2", args.seed)

    print("\noutput tree:")
    for name, digest in first.items():
        match = "==" if second.get(name) == digest else "!!"
        print(f"  {match} {digest}  {name}")
    identical = first == second
    print(f"\nbyte-identical across runs: {identical}")
    print(f"workspace kept at: {root}")
    raise SystemExit(0 if identical else 1)


if __name__ == "__main__":
    main()
