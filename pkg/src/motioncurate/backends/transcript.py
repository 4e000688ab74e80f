"""Record/replay of backend sessions as line-delimited JSON transcripts."""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Any

from ..errors import ReplayMiss
from .protocol import canonical_json, request_hash


class RecordingTransport:
    """Wraps a live transport and appends every exchange to a transcript file.

    Lines are written whole under a lock, so concurrent workers never interleave
    records (their order across workers is still scheduling-dependent).
    """

    def __init__(self, inner, path: Path):
        self.inner = inner
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = self.path.open("a", encoding="utf-8")
        self._lock = threading.Lock()

    def send(self, endpoint: str, envelope: dict[str, Any]) -> dict[str, Any]:
        reply = self.inner.send(endpoint, envelope)
        record = {
            "endpoint": endpoint,
            "request_hash": request_hash(endpoint, envelope["payload"]),
            "request": envelope["payload"],
            "response": reply["payload"],
        }
        with self._lock:
            self._fh.write(canonical_json(record) + "\n")
            self._fh.flush()
        return reply

    def close(self) -> None:
        self._fh.close()


class ReplayTransport:
    """Serves responses from a transcript keyed by request hash; no network."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self._by_key: dict[tuple[str, str], dict[str, Any]] = {}
        for line in self.path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            record = json.loads(line)
            self._by_key[(record["endpoint"], record["request_hash"])] = record["response"]

    def send(self, endpoint: str, envelope: dict[str, Any]) -> dict[str, Any]:
        key = (endpoint, request_hash(endpoint, envelope["payload"]))
        if key not in self._by_key:
            raise ReplayMiss(f"no transcript entry for {endpoint} hash {key[1][:12]}")
        return {"request_id": envelope["request_id"], "payload": self._by_key[key]}


def load_transcript(path: Path) -> list[dict[str, Any]]:
    """All transcript records in call order."""
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            records.append(json.loads(line))
    return records
