"""Shared schema/behavior suite that any protocol server must pass.

Inference shims import this to prove wire compatibility; the suite drives a
fixed, deterministic request set so stub servers can additionally be compared
byte-for-byte against a mock serving the same script.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from ..errors import MotionCurateError
from .protocol import (
    ENDPOINT_KINDS,
    canonical_json,
    encode_frame,
    validate_envelope,
    validate_response_payload,
)

SendFn = Callable[[str, dict[str, Any]], dict[str, Any]]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ConformanceReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failing(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]


def probe_frame(frame_index: int = 0) -> dict[str, Any]:
    """Small deterministic frame payload used by every conformance request."""
    raster = (np.arange(4 * 4 * 3, dtype=np.uint8) * 7 % 251).reshape(4, 4, 3)
    return encode_frame(raster, frame_index)


def conformance_requests() -> list[tuple[str, dict[str, Any]]]:
    """The fixed (endpoint, payload) sequence the suite sends, in order."""
    frame = probe_frame()
    box = [0.25, 0.25, 0.75, 0.75]
    return [
        ("describe", {"frame": frame}),
        ("ground", {"frame": frame, "class_name": "cup"}),
        ("persons", {"frame": frame}),
        ("pose", {"frame": frame, "person_box": box}),
        ("hands", {"frame": frame}),
        ("camera_poses", {"frames": [frame, probe_frame(1)]}),
        ("track_register", {"session_id": "conformance", "entity_id": 1000, "frame_index": 0, "box": box}),
        ("track_advance", {"session_id": "conformance", "frame_index": 1}),
        ("track_advance", {"session_id": "conformance", "frame_index": 2}),
        ("track_advance", {"session_id": "conformance", "frame_index": 3}),
        ("llm", {"prompt": "conformance probe prompt", "frames": [frame], "overlay": None}),
        ("judge", {"prompt": "conformance probe prompt"}),
        ("answer", {"prompt": "conformance probe prompt", "frames": []}),
    ]


def run_conformance(send: SendFn, *, expect_static_tracker: bool = False) -> ConformanceReport:
    """Exercise every endpoint; validate schemas, id echo, and tracker behavior."""
    report = ConformanceReport()
    advance_boxes: list[dict[str, Any]] = []
    registered_box = None

    for i, (endpoint, payload) in enumerate(conformance_requests()):
        name = f"{endpoint}[{i}]"
        request_id = f"conf-{i:04d}"
        envelope = {"endpoint": endpoint, "request_id": request_id, "payload": payload}
        try:
            reply = send(endpoint, envelope)
            validate_envelope(reply, direction="response")
            if reply["request_id"] != request_id:
                raise MotionCurateError(f"request id not echoed: {reply['request_id']!r}")
            validate_response_payload(endpoint, reply["payload"])
        except Exception as exc:
            report.checks.append(CheckResult(name, False, f"{type(exc).__name__}: {exc}"))
            continue
        report.checks.append(CheckResult(name, True))
        if endpoint == "track_register":
            registered_box = payload["box"]
        if endpoint == "track_advance":
            advance_boxes.append(reply["payload"]["boxes"])

    tracked = all("1000" in boxes and boxes["1000"] is not None for boxes in advance_boxes)
    report.checks.append(
        CheckResult(
            "tracker_keeps_registered_entity",
            bool(advance_boxes) and tracked,
            "" if tracked else f"entity missing from advance replies: {advance_boxes}",
        )
    )
    if expect_static_tracker:
        static = bool(advance_boxes) and all(
            boxes.get("1000") == registered_box for boxes in advance_boxes
        )
        report.checks.append(
            CheckResult(
                "tracker_static_boxes_constant",
                static,
                "" if static else f"expected {registered_box} at every frame: {advance_boxes}",
            )
        )
    for kind in ENDPOINT_KINDS:
        if not any(c.name.startswith(kind) for c in report.checks):
            report.checks.append(CheckResult(f"{kind}[coverage]", False, "endpoint never probed"))
    return report


def response_fingerprint(send: SendFn) -> list[str]:
    """Canonical response payloads for the fixed request set; used for mock parity."""
    lines = []
    for i, (endpoint, payload) in enumerate(conformance_requests()):
        envelope = {"endpoint": endpoint, "request_id": f"fp-{i:04d}", "payload": payload}
        reply = send(endpoint, envelope)
        lines.append(canonical_json({"endpoint": endpoint, "payload": reply["payload"]}))
    return lines
