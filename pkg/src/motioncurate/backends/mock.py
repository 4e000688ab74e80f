"""Deterministic scripted stand-ins for every model service."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..errors import MockScriptExhausted, SchemaError, TransientBackendError
from .protocol import ENDPOINT_PATHS, request_hash


@dataclass
class EndpointScript:
    """One endpoint's behavior: ordered responses, hash-keyed responses, or a rule.

    fail_first injects that many transient failures before normal service,
    for exercising retry paths.
    """

    responses: list[dict[str, Any]] | None = None
    by_hash: dict[str, dict[str, Any]] | None = None
    rule: dict[str, Any] | None = None
    fail_first: int = 0

    def __post_init__(self) -> None:
        modes = [m for m in (self.responses, self.by_hash, self.rule) if m is not None]
        if len(modes) != 1:
            raise ValueError("exactly one of responses/by_hash/rule per endpoint")


@dataclass
class MockScript:
    """Per-endpoint scripted behavior; deterministic given the script."""

    endpoints: dict[str, EndpointScript] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "MockScript":
        endpoints = {}
        for kind, entry in raw.items():
            if kind not in ENDPOINT_PATHS:
                raise ValueError(f"unknown endpoint kind {kind!r} in mock script")
            endpoints[kind] = EndpointScript(
                responses=entry.get("responses"),
                by_hash=entry.get("by_hash"),
                rule=entry.get("rule"),
                fail_first=int(entry.get("fail_first", 0)),
            )
        return cls(endpoints=endpoints)

    @classmethod
    def load(cls, path: Path) -> "MockScript":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class _TrackerEntity:
    box: list[float]
    registered_at: int


class MockTransport:
    """Serves envelope requests from a MockScript, logging every call.

    Tracker endpoints keep per-session registration state so propagation rules
    (echo, constant velocity, scripted loss) behave like a stateful tracker.
    """

    def __init__(self, script: MockScript):
        self.script = script
        self.calls: list[tuple[str, dict[str, Any]]] = []
        self._cursor: dict[str, int] = {}
        self._failures_left: dict[str, int] = {
            kind: ep.fail_first for kind, ep in script.endpoints.items()
        }
        self._sessions: dict[str, dict[int, _TrackerEntity]] = {}

    def send(self, endpoint: str, envelope: dict[str, Any]) -> dict[str, Any]:
        payload = envelope["payload"]
        self.calls.append((endpoint, payload))
        ep = self.script.endpoints.get(endpoint)
        if ep is None:
            raise MockScriptExhausted(f"no script for endpoint {endpoint!r}")
        if self._failures_left.get(endpoint, 0) > 0:
            self._failures_left[endpoint] -= 1
            raise TransientBackendError(f"scripted transient failure on {endpoint}")
        if ep.responses is not None:
            cursor = self._cursor.get(endpoint, 0)
            if cursor >= len(ep.responses):
                raise MockScriptExhausted(f"script for {endpoint!r} exhausted after {cursor} calls")
            self._cursor[endpoint] = cursor + 1
            reply = ep.responses[cursor]
        elif ep.by_hash is not None:
            key = request_hash(endpoint, payload)
            if key not in ep.by_hash:
                raise MockScriptExhausted(f"no scripted response for {endpoint} hash {key[:12]}")
            reply = ep.by_hash[key]
        else:
            reply = self._apply_rule(endpoint, ep.rule, payload)
        return {"request_id": envelope["request_id"], "payload": reply}

    def calls_for(self, endpoint: str) -> list[dict[str, Any]]:
        return [payload for kind, payload in self.calls if kind == endpoint]

    def _apply_rule(self, endpoint: str, rule: dict[str, Any], payload: dict[str, Any]) -> dict:
        kind = rule.get("kind")
        if kind == "fixed_text":
            return {"text": rule["text"]}
        if kind == "fixed_detections":
            return {"detections": rule["detections"]}
        if kind == "boxes_by_class":
            return {"detections": rule["classes"].get(payload["class_name"], [])}
        if kind == "hands_by_frame":
            frames = rule.get("frames", {})
            key = str(payload["frame"]["frame_index"])
            return {"hands": frames.get(key, rule.get("default", []))}
        if kind == "hands_in_person_box":
            return _pose_keypoints_in_box(payload["person_box"], rule)
        if kind == "linear_track":
            return _linear_camera_track(len(payload["frames"]), rule)
        if kind == "ack":
            session = self._sessions.setdefault(payload["session_id"], {})
            session[payload["entity_id"]] = _TrackerEntity(
                box=list(payload["box"]), registered_at=payload["frame_index"]
            )
            return {"ok": True}
        if kind == "follow_prompts":
            return self._advance(payload, rule)
        if kind == "marker_router":
            for route in rule.get("routes", []):
                if route["contains"] in payload["prompt"]:
                    return {"text": route["text"]}
            if "default_text" in rule:
                return {"text": rule["default_text"]}
            raise MockScriptExhausted("marker_router matched no route")
        if kind == "fixed_letter":
            return {"text": rule["letter"]}
        raise SchemaError(f"unknown mock rule {kind!r} for {endpoint}")

    def _advance(self, payload: dict[str, Any], rule: dict[str, Any]) -> dict[str, Any]:
        session = self._sessions.get(payload["session_id"], {})
        frame = payload["frame_index"]
        velocity = {int(k): v for k, v in rule.get("velocity", {}).items()}
        lost = {int(k): v for k, v in rule.get("lost", {}).items()}
        boxes: dict[str, Any] = {}
        for entity_id, state in session.items():
            lost_at = lost.get(entity_id)
            if lost_at is not None and frame >= lost_at and state.registered_at < lost_at:
                boxes[str(entity_id)] = None
                continue
            dx, dy = velocity.get(entity_id, (0.0, 0.0))
            steps = frame - state.registered_at
            left, top, right, bottom = state.box
            moved = [
                left + dx * steps,
                top + dy * steps,
                right + dx * steps,
                bottom + dy * steps,
            ]
            clamped = [min(1.0, max(0.0, v)) for v in moved]
            boxes[str(entity_id)] = clamped
        return {"boxes": boxes}


def _pose_keypoints_in_box(person_box: list[float], rule: dict[str, Any]) -> dict[str, Any]:
    """Lay a 21-point grid inside fixed sub-regions of the person box per side."""
    confidence = float(rule.get("confidence", 0.95))
    out: dict[str, Any] = {}
    for side, region in (("left_hand", HAND_REGION_LEFT), ("right_hand", HAND_REGION_RIGHT)):
        if rule.get(f"skip_{side}"):
            out[side] = None
            continue
        sub = _relative_box(person_box, region)
        points = []
        for i in range(21):
            gx, gy = i % 5, i // 5
            x = sub[0] + (sub[2] - sub[0]) * gx / 4.0
            y = sub[1] + (sub[3] - sub[1]) * gy / 4.0
            points.append([round(x, 6), round(y, 6), confidence])
        out[side] = points
    return out


# relative (left, top, right, bottom) placement of mock hand clusters in a person box
HAND_REGION_LEFT = (0.10, 0.60, 0.25, 0.75)
HAND_REGION_RIGHT = (0.75, 0.60, 0.90, 0.75)


def _relative_box(outer: list[float], rel: tuple[float, float, float, float]) -> list[float]:
    w = outer[2] - outer[0]
    h = outer[3] - outer[1]
    return [
        outer[0] + rel[0] * w,
        outer[1] + rel[1] * h,
        outer[0] + rel[2] * w,
        outer[1] + rel[3] * h,
    ]


def expanded_hand_region(person_box: list[float], side: str, factor: float = 1.5) -> list[float]:
    """Where the mock pose rule puts a hand after center expansion; test/demo helper."""
    rel = HAND_REGION_LEFT if side == "left" else HAND_REGION_RIGHT
    sub = _relative_box(person_box, rel)
    cx, cy = (sub[0] + sub[2]) / 2.0, (sub[1] + sub[3]) / 2.0
    hw, hh = (sub[2] - sub[0]) / 2.0 * factor, (sub[3] - sub[1]) / 2.0 * factor
    return [
        max(0.0, cx - hw),
        max(0.0, cy - hh),
        min(1.0, cx + hw),
        min(1.0, cy + hh),
    ]


STUB_JUDGE_REPLY = """Set A:
Fine-grained Action Accuracy: 5.8
Motion Detail and Specificity: 6.1
Temporal Coherence: 6.5
Question Relevance: 6.9
Overall QA Quality: 6.3

Set B:
Fine-grained Action Accuracy: 8.4
Motion Detail and Specificity: 8.7
Temporal Coherence: 8.9
Question Relevance: 8.5
Overall QA Quality: 8.6
"""


def default_stub_script() -> dict[str, Any]:
    """Rule-only script answering every endpoint deterministically.

    Shim stub mode serves exactly this script, so stub responses can be
    compared byte-for-byte against MockTransport on the same requests.
    """
    return {
        "describe": {"rule": {"kind": "fixed_text", "text": "cup, ball"}},
        "ground": {
            "rule": {
                "kind": "boxes_by_class",
                "classes": {
                    "cup": [{"box": [0.1, 0.55, 0.22, 0.7], "score": 0.88}],
                    "ball": [{"box": [0.62, 0.8, 0.72, 0.9], "score": 0.81}],
                },
            }
        },
        "persons": {
            "rule": {
                "kind": "fixed_detections",
                "detections": [{"box": [0.3, 0.2, 0.7, 0.95], "score": 0.93}],
            }
        },
        "pose": {"rule": {"kind": "hands_in_person_box", "confidence": 0.95}},
        "hands": {"rule": {"kind": "hands_by_frame", "frames": {}, "default": []}},
        "camera_poses": {
            "rule": {"kind": "linear_track", "step": [0.0, 0.0, 0.0], "yaw_step": 0.0}
        },
        "track_register": {"rule": {"kind": "ack"}},
        "track_advance": {"rule": {"kind": "follow_prompts"}},
        "llm": {"rule": {"kind": "marker_router", "routes": [], "default_text": "stub reply"}},
        "judge": {"rule": {"kind": "marker_router", "routes": [], "default_text": STUB_JUDGE_REPLY}},
        "answer": {"rule": {"kind": "fixed_letter", "letter": "A"}},
    }


def _linear_camera_track(n_frames: int, rule: dict[str, Any]) -> dict[str, Any]:
    step = rule.get("step", [0.0, 0.0, 0.0])
    yaw_step = float(rule.get("yaw_step", 0.0))
    poses = []
    for k in range(n_frames):
        angle = yaw_step * k
        c, s = math.cos(angle), math.sin(angle)
        poses.append(
            {
                "rotation": [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]],
                "translation": [step[0] * k, step[1] * k, step[2] * k],
            }
        )
    return {"poses": poses}
