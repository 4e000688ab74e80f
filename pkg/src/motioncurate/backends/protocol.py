"""Typed wire protocol shared by the pipeline client, mocks, and inference shims."""

from __future__ import annotations

import base64
import hashlib
import io
import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Any

import jsonschema
import numpy as np

from ..errors import SchemaError

ENDPOINT_PATHS = {
    "describe": "/describe",
    "ground": "/ground",
    "persons": "/persons",
    "pose": "/pose",
    "hands": "/hands",
    "camera_poses": "/camera_poses",
    "track_register": "/track/register",
    "track_advance": "/track/advance",
    "llm": "/llm",
    "judge": "/judge",
    "answer": "/answer",
}

ENDPOINT_KINDS = tuple(ENDPOINT_PATHS)


@dataclass(frozen=True, slots=True)
class BackendRequest:
    endpoint: str
    request_id: str
    payload: dict[str, Any]

    def to_wire(self) -> dict[str, Any]:
        return {"endpoint": self.endpoint, "request_id": self.request_id, "payload": self.payload}


@dataclass(frozen=True, slots=True)
class BackendResponse:
    request_id: str
    payload: dict[str, Any]

    def to_wire(self) -> dict[str, Any]:
        return {"request_id": self.request_id, "payload": self.payload}


@lru_cache(maxsize=1)
def _wire_schema() -> dict[str, Any]:
    text = resources.files("motioncurate.schemas").joinpath("wire_protocol.schema.json").read_text()
    return json.loads(text)


@lru_cache(maxsize=None)
def _validator(def_name: str) -> jsonschema.Draft202012Validator:
    root = _wire_schema()
    schema = {"$ref": f"#/$defs/{def_name}", "$defs": root["$defs"]}
    return jsonschema.Draft202012Validator(schema)


def validate_request_payload(endpoint: str, payload: dict[str, Any]) -> None:
    _validate(endpoint, payload, f"{endpoint}_request")


def validate_response_payload(endpoint: str, payload: dict[str, Any]) -> None:
    _validate(endpoint, payload, f"{endpoint}_response")


def _validate(endpoint: str, payload: Any, def_name: str) -> None:
    if endpoint not in ENDPOINT_PATHS:
        raise SchemaError(f"unknown endpoint kind {endpoint!r}")
    errors = sorted(_validator(def_name).iter_errors(payload), key=str)
    if errors:
        first = errors[0]
        raise SchemaError(f"{def_name} invalid at {list(first.absolute_path)}: {first.message}")


def validate_envelope(envelope: dict[str, Any], *, direction: str) -> None:
    name = "request_envelope" if direction == "request" else "response_envelope"
    errors = sorted(_validator(name).iter_errors(envelope), key=str)
    if errors:
        raise SchemaError(f"{name} invalid: {errors[0].message}")


def canonical_json(value: Any) -> str:
    """Stable serialization used for hashing and transcript keys."""
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def request_hash(endpoint: str, payload: dict[str, Any]) -> str:
    """Content hash of a request, independent of its request id."""
    digest = hashlib.sha256()
    digest.update(canonical_json({"endpoint": endpoint, "payload": payload}).encode("utf-8"))
    return digest.hexdigest()


def encode_frame(frame: np.ndarray, frame_index: int, *, shared_path: str | None = None) -> dict:
    """Frame payload: base64 PNG by default, shared path when servers are co-located."""
    if shared_path is not None:
        return {"frame_index": frame_index, "path": shared_path}
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(frame)).save(buf, format="PNG")
    return {
        "frame_index": frame_index,
        "image_b64": base64.b64encode(buf.getvalue()).decode("ascii"),
    }


def decode_frame(payload: dict) -> np.ndarray:
    """Inverse of encode_frame for base64 payloads; path payloads load from disk."""
    from PIL import Image

    if "image_b64" in payload:
        raw = base64.b64decode(payload["image_b64"])
        return np.asarray(Image.open(io.BytesIO(raw)).convert("RGB"))
    return np.asarray(Image.open(payload["path"]).convert("RGB"))
