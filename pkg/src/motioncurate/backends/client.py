"""Backend client: retries, in-flight caps, schema validation, typed endpoints."""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from typing import Any, Optional, Protocol

from ..core import NormalizedBBox
from ..errors import (
    BackendTimeout,
    RetriesExhausted,
    SchemaError,
    TransientBackendError,
)
from .protocol import (
    ENDPOINT_PATHS,
    validate_envelope,
    validate_request_payload,
    validate_response_payload,
)

logger = logging.getLogger(__name__)


class Transport(Protocol):
    """Moves request envelopes to a service and returns response envelopes."""

    def send(self, endpoint: str, envelope: dict[str, Any]) -> dict[str, Any]: ...


@dataclass(frozen=True)
class CallPolicy:
    """retries = extra attempts after the first on transient errors."""

    retries: int = 3
    timeout_seconds: float = 60.0
    max_in_flight: int = 4


class HttpTransport:
    """JSON-over-HTTP transport; endpoint kinds map to fixed paths."""

    def __init__(self, base_url: str, *, token: str | None = None, timeout: float = 60.0):
        import httpx

        headers = {"Authorization": f"Bearer {token}"} if token else {}
        self._client = httpx.Client(base_url=base_url, headers=headers, timeout=timeout)
        self._httpx = httpx

    def send(self, endpoint: str, envelope: dict[str, Any]) -> dict[str, Any]:
        path = ENDPOINT_PATHS[endpoint]
        try:
            response = self._client.post(path, json=envelope)
        except self._httpx.TimeoutException as exc:
            raise BackendTimeout(f"{endpoint} timed out") from exc
        except self._httpx.TransportError as exc:
            raise TransientBackendError(f"{endpoint} transport failure: {exc}") from exc
        if response.status_code >= 500:
            raise TransientBackendError(f"{endpoint} returned {response.status_code}")
        if response.status_code != 200:
            raise SchemaError(f"{endpoint} returned {response.status_code}: {response.text[:200]}")
        return response.json()


class BackendClient:
    """Schema-validating client over any transport, safe for concurrent use."""

    def __init__(self, transport: Transport, policy: CallPolicy | None = None):
        self.transport = transport
        self.policy = policy or CallPolicy()
        self.last_retry_count = 0
        self._lock = threading.Lock()
        self._next_id = 0
        self._gate = threading.BoundedSemaphore(max(1, self.policy.max_in_flight))

    def _request_id(self) -> str:
        with self._lock:
            self._next_id += 1
            return f"req-{self._next_id:08d}"

    def call(self, endpoint: str, payload: dict[str, Any]) -> dict[str, Any]:
        """One validated request/response exchange with bounded retries."""
        validate_request_payload(endpoint, payload)
        request_id = self._request_id()
        envelope = {"endpoint": endpoint, "request_id": request_id, "payload": payload}
        validate_envelope(envelope, direction="request")

        attempts = self.policy.retries + 1
        last_error: Exception | None = None
        for attempt in range(attempts):
            try:
                with self._gate:
                    reply = self.transport.send(endpoint, envelope)
            except TransientBackendError as exc:
                last_error = exc
                logger.warning("transient failure on %s (attempt %d): %s", endpoint, attempt + 1, exc)
                continue
            validate_envelope(reply, direction="response")
            if reply["request_id"] != request_id:
                raise SchemaError(
                    f"{endpoint} response id {reply['request_id']!r} != {request_id!r}"
                )
            validate_response_payload(endpoint, reply["payload"])
            self.last_retry_count = attempt
            return reply["payload"]
        raise RetriesExhausted(f"{endpoint} failed after {attempts} attempts: {last_error}")

    # typed wrappers -------------------------------------------------------

    def describe(self, frame: dict) -> str:
        return self.call("describe", {"frame": frame})["text"]

    def ground(self, frame: dict, class_name: str) -> list[dict]:
        return self.call("ground", {"frame": frame, "class_name": class_name})["detections"]

    def persons(self, frame: dict) -> list[dict]:
        return self.call("persons", {"frame": frame})["detections"]

    def pose(self, frame: dict, person_box: list[float]) -> dict:
        return self.call("pose", {"frame": frame, "person_box": person_box})

    def hands(self, frame: dict) -> list[dict]:
        return self.call("hands", {"frame": frame})["hands"]

    def camera_poses(self, frames: list[dict]) -> list[dict]:
        return self.call("camera_poses", {"frames": frames})["poses"]

    def llm(self, prompt: str, frames: list[dict], overlay: dict | None) -> str:
        return self.call("llm", {"prompt": prompt, "frames": frames, "overlay": overlay})["text"]

    def judge(self, prompt: str) -> str:
        return self.call("judge", {"prompt": prompt})["text"]

    def answer(self, prompt: str, frames: list[dict] | None = None) -> str:
        return self.call("answer", {"prompt": prompt, "frames": frames or []})["text"]


class TrackerClient:
    """Per-session view of the tracker endpoints; calls stay in frame order."""

    def __init__(self, client: BackendClient, session_id: str):
        self.client = client
        self.session_id = session_id

    def register(self, entity_id: int, frame_index: int, box: NormalizedBBox) -> None:
        self.client.call(
            "track_register",
            {
                "session_id": self.session_id,
                "entity_id": entity_id,
                "frame_index": frame_index,
                "box": box.as_list(),
            },
        )

    def advance(self, frame_index: int) -> dict[int, Optional[NormalizedBBox]]:
        reply = self.client.call(
            "track_advance", {"session_id": self.session_id, "frame_index": frame_index}
        )
        out: dict[int, Optional[NormalizedBBox]] = {}
        for key, value in reply["boxes"].items():
            out[int(key)] = None if value is None else NormalizedBBox.from_list(value)
        return out
