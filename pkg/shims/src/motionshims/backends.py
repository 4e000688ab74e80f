"""Model backends behind the shim server: deterministic stubs and real-model
adapters. Adapters normalize model-native box formats to the protocol's
normalized coordinates before anything leaves the process."""

from __future__ import annotations

import json
import threading
from typing import Any, Protocol

from motioncurate.backends.mock import MockScript, MockTransport, default_stub_script

from .config import ShimConfig


class ShimBackend(Protocol):
    def handle(self, endpoint: str, payload: dict[str, Any]) -> dict[str, Any]: ...


class StubBackend:
    """Serves a MockScript exactly as the in-process mock would.

    Responses are therefore byte-comparable with MockTransport on the same
    script, which is what the mock-parity check relies on.
    """

    def __init__(self, config: ShimConfig):
        if config.stub_script_path is not None:
            script = MockScript.load(config.stub_script_path)
        else:
            script = MockScript.from_dict(default_stub_script())
        self._transport = MockTransport(script)
        self._lock = threading.Lock()

    def handle(self, endpoint: str, payload: dict[str, Any]) -> dict[str, Any]:
        envelope = {"endpoint": endpoint, "request_id": "stub", "payload": payload}
        with self._lock:
            return self._transport.send(endpoint, envelope)["payload"]


class LlmPassthroughBackend:
    """Forwards prompts to an OpenAI-compatible chat endpoint.

    config.model is '<base_url>::<model_name>'; frames are attached as
    image_url parts when present.
    """

    def __init__(self, config: ShimConfig):
        import httpx

        try:
            base_url, self.model_name = config.model.split("::", 1)
        except ValueError as exc:
            raise RuntimeError(
                f"llm shim model must be '<base_url>::<model_name>', got {config.model!r}"
            ) from exc
        headers = {"Authorization": f"Bearer {config.bearer_token}"} if config.bearer_token else {}
        self._client = httpx.Client(base_url=base_url, headers=headers, timeout=120.0)

    def handle(self, endpoint: str, payload: dict[str, Any]) -> dict[str, Any]:
        content: list[dict[str, Any]] = [{"type": "text", "text": payload["prompt"]}]
        for frame in payload.get("frames") or []:
            if "image_b64" in frame:
                content.append(
                    {
                        "type": "image_url",
                        "image_url": {"url": f"data:image/png;base64,{frame['image_b64']}"},
                    }
                )
        if payload.get("overlay") is not None:
            content.append({"type": "text", "text": json.dumps(payload["overlay"])})
        reply = self._client.post(
            "/chat/completions",
            json={
                "model": self.model_name,
                "messages": [{"role": "user", "content": content}],
                "temperature": 0.0,
            },
        )
        reply.raise_for_status()
        return {"text": reply.json()["choices"][0]["message"]["content"]}


def _unavailable(kind: str, needs: str):
    class UnavailableBackend:
        def __init__(self, config: ShimConfig):
            raise RuntimeError(
                f"{kind} shim: cannot load model {config.model!r}; this adapter needs "
                f"{needs} installed plus local weights. Run in stub mode (no --model) "
                f"for deterministic canned outputs."
            )

    return UnavailableBackend


def _probe_import(module: str) -> bool:
    import importlib.util

    return importlib.util.find_spec(module) is not None


class GroundingBackend:
    """Zero-shot text-conditioned detection via a transformers checkpoint."""

    def __init__(self, config: ShimConfig):
        if not _probe_import("transformers"):
            raise RuntimeError(
                "ground shim: transformers is not installed; run in stub mode instead"
            )
        from transformers import pipeline

        try:
            self._detector = pipeline(
                "zero-shot-object-detection", model=config.model, device=config.device
            )
        except Exception as exc:
            raise RuntimeError(
                f"ground shim: failed to load checkpoint {config.model!r}: {exc}"
            ) from exc

    def handle(self, endpoint: str, payload: dict[str, Any]) -> dict[str, Any]:
        from PIL import Image

        from motioncurate.backends.protocol import decode_frame

        image = Image.fromarray(decode_frame(payload["frame"]))
        width, height = image.size
        hits = self._detector(image, candidate_labels=[payload["class_name"]])
        detections = []
        for hit in hits:
            box = hit["box"]
            detections.append(
                {
                    "box": [
                        max(0.0, min(1.0, box["xmin"] / width)),
                        max(0.0, min(1.0, box["ymin"] / height)),
                        max(0.0, min(1.0, box["xmax"] / width)),
                        max(0.0, min(1.0, box["ymax"] / height)),
                    ],
                    "score": float(hit["score"]),
                }
            )
        return {"detections": detections}


# real-model constructors per endpoint kind; stub mode bypasses this table
MODEL_BACKENDS: dict[str, Any] = {
    "describe": _unavailable("describe", "a vision-language captioner"),
    "ground": GroundingBackend,
    "persons": _unavailable("persons", "a person detector"),
    "pose": _unavailable("pose", "a whole-body pose estimator"),
    "hands": _unavailable("hands", "a hand/contact detector"),
    "camera_poses": _unavailable("camera_poses", "a camera pose estimator"),
    "tracker": _unavailable("tracker", "a promptable video tracker"),
    "llm": LlmPassthroughBackend,
    "judge": LlmPassthroughBackend,
    "answer": LlmPassthroughBackend,
}


def build_backend(config: ShimConfig) -> ShimBackend:
    """Stub mode or a real-model adapter; load failures surface at startup."""
    if config.stub_mode:
        return StubBackend(config)
    return MODEL_BACKENDS[config.endpoint_kind](config)
