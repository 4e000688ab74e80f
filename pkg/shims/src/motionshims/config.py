"""Shim configuration: one process serves one endpoint kind."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

# endpoint kind -> protocol endpoints the shim answers
SERVED_ENDPOINTS = {
    "describe": ("describe",),
    "ground": ("ground",),
    "persons": ("persons",),
    "pose": ("pose",),
    "hands": ("hands",),
    "camera_poses": ("camera_poses",),
    "tracker": ("track_register", "track_advance"),
    "llm": ("llm",),
    "judge": ("judge",),
    "answer": ("answer",),
}


@dataclass(frozen=True)
class ShimConfig:
    """What one shim serves and which model (or stub script) backs it.

    With model=None the shim runs in stub mode, serving the bundled mock
    script (or stub_script_path when given) byte-for-byte.
    """

    endpoint_kind: str
    model: str | None = None
    device: str = "cpu"
    batch_size: int = 1
    stub_script_path: Path | None = None
    bearer_token: str | None = None

    def __post_init__(self) -> None:
        if self.endpoint_kind not in SERVED_ENDPOINTS:
            raise ValueError(
                f"unknown endpoint kind {self.endpoint_kind!r}; "
                f"expected one of {sorted(SERVED_ENDPOINTS)}"
            )
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    @property
    def stub_mode(self) -> bool:
        return self.model is None

    @property
    def endpoints(self) -> tuple[str, ...]:
        return SERVED_ENDPOINTS[self.endpoint_kind]
