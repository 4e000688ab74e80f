"""Camera ego-motion scoring and exclusion of high-motion videos."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PipelineConfig
from .errors import InsufficientPoses, InvalidPose

ORTHONORMAL_TOL = 1e-6


@dataclass(frozen=True)
class CameraPose:
    """World-from-camera pose from the pose backend; units are backend-defined."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        r = np.asarray(self.rotation, dtype=float)
        t = np.asarray(self.translation, dtype=float)
        if r.shape != (3, 3) or t.shape != (3,):
            raise InvalidPose(f"bad pose shapes {r.shape}, {t.shape}")
        if not np.allclose(r @ r.T, np.eye(3), atol=ORTHONORMAL_TOL):
            raise InvalidPose("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > ORTHONORMAL_TOL:
            raise InvalidPose("rotation determinant is not +1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)


@dataclass(frozen=True)
class MotionReport:
    """Per-pair deltas, the combined score, and the exclusion decision."""

    translation_deltas: tuple[float, ...]
    rotation_deltas: tuple[float, ...]
    score: float
    excluded: bool


def pose_deltas(poses: list[CameraPose]) -> tuple[list[float], list[float]]:
    """Consecutive translation step lengths and geodesic rotation angles.

    Monocular translation is scale-ambiguous, so step lengths are rescaled to
    unit mean whenever any motion exists; a static trajectory stays all zeros.
    Rotation deltas are in radians, always within [0, pi].
    """
    if len(poses) < 2:
        raise InsufficientPoses(f"need >= 2 poses, got {len(poses)}")
    steps = []
    angles = []
    for a, b in zip(poses, poses[1:]):
        steps.append(float(np.linalg.norm(b.translation - a.translation)))
        cos = (np.trace(a.rotation.T @ b.rotation) - 1.0) / 2.0
        angles.append(float(np.arccos(np.clip(cos, -1.0, 1.0))))
    mean_step = float(np.mean(steps))
    if mean_step > 0.0:
        steps = [s / mean_step for s in steps]
    return steps, angles


def motion_score(
    translation_deltas: list[float], rotation_deltas: list[float], cfg: PipelineConfig
) -> float:
    """Weighted mean plus weighted peak of the two delta series."""
    if not translation_deltas or not rotation_deltas:
        raise InsufficientPoses("empty delta series")
    return (
        cfg.translation_weight * float(np.mean(translation_deltas))
        + cfg.rotation_weight * float(np.mean(rotation_deltas))
        + cfg.translation_peak_weight * max(translation_deltas)
        + cfg.rotation_peak_weight * max(rotation_deltas)
    )


def filter_video(poses: list[CameraPose], cfg: PipelineConfig) -> MotionReport:
    """Exclude the video when the motion score strictly exceeds the threshold."""
    t_deltas, r_deltas = pose_deltas(poses)
    score = motion_score(t_deltas, r_deltas, cfg)
    return MotionReport(
        translation_deltas=tuple(t_deltas),
        rotation_deltas=tuple(r_deltas),
        score=score,
        excluded=score > cfg.motion_threshold,
    )


def filter_frame_indices(frame_indices: tuple[int, ...], max_frames: int) -> tuple[int, ...]:
    """Evenly spaced subset of the segment's frames to bound pose-backend cost."""
    if len(frame_indices) <= max_frames:
        return frame_indices
    picks = np.linspace(0, len(frame_indices) - 1, max_frames)
    return tuple(frame_indices[int(round(p))] for p in picks)
