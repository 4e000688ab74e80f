"""Temporal segment sampling and frame extraction."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol

import numpy as np

from .core import PipelineConfig, VideoMeta
from .errors import DecodeError, EmptyVideo


@dataclass(frozen=True, slots=True)
class SegmentPlan:
    """Which stretch of the video to process and which frames to decode.

    frame_indices are source-video frame numbers at native fps;
    caption_frame_indices is the subset nearest the caption-fps grid.
    """

    t_start: float
    t_s: float
    frame_indices: tuple[int, ...]
    caption_frame_indices: tuple[int, ...]


def sample_segment(meta: VideoMeta, cfg: PipelineConfig, rng) -> SegmentPlan:
    """Draw a 5-10 s segment centered near the video midpoint with jitter.

    Videos at or under the minimum length are kept whole and the rng is not
    consumed. The jittered start is clamped into [0, duration - t_s].
    """
    t_v = meta.duration
    if t_v <= 0:
        raise EmptyVideo(f"non-positive duration for {meta.path}")

    lo = cfg.segment_min_seconds
    hi = min(cfg.segment_max_seconds, t_v)
    if t_v <= lo:
        t_start, t_s = 0.0, t_v
    else:
        t_s = float(rng.uniform(lo, hi))
        t_mid = t_v / 2.0 - t_s / 2.0
        jitter = float(rng.uniform(-cfg.jitter_fraction * t_v, cfg.jitter_fraction * t_v))
        t_start = max(0.0, min(t_v - t_s, t_mid + jitter))

    frame_indices = _segment_frame_indices(meta, t_start, t_s)
    caption_indices = _caption_frame_indices(meta, frame_indices, t_start, t_s, cfg.caption_fps)
    return SegmentPlan(
        t_start=t_start,
        t_s=t_s,
        frame_indices=frame_indices,
        caption_frame_indices=caption_indices,
    )


def _segment_frame_indices(meta: VideoMeta, t_start: float, t_s: float) -> tuple[int, ...]:
    # frame i covers [i/fps, (i+1)/fps); keep frames whose midpoint falls in the segment
    first = int(np.ceil(t_start * meta.fps - 0.5 - 1e-9))
    last = int(np.floor((t_start + t_s) * meta.fps - 0.5 + 1e-9))
    first = max(0, first)
    last = min(meta.frame_count - 1, last)
    if last < first:
        last = first = min(max(0, first), meta.frame_count - 1)
    return tuple(range(first, last + 1))


def _caption_frame_indices(
    meta: VideoMeta,
    frame_indices: tuple[int, ...],
    t_start: float,
    t_s: float,
    caption_fps: float,
) -> tuple[int, ...]:
    n = max(1, int(np.floor(t_s * caption_fps + 1e-9)))
    grid = [t_start + (k + 0.5) / caption_fps for k in range(n)]
    midpoints = np.asarray([(i + 0.5) / meta.fps for i in frame_indices])
    picks = []
    for t in grid:
        picks.append(frame_indices[int(np.argmin(np.abs(midpoints - t)))])
    return tuple(picks)


def frame_timestamp(index: int, meta: VideoMeta) -> float:
    """Midpoint-of-frame timestamp in source-video seconds."""
    return (index + 0.5) / meta.fps


class FrameDecoder(Protocol):
    """Minimal decoding contract so tests can substitute synthetic rasters."""

    def meta(self) -> VideoMeta: ...

    def read_frame(self, index: int) -> np.ndarray:
        """Return an HxWx3 uint8 array; raise on unreadable frames."""
        ...


@dataclass
class FrameSet:
    """Decoded frames of one segment, keyed by source frame index.

    Frames that failed to decode are listed in gaps; downstream stages treat
    them as absent slots rather than aborting.
    """

    meta: VideoMeta
    plan: SegmentPlan
    frames: dict[int, np.ndarray] = field(default_factory=dict)
    timestamps: dict[int, float] = field(default_factory=dict)
    gaps: list[int] = field(default_factory=list)

    @property
    def frame_count(self) -> int:
        return len(self.plan.frame_indices)

    def local_index(self, source_index: int) -> int:
        """Segment-relative frame number (0 = first frame of the segment)."""
        return self.plan.frame_indices.index(source_index)

    def get(self, source_index: int) -> Optional[np.ndarray]:
        return self.frames.get(source_index)

    def caption_frames(self) -> list[tuple[int, np.ndarray]]:
        return [
            (i, self.frames[i]) for i in self.plan.caption_frame_indices if i in self.frames
        ]

    @property
    def first_frame(self) -> np.ndarray:
        for i in self.plan.frame_indices:
            if i in self.frames:
                return self.frames[i]
        raise DecodeError(f"no decodable frames in segment of {self.meta.path}")


def extract_frames(decoder: FrameDecoder, plan: SegmentPlan) -> FrameSet:
    """Decode the planned frames, recording gaps instead of failing per frame."""
    meta = decoder.meta()
    out = FrameSet(meta=meta, plan=plan)
    for index in plan.frame_indices:
        if index >= meta.frame_count:
            out.gaps.append(index)
            continue
        try:
            out.frames[index] = decoder.read_frame(index)
        except DecodeError:
            raise
        except Exception:
            out.gaps.append(index)
            continue
        out.timestamps[index] = frame_timestamp(index, meta)
    return out


@dataclass
class SyntheticDecoder:
    """Procedural test video: gradient background plus one moving square.

    Frames are a pure function of (seed, frame index), so decoding is
    deterministic across runs and platforms.
    """

    video_meta: VideoMeta
    seed: int = 0
    broken_frames: frozenset[int] = frozenset()

    def meta(self) -> VideoMeta:
        return self.video_meta

    def read_frame(self, index: int) -> np.ndarray:
        if index in self.broken_frames:
            raise IOError(f"synthetic decode failure at frame {index}")
        m = self.video_meta
        frame = np.zeros((m.height, m.width, 3), dtype=np.uint8)
        col = (np.linspace(0, 160, m.width, dtype=np.uint8) + (self.seed * 37) % 64)
        frame[:, :, 0] = col[None, :]
        frame[:, :, 1] = (index * 11 + self.seed * 7) % 256
        size = max(4, m.width // 10)
        x0 = int((index * 3 + self.seed * 13) % max(1, m.width - size))
        y0 = int((index * 2 + self.seed * 5) % max(1, m.height - size))
        frame[y0 : y0 + size, x0 : x0 + size, 2] = 255
        return frame


SYNTH_SUFFIX = ".synth.json"


def load_synthetic_spec(path: Path) -> SyntheticDecoder:
    """Build a SyntheticDecoder from a .synth.json spec file."""
    try:
        spec = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DecodeError(f"cannot read synthetic spec {path}: {exc}") from exc
    fps = float(spec["fps"])
    duration = float(spec["duration"])
    meta = VideoMeta(
        path=str(path),
        width=int(spec["width"]),
        height=int(spec["height"]),
        fps=fps,
        duration=duration,
        frame_count=int(spec.get("frame_count", round(fps * duration))),
    )
    return SyntheticDecoder(
        video_meta=meta,
        seed=int(spec.get("seed", 0)),
        broken_frames=frozenset(spec.get("broken_frames", [])),
    )


class VideoFileDecoder:
    """OpenCV-backed decoder for real container files."""

    def __init__(self, path: Path):
        try:
            import cv2
        except ImportError as exc:
            raise DecodeError(
                "decoding real video files requires opencv-python-headless "
                "(pip install 'motioncurate[video]')"
            ) from exc
        self._cv2 = cv2
        self._cap = cv2.VideoCapture(str(path))
        if not self._cap.isOpened():
            raise DecodeError(f"cannot open video {path}")
        fps = float(self._cap.get(cv2.CAP_PROP_FPS) or 0.0)
        frame_count = int(self._cap.get(cv2.CAP_PROP_FRAME_COUNT) or 0)
        width = int(self._cap.get(cv2.CAP_PROP_FRAME_WIDTH) or 0)
        height = int(self._cap.get(cv2.CAP_PROP_FRAME_HEIGHT) or 0)
        if fps <= 0 or frame_count <= 0 or width <= 0 or height <= 0:
            raise DecodeError(f"unusable stream metadata for {path}")
        self._meta = VideoMeta(
            path=str(path),
            width=width,
            height=height,
            fps=fps,
            duration=frame_count / fps,
            frame_count=frame_count,
        )

    def meta(self) -> VideoMeta:
        return self._meta

    def read_frame(self, index: int) -> np.ndarray:
        self._cap.set(self._cv2.CAP_PROP_POS_FRAMES, index)
        ok, frame = self._cap.read()
        if not ok or frame is None:
            raise IOError(f"failed to decode frame {index} of {self._meta.path}")
        return self._cv2.cvtColor(frame, self._cv2.COLOR_BGR2RGB)


def open_video(path: Path) -> FrameDecoder:
    """Dispatch to the synthetic decoder for spec files, OpenCV otherwise."""
    if str(path).endswith(SYNTH_SUFFIX):
        return load_synthetic_spec(path)
    return VideoFileDecoder(path)
