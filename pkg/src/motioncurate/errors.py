"""Exception types shared across the pipeline."""

from __future__ import annotations


class MotionCurateError(Exception):
    """Base class for all pipeline errors."""


class InvalidBox(MotionCurateError):
    """Pixel box is inverted or lies outside the frame by more than 1 px."""


class IdRangeExceeded(MotionCurateError):
    """Entity ID allocation outside the supported ranges."""


class EmptyVideo(MotionCurateError):
    """Video has non-positive duration."""


class DecodeError(MotionCurateError):
    """Video file cannot be opened or decoded at all."""


class InsufficientPoses(MotionCurateError):
    """Fewer than two camera poses; deltas are undefined."""


class InvalidPose(MotionCurateError):
    """Camera rotation is not orthonormal within tolerance."""


class BackendError(MotionCurateError):
    """A model backend call failed."""


class TransientBackendError(BackendError):
    """Retryable backend failure (timeout, 5xx, connection reset)."""


class BackendTimeout(TransientBackendError):
    """Backend call exceeded its deadline."""


class RetriesExhausted(BackendError):
    """All retry attempts for a backend call failed."""


class SchemaError(BackendError):
    """Request or response payload does not validate against its schema."""


class MockScriptExhausted(BackendError):
    """A mock endpoint ran out of scripted responses."""


class ReplayMiss(BackendError):
    """Replay transcript has no response for this request hash."""


class EmptyInventory(MotionCurateError):
    """Scene describer yielded no usable object categories."""


class TrackAbort(MotionCurateError):
    """Tracker backend failed mid-video; partial results stay in the session."""


class SchemaViolation(MotionCurateError):
    """Motion annotation inputs are inconsistent with the document schema."""


class CaptionError(MotionCurateError):
    """Caption generation failed persistently or returned an empty reply."""


class QaParseError(MotionCurateError):
    """No parseable question items in the raw generation output."""


class JudgeParseError(MotionCurateError):
    """Judge reply could not be parsed into in-range dimension scores."""


class EmptyBenchmark(MotionCurateError):
    """Benchmark run invoked with zero items."""
