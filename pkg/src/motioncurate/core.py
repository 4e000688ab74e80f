"""Shared domain types, box geometry, and the hierarchical entity-ID scheme."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .errors import IdRangeExceeded, InvalidBox

PERSON_ROOT_MAX = 99
OBJECT_ID_BASE = 1000
LEFT_HAND_OFFSET = 1
RIGHT_HAND_OFFSET = 4

# Sub-ID codes +2 and +3 are unused by the allocation scheme; they are left
# unassigned rather than repurposed.


class EntityKind(str, Enum):
    PERSON = "person"
    LEFT_HAND = "left_hand"
    RIGHT_HAND = "right_hand"
    OBJECT = "object"
    PERSON_ROOT = "person_root"


class ContactValue(str, Enum):
    NO_CONTACT = "no_contact"
    SELF_CONTACT = "self_contact"
    OBJECT_CONTACT = "object_contact"
    OTHER_CONTACT = "other_contact"


@dataclass(frozen=True, slots=True)
class NormalizedBBox:
    """Axis-aligned box with coordinates as fractions of frame size in [0, 1]."""

    left: float
    top: float
    right: float
    bottom: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.left <= self.right <= 1.0):
            raise InvalidBox(f"horizontal extent invalid: {self.left}..{self.right}")
        if not (0.0 <= self.top <= self.bottom <= 1.0):
            raise InvalidBox(f"vertical extent invalid: {self.top}..{self.bottom}")

    @property
    def width(self) -> float:
        return self.right - self.left

    @property
    def height(self) -> float:
        return self.bottom - self.top

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return ((self.left + self.right) / 2.0, (self.top + self.bottom) / 2.0)

    def as_list(self) -> list[float]:
        return [self.left, self.top, self.right, self.bottom]

    @classmethod
    def from_list(cls, values: list[float] | tuple[float, ...]) -> "NormalizedBBox":
        left, top, right, bottom = values
        return cls(float(left), float(top), float(right), float(bottom))


@dataclass(frozen=True, slots=True)
class EntityId:
    """Identity under the hierarchical scheme: person roots own sub-IDs for hands."""

    raw: int
    kind: EntityKind

    def __post_init__(self) -> None:
        if self.raw < 0:
            raise IdRangeExceeded(f"negative entity id {self.raw}")

    @classmethod
    def person_root(cls, root: int) -> "EntityId":
        _check_root(root)
        return cls(root, EntityKind.PERSON_ROOT)

    @classmethod
    def person(cls, root: int) -> "EntityId":
        _check_root(root)
        return cls(root * 10, EntityKind.PERSON)

    @classmethod
    def left_hand(cls, root: int) -> "EntityId":
        _check_root(root)
        return cls(root * 10 + LEFT_HAND_OFFSET, EntityKind.LEFT_HAND)

    @classmethod
    def right_hand(cls, root: int) -> "EntityId":
        _check_root(root)
        return cls(root * 10 + RIGHT_HAND_OFFSET, EntityKind.RIGHT_HAND)

    @classmethod
    def object(cls, index: int) -> "EntityId":
        if index < 0:
            raise IdRangeExceeded(f"negative object index {index}")
        return cls(OBJECT_ID_BASE + index, EntityKind.OBJECT)

    @classmethod
    def hand(cls, root: int, side: str) -> "EntityId":
        if side == "left":
            return cls.left_hand(root)
        if side == "right":
            return cls.right_hand(root)
        raise ValueError(f"unknown hand side {side!r}")

    @property
    def root(self) -> int:
        """Person root this id derives from; undefined for objects."""
        if self.kind is EntityKind.OBJECT:
            raise ValueError("object ids have no person root")
        if self.kind is EntityKind.PERSON_ROOT:
            return self.raw
        return self.raw // 10

    @property
    def is_hand(self) -> bool:
        return self.kind in (EntityKind.LEFT_HAND, EntityKind.RIGHT_HAND)


def _check_root(root: int) -> None:
    if not (0 <= root <= PERSON_ROOT_MAX):
        raise IdRangeExceeded(f"person root {root} outside [0, {PERSON_ROOT_MAX}]")


@dataclass(frozen=True, slots=True)
class ContactState:
    """Per-hand contact classification at one frame.

    held_object_box is present exactly when the hand holds an object.
    """

    value: ContactValue
    held_object_box: Optional[NormalizedBBox] = None

    def __post_init__(self) -> None:
        holds = self.value is ContactValue.OBJECT_CONTACT
        if holds and self.held_object_box is None:
            raise ValueError("object_contact requires a held object box")
        if not holds and self.held_object_box is not None:
            raise ValueError("held object box only valid with object_contact")


@dataclass(frozen=True, slots=True)
class Tracklet:
    """One entity's per-frame box sequence; absent boxes mean not detected."""

    id: EntityId
    object_type: str
    boxes: tuple[Optional[NormalizedBBox], ...]
    contact_states: Optional[tuple[Optional[ContactState], ...]] = None

    def __post_init__(self) -> None:
        if self.id.is_hand:
            if self.contact_states is None:
                raise ValueError("hand tracklets carry contact states")
            if len(self.contact_states) != len(self.boxes):
                raise ValueError("contact states misaligned with boxes")
        elif self.contact_states is not None:
            raise ValueError("contact states only valid for hands")

    @property
    def frame_count(self) -> int:
        return len(self.boxes)


@dataclass(frozen=True, slots=True)
class VideoMeta:
    """Static properties of one input video."""

    path: str
    width: int
    height: int
    fps: float
    duration: float
    frame_count: int

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0 or self.fps <= 0:
            raise ValueError(f"invalid dimensions/fps for {self.path}")
        if self.duration > 0 and abs(self.frame_count - round(self.fps * self.duration)) > 1:
            raise ValueError(
                f"frame_count {self.frame_count} inconsistent with "
                f"{self.fps} fps x {self.duration} s for {self.path}"
            )


@dataclass(frozen=True)
class PipelineConfig:
    """All tunable thresholds and weights; a fixed seed makes mock runs deterministic."""

    segment_min_seconds: float = 5.0
    segment_max_seconds: float = 10.0
    jitter_fraction: float = 0.2
    translation_weight: float = 1.0
    rotation_weight: float = 1.0
    translation_peak_weight: float = 0.5
    rotation_peak_weight: float = 0.5
    motion_threshold: float = 0.3
    person_score_threshold: float = 0.8
    hand_expansion_factor: float = 1.5
    association_iou: float = 0.3
    keyframe_stride: int = 5
    caption_fps: float = 2.0
    seed: int = 0
    # conventions not fixed upstream, exposed for tuning
    keypoint_confidence_floor: float = 0.3
    hand_object_interaction_iou: float = 0.1
    object_object_interaction_iou: float = 0.05
    duplicate_detection_iou: float = 0.9
    pose_filter_max_frames: int = 16
    max_prompt_bytes: int = 262144
    retry_limit: int = 3
    max_in_flight: int = 4
    palette_size: int = 20

    def __post_init__(self) -> None:
        for name in ("motion_threshold", "person_score_threshold", "association_iou"):
            value = getattr(self, name)
            if not (0.0 < value <= 1.0):
                raise ValueError(f"{name} must be in (0, 1], got {value}")
        if self.keyframe_stride < 1:
            raise ValueError("keyframe_stride must be >= 1")
        if self.segment_min_seconds <= 0 or self.segment_max_seconds < self.segment_min_seconds:
            raise ValueError("segment bounds must satisfy 0 < min <= max")
        if self.caption_fps <= 0:
            raise ValueError("caption_fps must be > 0")


def normalize_bbox(
    box_px: tuple[float, float, float, float], meta: VideoMeta
) -> NormalizedBBox:
    """Divide pixel coordinates by frame size, clamping to [0, 1] to absorb rounding.

    Boxes inverted or outside the frame by more than 1 px are rejected.
    """
    left, top, right, bottom = (float(v) for v in box_px)
    if left > right or top > bottom:
        raise InvalidBox(f"inverted pixel box {box_px}")
    if left < -1.0 or top < -1.0 or right > meta.width + 1.0 or bottom > meta.height + 1.0:
        raise InvalidBox(f"pixel box {box_px} outside {meta.width}x{meta.height} frame")
    clamp = lambda v: min(1.0, max(0.0, v))
    return NormalizedBBox(
        clamp(left / meta.width),
        clamp(top / meta.height),
        clamp(right / meta.width),
        clamp(bottom / meta.height),
    )


def denormalize_bbox(box: NormalizedBBox, meta: VideoMeta) -> tuple[float, float, float, float]:
    """Inverse of normalize_bbox up to the clamping applied there."""
    return (
        box.left * meta.width,
        box.top * meta.height,
        box.right * meta.width,
        box.bottom * meta.height,
    )


def iou(a: NormalizedBBox, b: NormalizedBBox) -> float:
    """Intersection over union; 0 when the union has zero area."""
    inter_w = min(a.right, b.right) - max(a.left, b.left)
    inter_h = min(a.bottom, b.bottom) - max(a.top, b.top)
    if inter_w <= 0.0 or inter_h <= 0.0:
        return 0.0
    inter = inter_w * inter_h
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


@dataclass(frozen=True, slots=True)
class IdAssignment:
    """Result of allocate_entity_ids: per-root triples plus object ids."""

    persons: dict[int, EntityId] = field(default_factory=dict)
    left_hands: dict[int, EntityId] = field(default_factory=dict)
    right_hands: dict[int, EntityId] = field(default_factory=dict)
    objects: tuple[EntityId, ...] = ()

    def all_ids(self) -> list[EntityId]:
        ids = []
        for root in sorted(self.persons):
            ids.extend([self.persons[root], self.left_hands[root], self.right_hands[root]])
        ids.extend(self.objects)
        return ids


def allocate_entity_ids(person_roots: list[int], n_objects: int) -> IdAssignment:
    """Assign (root*10, root*10+1, root*10+4) per person and 1000.. for objects."""
    if len(person_roots) != len(set(person_roots)):
        raise IdRangeExceeded("person roots must be distinct")
    if len(person_roots) > PERSON_ROOT_MAX + 1:
        raise IdRangeExceeded(f"more than {PERSON_ROOT_MAX + 1} persons")
    if n_objects < 0:
        raise ValueError("n_objects must be >= 0")
    persons: dict[int, EntityId] = {}
    lefts: dict[int, EntityId] = {}
    rights: dict[int, EntityId] = {}
    for root in person_roots:
        persons[root] = EntityId.person(root)
        lefts[root] = EntityId.left_hand(root)
        rights[root] = EntityId.right_hand(root)
    objects = tuple(EntityId.object(i) for i in range(n_objects))
    return IdAssignment(persons=persons, left_hands=lefts, right_hands=rights, objects=objects)
