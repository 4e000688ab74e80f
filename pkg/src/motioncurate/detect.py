"""First-frame open-vocabulary detection and human-centric hand detection."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, replace
from typing import Optional

from .backends.client import BackendClient
from .core import (
    ContactState,
    ContactValue,
    NormalizedBBox,
    PipelineConfig,
    VideoMeta,
    iou,
    normalize_bbox,
)
from .errors import BackendError, EmptyInventory

logger = logging.getLogger(__name__)

# categories the open-vocab path must not duplicate; humans go through the
# person/pose/hands pipeline instead
PERSON_STOPLIST = frozenset({"person", "man", "woman", "child", "people"})

MAX_PERSONS = 100


@dataclass(frozen=True, slots=True)
class SceneInventory:
    """Distinct lowercase object categories reported for the first frame."""

    categories: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.categories)


@dataclass(frozen=True, slots=True)
class Detection:
    box: NormalizedBBox
    label: str
    score: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score {self.score} outside [0, 1]")


@dataclass(frozen=True, slots=True)
class HandDetection:
    """Hand box with side and contact; person_id is set by association."""

    box: NormalizedBBox
    side: str
    contact: ContactState
    score: float
    person_id: Optional[int] = None


def parse_inventory_reply(text: str) -> list[str]:
    """Split a natural-language category reply on commas/newlines/bullets."""
    parts = re.split(r"[,\n;]+", text)
    seen: list[str] = []
    for part in parts:
        cleaned = part.strip().strip(".-*• \t").lower()
        cleaned = re.sub(r"^\d+\s*[.)]\s*", "", cleaned).strip()
        if cleaned and cleaned not in seen:
            seen.append(cleaned)
    return seen


def list_salient_objects(first_frame: dict, client: BackendClient) -> SceneInventory:
    """Ask the describer for scene categories; person-like labels are routed away.

    Raises EmptyInventory when nothing usable remains, so callers can continue
    with the human-centric pipeline only.
    """
    text = client.describe(first_frame)
    categories = [c for c in parse_inventory_reply(text) if c not in PERSON_STOPLIST]
    if not categories:
        raise EmptyInventory(f"describer reply yielded no object categories: {text!r}")
    return SceneInventory(categories=tuple(categories))


def ground_objects(
    first_frame: dict, inventory: SceneInventory, client: BackendClient
) -> list[Detection]:
    """One grounding query per class; a failed class is skipped, never fatal.

    Results are sorted by (label, left edge, top edge) so downstream ID
    allocation does not depend on backend reply order.
    """
    detections: list[Detection] = []
    for category in inventory.categories:
        try:
            hits = client.ground(first_frame, category)
        except BackendError as exc:
            logger.warning("grounding failed for class %r: %s", category, exc)
            continue
        for hit in hits:
            detections.append(
                Detection(
                    box=NormalizedBBox.from_list(hit["box"]),
                    label=category,
                    score=float(hit["score"]),
                )
            )
    detections.sort(key=lambda d: (d.label, d.box.left, d.box.top))
    return detections


def detect_persons(first_frame: dict, client: BackendClient, cfg: PipelineConfig) -> list[Detection]:
    """Person detections at or above the confidence threshold, capped at 100."""
    hits = client.persons(first_frame)
    kept = [
        Detection(box=NormalizedBBox.from_list(hit["box"]), label="person", score=float(hit["score"]))
        for hit in hits
        if float(hit["score"]) >= cfg.person_score_threshold
    ]
    return kept[:MAX_PERSONS]


def hand_region_from_keypoints(
    keypoints: list[tuple[float, float, float]],
    meta: VideoMeta,
    cfg: PipelineConfig,
) -> Optional[tuple[float, float, float, float]]:
    """Tight pixel box over confident keypoints, center-scaled then frame-clamped.

    Keypoints arrive normalized; confidence below the floor is ignored. Returns
    None when no keypoint is confident enough.
    """
    xs, ys = [], []
    for x, y, confidence in keypoints:
        if confidence < cfg.keypoint_confidence_floor:
            continue
        xs.append(x * meta.width)
        ys.append(y * meta.height)
    if not xs:
        return None
    left, right = min(xs), max(xs)
    top, bottom = min(ys), max(ys)
    cx, cy = (left + right) / 2.0, (top + bottom) / 2.0
    half_w = (right - left) / 2.0 * cfg.hand_expansion_factor
    half_h = (bottom - top) / 2.0 * cfg.hand_expansion_factor
    return (
        max(0.0, cx - half_w),
        max(0.0, cy - half_h),
        min(float(meta.width), cx + half_w),
        min(float(meta.height), cy + half_h),
    )


def hand_regions_from_pose(
    first_frame: dict,
    person_box: NormalizedBBox,
    client: BackendClient,
    meta: VideoMeta,
    cfg: PipelineConfig,
) -> dict[str, tuple[float, float, float, float]]:
    """Expanded per-side hand regions (pixel boxes) from pose keypoints."""
    reply = client.pose(first_frame, person_box.as_list())
    regions: dict[str, tuple[float, float, float, float]] = {}
    for side, key in (("left", "left_hand"), ("right", "right_hand")):
        points = reply.get(key)
        if points is None:
            continue
        region = hand_region_from_keypoints([tuple(p) for p in points], meta, cfg)
        if region is not None:
            regions[side] = region
    return regions


def hand_detections_from_payload(hands: list[dict]) -> list[HandDetection]:
    """Convert hands-endpoint payload entries into HandDetection values."""
    out = []
    for hand in hands:
        contact_value = ContactValue(hand["contact"])
        held = hand.get("held_object_box")
        if contact_value is ContactValue.OBJECT_CONTACT and held is None:
            logger.warning("object_contact without held box; downgrading to no_contact")
            contact_value, held = ContactValue.NO_CONTACT, None
        if contact_value is not ContactValue.OBJECT_CONTACT:
            held = None
        contact = ContactState(
            value=contact_value,
            held_object_box=None if held is None else NormalizedBBox.from_list(held),
        )
        out.append(
            HandDetection(
                box=NormalizedBBox.from_list(hand["box"]),
                side=hand["side"],
                contact=contact,
                score=float(hand.get("score", 1.0)),
            )
        )
    return out


def associate_hands(
    pose_regions: dict[int, dict[str, tuple[float, float, float, float]]],
    hand_detections: list[HandDetection],
    meta: VideoMeta,
    cfg: PipelineConfig,
) -> list[HandDetection]:
    """Greedy highest-IoU matching of hand boxes to same-side pose regions.

    pose_regions maps person root -> side -> pixel region. Pairs at or below
    the IoU gate stay unmatched; unmatched detections are discarded. Ties break
    toward the lower person root.
    """
    candidates: list[tuple[float, int, int]] = []
    region_boxes: dict[tuple[int, str], NormalizedBBox] = {}
    for root, sides in pose_regions.items():
        for side, region in sides.items():
            region_boxes[(root, side)] = normalize_bbox(region, meta)

    for det_index, det in enumerate(hand_detections):
        for (root, side), region_box in region_boxes.items():
            if side != det.side:
                continue
            overlap = iou(det.box, region_box)
            if overlap > cfg.association_iou:
                candidates.append((overlap, root, det_index))

    candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
    matched: list[HandDetection] = []
    used_slots: set[tuple[int, str]] = set()
    used_detections: set[int] = set()
    for overlap, root, det_index in candidates:
        det = hand_detections[det_index]
        slot = (root, det.side)
        if det_index in used_detections or slot in used_slots:
            continue
        used_detections.add(det_index)
        used_slots.add(slot)
        matched.append(replace(det, person_id=root))
    matched.sort(key=lambda d: (d.person_id, d.side))
    return matched
