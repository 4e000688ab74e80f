"""Two-stage temporal tracking: init from first-frame detections, backend
propagation, and hand refinement at every keyframe."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .backends.client import TrackerClient
from .core import (
    ContactState,
    EntityId,
    EntityKind,
    NormalizedBBox,
    PipelineConfig,
    Tracklet,
    iou,
)
from .detect import Detection, HandDetection
from .errors import BackendError, TrackAbort

logger = logging.getLogger(__name__)


@dataclass
class TrackSession:
    """Mutable tracking state for one video segment, owned by one worker.

    Frames are segment-local (0 = first frame of the segment). Every
    registered entity has a slot in every frame's state map; None means the
    tracker lost it there.
    """

    video_id: str
    frame_count: int
    keyframe_stride: int
    entities: dict[int, EntityId] = field(default_factory=dict)
    labels: dict[int, str] = field(default_factory=dict)
    state: dict[int, dict[int, Optional[NormalizedBBox]]] = field(default_factory=dict)
    contacts: dict[int, dict[int, ContactState]] = field(default_factory=dict)
    aborted_at: Optional[int] = None

    def register_entity(
        self,
        entity: EntityId,
        label: str,
        frame: int,
        box: NormalizedBBox,
        tracker: TrackerClient,
    ) -> None:
        new = entity.raw not in self.entities
        self.entities[entity.raw] = entity
        self.labels[entity.raw] = label
        for t in range(self.frame_count):
            self.state.setdefault(t, {})
            if new and entity.raw not in self.state[t]:
                self.state[t][entity.raw] = None
        self.state[frame][entity.raw] = box
        tracker.register(entity.raw, frame, box)

    def box_at(self, raw: int, frame: int) -> Optional[NormalizedBBox]:
        return self.state.get(frame, {}).get(raw)

    def record_contact(self, raw: int, frame: int, contact: ContactState) -> None:
        self.contacts.setdefault(raw, {})[frame] = contact

    def keyframes(self) -> list[int]:
        return list(range(0, self.frame_count, self.keyframe_stride))


def dedupe_detections(detections: list[Detection], duplicate_iou: float) -> list[Detection]:
    """Collapse same-label near-identical boxes, keeping the higher score."""
    ranked = sorted(detections, key=lambda d: (d.label, -d.score, d.box.left, d.box.top))
    kept: list[Detection] = []
    for det in ranked:
        duplicate = any(
            k.label == det.label and iou(k.box, det.box) > duplicate_iou for k in kept
        )
        if not duplicate:
            kept.append(det)
    kept.sort(key=lambda d: (d.label, d.box.left, d.box.top))
    return kept


def init_tracks(
    detections: list[Detection],
    hand_detections: list[HandDetection],
    persons: list[Detection],
    tracker: TrackerClient,
    cfg: PipelineConfig,
    *,
    video_id: str,
    frame_count: int,
) -> TrackSession:
    """Register persons, their hands, and deduplicated objects as frame-0 prompts.

    Person roots follow detection order; objects count up from the object base.
    """
    session = TrackSession(
        video_id=video_id, frame_count=frame_count, keyframe_stride=cfg.keyframe_stride
    )
    # root 0 stays unused so no entity gets track id 0 (background in common trackers)
    for offset, person in enumerate(persons):
        session.register_entity(EntityId.person(offset + 1), "person", 0, person.box, tracker)
    for hand in hand_detections:
        if hand.person_id is None:
            continue
        entity = EntityId.hand(hand.person_id, hand.side)
        session.register_entity(entity, f"{hand.side}_hand", 0, hand.box, tracker)
        session.record_contact(entity.raw, 0, hand.contact)
    for index, det in enumerate(dedupe_detections(detections, cfg.duplicate_detection_iou)):
        session.register_entity(EntityId.object(index), det.label, 0, det.box, tracker)
    return session


def propagate(session: TrackSession, frames: Iterable[int], tracker: TrackerClient) -> TrackSession:
    """Advance the tracker through the given frames, writing each slot once.

    A backend failure raises TrackAbort; frames already advanced stay in the
    session so the video can be flagged with partial results.
    """
    for frame in frames:
        try:
            boxes = tracker.advance(frame)
        except BackendError as exc:
            session.aborted_at = frame
            raise TrackAbort(f"tracker failed at frame {frame} of {session.video_id}: {exc}") from exc
        slot = session.state.setdefault(frame, {})
        for raw in session.entities:
            slot[raw] = boxes.get(raw)
    return session


def refine_at_keyframe(
    session: TrackSession,
    frame: int,
    fresh_hands: list[HandDetection],
    tracker: TrackerClient,
    cfg: PipelineConfig,
) -> None:
    """Re-pin hand tracks to fresh detections at one keyframe.

    Fresh boxes matching an existing same-side hand track (IoU above the gate)
    replace that track's prompt. Unmatched fresh hands whose center falls
    inside a tracked person create or replace that person's hand entity.
    """
    hand_tracks = {
        raw: entity for raw, entity in session.entities.items() if entity.is_hand
    }
    side_of = {EntityKind.LEFT_HAND: "left", EntityKind.RIGHT_HAND: "right"}

    candidates: list[tuple[float, int, int]] = []
    for det_index, det in enumerate(fresh_hands):
        for raw, entity in hand_tracks.items():
            if side_of[entity.kind] != det.side:
                continue
            current = session.box_at(raw, frame)
            if current is None:
                continue
            overlap = iou(det.box, current)
            if overlap > cfg.association_iou:
                candidates.append((overlap, raw, det_index))

    candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
    used_tracks: set[int] = set()
    used_detections: set[int] = set()
    for _, raw, det_index in candidates:
        if raw in used_tracks or det_index in used_detections:
            continue
        used_tracks.add(raw)
        used_detections.add(det_index)
        det = fresh_hands[det_index]
        session.state[frame][raw] = det.box
        tracker.register(raw, frame, det.box)
        session.record_contact(raw, frame, det.contact)

    for det_index, det in enumerate(fresh_hands):
        if det_index in used_detections:
            continue
        root = _containing_person(session, frame, det.box)
        if root is None:
            continue
        entity = EntityId.hand(root, det.side)
        if entity.raw in used_tracks:
            continue
        used_tracks.add(entity.raw)
        session.register_entity(entity, f"{det.side}_hand", frame, det.box, tracker)
        session.record_contact(entity.raw, frame, det.contact)


def _containing_person(
    session: TrackSession, frame: int, hand_box: NormalizedBBox
) -> Optional[int]:
    cx, cy = hand_box.center
    roots = []
    for raw, entity in session.entities.items():
        if entity.kind is not EntityKind.PERSON:
            continue
        box = session.box_at(raw, frame)
        if box is None:
            continue
        if box.left <= cx <= box.right and box.top <= cy <= box.bottom:
            roots.append(entity.root)
    return min(roots) if roots else None


def run_two_stage_tracking(
    session: TrackSession,
    tracker: TrackerClient,
    hands_at_frame: Callable[[int], Optional[list[HandDetection]]],
    cfg: PipelineConfig,
) -> TrackSession:
    """Propagate frame by frame, refining hands at every keyframe.

    hands_at_frame returns None on detection failure; that keyframe is skipped
    and propagation continues.
    """
    for frame in range(1, session.frame_count):
        propagate(session, [frame], tracker)
        if frame % session.keyframe_stride == 0:
            fresh = hands_at_frame(frame)
            if fresh is None:
                logger.warning(
                    "skipping keyframe %d of %s: hand detection failed", frame, session.video_id
                )
                continue
            refine_at_keyframe(session, frame, fresh, tracker, cfg)
    return session


def assemble_tracklets(session: TrackSession) -> list[Tracklet]:
    """One tracklet per entity; hand contacts forward-fill between keyframes."""
    tracklets = []
    for raw in sorted(session.entities):
        entity = session.entities[raw]
        boxes = tuple(session.box_at(raw, t) for t in range(session.frame_count))
        contact_states = None
        if entity.is_hand:
            recorded = session.contacts.get(raw, {})
            filled: list[Optional[ContactState]] = []
            current: Optional[ContactState] = None
            for t in range(session.frame_count):
                if t in recorded:
                    current = recorded[t]
                filled.append(current)
            contact_states = tuple(filled)
        tracklets.append(
            Tracklet(
                id=entity,
                object_type=session.labels[raw],
                boxes=boxes,
                contact_states=contact_states,
            )
        )
    return tracklets
