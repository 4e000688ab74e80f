"""Motion-annotation JSON assembly, interaction inference, and overlay plans.

The JSON writer is hand-rolled so output is byte-stable: fixed key order,
exactly six decimal places, "\n" newlines, no locale or library drift.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Optional

import jsonschema

from .core import ContactValue, EntityKind, NormalizedBBox, PipelineConfig, Tracklet, iou
from .errors import SchemaViolation

OBJECT_KEY_TEMPLATE = "object_{:02d}"


def assign_object_keys(tracklets: list[Tracklet]) -> dict[int, str]:
    """Document keys in first-appearance order; entities never seen are dropped."""
    appearances = []
    for tracklet in tracklets:
        first = next((t for t, box in enumerate(tracklet.boxes) if box is not None), None)
        if first is not None:
            appearances.append((first, tracklet.id.raw))
    appearances.sort()
    return {raw: OBJECT_KEY_TEMPLATE.format(n) for n, (_, raw) in enumerate(appearances)}


def compute_interactions(
    tracklets: list[Tracklet], cfg: PipelineConfig
) -> list[dict[int, set[int]]]:
    """Symmetric per-frame interaction relation over entity raw ids.

    A holding hand links to the overlapping tracked object; a self/other
    contact links to the own/nearest person; non-hand entities that overlap
    enough are spatially related.
    """
    if not tracklets:
        return []
    frame_count = tracklets[0].frame_count
    if any(t.frame_count != frame_count for t in tracklets):
        raise SchemaViolation("tracklets disagree on frame count")

    by_raw = {t.id.raw: t for t in tracklets}
    hands = [t for t in tracklets if t.id.is_hand]
    persons = [t for t in tracklets if t.id.kind is EntityKind.PERSON]
    objects = [t for t in tracklets if t.id.kind is EntityKind.OBJECT]
    non_hands = persons + objects

    relation: list[dict[int, set[int]]] = [
        {raw: set() for raw in by_raw} for _ in range(frame_count)
    ]

    def link(frame: int, a: int, b: int) -> None:
        if a == b:
            return
        relation[frame][a].add(b)
        relation[frame][b].add(a)

    for frame in range(frame_count):
        for hand in hands:
            if hand.boxes[frame] is None or hand.contact_states is None:
                continue
            contact = hand.contact_states[frame]
            if contact is None:
                continue
            if contact.value is ContactValue.OBJECT_CONTACT:
                held = contact.held_object_box
                best: Optional[int] = None
                best_iou = cfg.hand_object_interaction_iou
                for obj in objects:
                    box = obj.boxes[frame]
                    if box is None:
                        continue
                    overlap = iou(box, held)
                    if overlap > best_iou:
                        best, best_iou = obj.id.raw, overlap
                if best is not None:
                    link(frame, hand.id.raw, best)
            elif contact.value is ContactValue.SELF_CONTACT:
                own = hand.id.root * 10
                if own in by_raw and by_raw[own].boxes[frame] is not None:
                    link(frame, hand.id.raw, own)
            elif contact.value is ContactValue.OTHER_CONTACT:
                other = _nearest_person(hand, frame, persons, exclude_root=hand.id.root)
                if other is not None:
                    link(frame, hand.id.raw, other)

        for i, a in enumerate(non_hands):
            box_a = a.boxes[frame]
            if box_a is None:
                continue
            for b in non_hands[i + 1 :]:
                box_b = b.boxes[frame]
                if box_b is None:
                    continue
                if iou(box_a, box_b) > cfg.object_object_interaction_iou:
                    link(frame, a.id.raw, b.id.raw)
    return relation


def _nearest_person(
    hand: Tracklet, frame: int, persons: list[Tracklet], *, exclude_root: int
) -> Optional[int]:
    hand_box = hand.boxes[frame]
    hx, hy = hand_box.center
    best, best_dist = None, math.inf
    for person in persons:
        if person.id.root == exclude_root:
            continue
        box = person.boxes[frame]
        if box is None:
            continue
        px, py = box.center
        dist = math.hypot(px - hx, py - hy)
        if dist < best_dist:
            best, best_dist = person.id.raw, dist
    return best


def build_motion_document(
    tracklets: list[Tracklet], interactions: list[dict[int, set[int]]]
) -> dict:
    """Plain-dict document with rounded coordinates, ready for serialization."""
    if tracklets and len(interactions) != tracklets[0].frame_count:
        raise SchemaViolation(
            f"interactions cover {len(interactions)} frames, "
            f"tracklets {tracklets[0].frame_count}"
        )
    keys = assign_object_keys(tracklets)
    document: dict[str, dict] = {}
    ordered = sorted((key, raw) for raw, key in keys.items())
    by_raw = {t.id.raw: t for t in tracklets}
    for key, raw in ordered:
        tracklet = by_raw[raw]
        bbox = [
            None if box is None else [round(v, 6) for v in box.as_list()]
            for box in tracklet.boxes
        ]
        frames_interactions: list[Optional[list[str]]] = []
        for frame in range(tracklet.frame_count):
            peers = sorted(
                keys[peer] for peer in interactions[frame].get(raw, ()) if peer in keys
            )
            frames_interactions.append(peers or None)
        document[key] = {
            "bbox": bbox,
            "object_type": tracklet.object_type,
            "interactions": frames_interactions,
        }
    return document


def serialize_motion_json(document: dict) -> str:
    """Canonical text form: fixed key order, 6-decimal reals, \n line endings."""
    if not document:
        return "{}"
    blocks = []
    for key, entry in document.items():
        bbox = ", ".join(_format_box(b) for b in entry["bbox"])
        inter = ", ".join(_format_interaction(i) for i in entry["interactions"])
        blocks.append(
            f'  "{key}": {{\n'
            f'    "bbox": [{bbox}],\n'
            f'    "object_type": {json.dumps(entry["object_type"], ensure_ascii=False)},\n'
            f'    "interactions": [{inter}]\n'
            f"  }}"
        )
    return "{\n" + ",\n".join(blocks) + "\n}"


def _format_box(box: Optional[list[float]]) -> str:
    if box is None:
        return "null"
    return "[" + ", ".join(f"{v:.6f}" for v in box) + "]"


def _format_interaction(entry: Optional[list[str]]) -> str:
    if entry is None:
        return "null"
    return "[" + ", ".join(json.dumps(k) for k in entry) + "]"


def build_motion_json(
    tracklets: list[Tracklet], interactions: list[dict[int, set[int]]]
) -> bytes:
    """Canonical byte sequence of the per-video annotation document."""
    document = build_motion_document(tracklets, interactions)
    validate_motion_document(document)
    return serialize_motion_json(document).encode("utf-8")


def parse_motion_json(text: str | bytes) -> dict:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    return json.loads(text)


@lru_cache(maxsize=1)
def _document_validator() -> jsonschema.Draft202012Validator:
    raw = resources.files("motioncurate.schemas").joinpath("motion_annotation.schema.json")
    return jsonschema.Draft202012Validator(json.loads(raw.read_text()))


def validate_motion_document(document: dict) -> None:
    """Schema check plus the cross-entry constraints a schema cannot express."""
    errors = sorted(_document_validator().iter_errors(document), key=str)
    if errors:
        raise SchemaViolation(f"motion document invalid: {errors[0].message}")
    lengths = set()
    for key, entry in document.items():
        lengths.add(len(entry["bbox"]))
        lengths.add(len(entry["interactions"]))
        for frame, peers in enumerate(entry["interactions"]):
            if peers is None:
                continue
            for peer in peers:
                if peer not in document:
                    raise SchemaViolation(f"{key} interacts with unknown {peer} at frame {frame}")
                if peer == key:
                    raise SchemaViolation(f"{key} interacts with itself at frame {frame}")
    if len(lengths) > 1:
        raise SchemaViolation(f"per-frame lists disagree on length: {sorted(lengths)}")


def build_id_map(tracklets: list[Tracklet]) -> dict:
    """Sidecar mapping from document keys back to internal entity ids."""
    keys = assign_object_keys(tracklets)
    by_raw = {t.id.raw: t for t in tracklets}
    return {
        key: {
            "entity_id": raw,
            "kind": by_raw[raw].id.kind.value,
            "object_type": by_raw[raw].object_type,
        }
        for raw, key in sorted(keys.items(), key=lambda kv: kv[1])
    }


@dataclass(frozen=True, slots=True)
class DrawCommand:
    box: NormalizedBBox
    label: str
    color_index: int


@dataclass
class OverlayPlan:
    """Per-frame draw commands; color index is a stable function of entity id."""

    frames: list[list[DrawCommand]] = field(default_factory=list)
    palette_size: int = 20

    def to_payload(self) -> dict:
        return {
            "palette_size": self.palette_size,
            "frames": [
                [
                    {
                        "box": [round(v, 6) for v in cmd.box.as_list()],
                        "label": cmd.label,
                        "color_index": cmd.color_index,
                    }
                    for cmd in frame
                ]
                for frame in self.frames
            ],
        }


def render_overlay_plan(tracklets: list[Tracklet], cfg: PipelineConfig) -> OverlayPlan:
    """One command per present box; absent boxes draw nothing that frame."""
    frame_count = tracklets[0].frame_count if tracklets else 0
    plan = OverlayPlan(palette_size=cfg.palette_size)
    for frame in range(frame_count):
        commands = []
        for tracklet in sorted(tracklets, key=lambda t: t.id.raw):
            box = tracklet.boxes[frame]
            if box is None:
                continue
            commands.append(
                DrawCommand(
                    box=box,
                    label=tracklet.object_type,
                    color_index=tracklet.id.raw % cfg.palette_size,
                )
            )
        plan.frames.append(commands)
    return plan
