"""Automated motion-annotation pipeline over mockable model backends."""

from .core import (
    ContactState,
    ContactValue,
    EntityId,
    EntityKind,
    NormalizedBBox,
    PipelineConfig,
    Tracklet,
    VideoMeta,
    allocate_entity_ids,
    iou,
    normalize_bbox,
)

__all__ = [
    "ContactState",
    "ContactValue",
    "EntityId",
    "EntityKind",
    "NormalizedBBox",
    "PipelineConfig",
    "Tracklet",
    "VideoMeta",
    "allocate_entity_ids",
    "iou",
    "normalize_bbox",
]

__version__ = "0.1.0"
