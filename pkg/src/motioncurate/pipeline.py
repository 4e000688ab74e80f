"""Per-video stage orchestration, run manifest, and output tree layout."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import annotate as annotate_mod
from . import camera_filter as camera_mod
from . import detect as detect_mod
from . import generate as generate_mod
from . import track as track_mod
from .backends.client import BackendClient, TrackerClient
from .backends.protocol import canonical_json, encode_frame
from .core import PipelineConfig, VideoMeta
from .errors import BackendError, EmptyInventory, MotionCurateError
from .preprocess import (
    SYNTH_SUFFIX,
    FrameSet,
    SegmentPlan,
    extract_frames,
    open_video,
    sample_segment,
)

logger = logging.getLogger(__name__)

VIDEO_EXTENSIONS = (".mp4", ".avi", ".mov", ".mkv", ".webm")

STAGES = ("sampled", "filtered", "tracked", "annotated", "captioned", "qa")


def config_hash(cfg: PipelineConfig, model_tag: str) -> str:
    payload = {"pipeline": dataclasses.asdict(cfg), "model_tag": model_tag}
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def derive_seed(seed: int, video_id: str, purpose: str) -> int:
    digest = hashlib.sha256(f"{seed}:{video_id}:{purpose}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class VideoRecord:
    """Manifest entry for one video: stage artifacts and failure reasons."""

    status: str = "pending"
    stages: dict[str, Any] = field(default_factory=dict)
    failure: Optional[dict[str, str]] = None
    outputs: dict[str, str] = field(default_factory=dict)

    def to_payload(self) -> dict:
        return {
            "status": self.status,
            "stages": self.stages,
            "failure": self.failure,
            "outputs": self.outputs,
        }

    @classmethod
    def from_payload(cls, raw: dict) -> "VideoRecord":
        return cls(
            status=raw.get("status", "pending"),
            stages=dict(raw.get("stages", {})),
            failure=raw.get("failure"),
            outputs=dict(raw.get("outputs", {})),
        )


@dataclass
class RunManifest:
    """Run-level bookkeeping; resuming skips stages recorded under the same config hash."""

    config_hash: str
    videos: dict[str, VideoRecord] = field(default_factory=dict)

    def to_payload(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "videos": {vid: rec.to_payload() for vid, rec in sorted(self.videos.items())},
        }

    def save(self, path: Path) -> None:
        path.write_text(json.dumps(self.to_payload(), indent=2, sort_keys=True) + "\n", "utf-8")

    @classmethod
    def load(cls, path: Path) -> "RunManifest":
        raw = json.loads(path.read_text(encoding="utf-8"))
        manifest = cls(config_hash=raw["config_hash"])
        for vid, rec in raw.get("videos", {}).items():
            manifest.videos[vid] = VideoRecord.from_payload(rec)
        return manifest


def video_id_for(path: Path) -> str:
    name = path.name
    if name.endswith(SYNTH_SUFFIX):
        return name[: -len(SYNTH_SUFFIX)]
    return path.stem


def discover_videos(video_dir: Path) -> list[Path]:
    paths = []
    for entry in sorted(Path(video_dir).iterdir()):
        if entry.name.endswith(SYNTH_SUFFIX) or entry.suffix.lower() in VIDEO_EXTENSIONS:
            paths.append(entry)
    return paths


class FramePayloadCache:
    """Encodes each frame for the wire at most once per video."""

    def __init__(self, frames: FrameSet):
        self._frames = frames
        self._cache: dict[int, dict] = {}

    def get(self, source_index: int) -> Optional[dict]:
        if source_index in self._cache:
            return self._cache[source_index]
        raster = self._frames.get(source_index)
        if raster is None:
            return None
        local = self._frames.local_index(source_index)
        payload = encode_frame(raster, local)
        self._cache[source_index] = payload
        return payload


@dataclass
class CurateContext:
    cfg: PipelineConfig
    client: BackendClient
    out_dir: Path
    run_hash: str
    model_tag: str = "llm"


def curate_video(path: Path, record: VideoRecord, ctx: CurateContext) -> VideoRecord:
    """Run all stages for one video, reusing durable artifacts when resuming."""
    video_id = video_id_for(path)
    cfg = ctx.cfg
    try:
        decoder = open_video(path)
        meta = decoder.meta()
        plan = _stage_sample(record, meta, cfg, video_id)
        frames = extract_frames(decoder, plan)
        payloads = FramePayloadCache(frames)

        report = _stage_filter(record, frames, payloads, ctx)
        if report["excluded"]:
            record.status = "excluded"
            record.failure = {"stage": "filtered", "reason": "camera_motion"}
            return record

        document, overlay_payload = _stage_track_and_annotate(
            record, frames, payloads, ctx, video_id
        )
        caption = _stage_caption(record, document, overlay_payload, frames, payloads, ctx, video_id)
        _stage_qa(record, caption, frames, payloads, ctx, video_id)
        record.status = "done"
    except MotionCurateError as exc:
        stage = _first_missing_stage(record)
        logger.warning("video %s failed at %s: %s", video_id, stage, exc)
        record.status = "failed"
        record.failure = {"stage": stage, "reason": f"{type(exc).__name__}: {exc}"}
    return record


def _first_missing_stage(record: VideoRecord) -> str:
    for stage in STAGES:
        if stage not in record.stages:
            return stage
    return "qa"


def _stage_sample(
    record: VideoRecord, meta: VideoMeta, cfg: PipelineConfig, video_id: str
) -> SegmentPlan:
    if "sampled" in record.stages:
        raw = record.stages["sampled"]
        return SegmentPlan(
            t_start=raw["t_start"],
            t_s=raw["t_s"],
            frame_indices=tuple(raw["frame_indices"]),
            caption_frame_indices=tuple(raw["caption_frame_indices"]),
        )
    rng = np.random.default_rng(derive_seed(cfg.seed, video_id, "sample"))
    plan = sample_segment(meta, cfg, rng)
    record.stages["sampled"] = {
        "t_start": plan.t_start,
        "t_s": plan.t_s,
        "frame_indices": list(plan.frame_indices),
        "caption_frame_indices": list(plan.caption_frame_indices),
    }
    return plan


def _stage_filter(
    record: VideoRecord, frames: FrameSet, payloads: FramePayloadCache, ctx: CurateContext
) -> dict:
    if "filtered" in record.stages:
        return record.stages["filtered"]
    picked = camera_mod.filter_frame_indices(
        frames.plan.frame_indices, ctx.cfg.pose_filter_max_frames
    )
    frame_payloads = [p for i in picked if (p := payloads.get(i)) is not None]
    poses_raw = ctx.client.camera_poses(frame_payloads)
    poses = [
        camera_mod.CameraPose(rotation=np.asarray(p["rotation"]), translation=np.asarray(p["translation"]))
        for p in poses_raw
    ]
    report = camera_mod.filter_video(poses, ctx.cfg)
    record.stages["filtered"] = {
        "score": report.score,
        "excluded": report.excluded,
        "translation_deltas": list(report.translation_deltas),
        "rotation_deltas": list(report.rotation_deltas),
    }
    return record.stages["filtered"]


def _stage_track_and_annotate(
    record: VideoRecord,
    frames: FrameSet,
    payloads: FramePayloadCache,
    ctx: CurateContext,
    video_id: str,
) -> tuple[dict, dict]:
    motion_path = ctx.out_dir / f"{video_id}.motion.json"
    overlay_path = ctx.out_dir / f"{video_id}.overlay.json"
    if (
        "annotated" in record.stages
        and motion_path.exists()
        and overlay_path.exists()
    ):
        document = annotate_mod.parse_motion_json(motion_path.read_bytes())
        overlay_payload = json.loads(overlay_path.read_text(encoding="utf-8"))
        return document, overlay_payload

    cfg = ctx.cfg
    meta = frames.meta
    first_index = frames.plan.frame_indices[0]
    first_payload = payloads.get(first_index)
    if first_payload is None:
        raise MotionCurateError(f"first segment frame of {video_id} is undecodable")

    try:
        inventory = detect_mod.list_salient_objects(first_payload, ctx.client)
    except EmptyInventory:
        inventory = detect_mod.SceneInventory(categories=())
    detections = (
        detect_mod.ground_objects(first_payload, inventory, ctx.client) if inventory else []
    )
    persons = detect_mod.detect_persons(first_payload, ctx.client, cfg)

    pose_regions: dict[int, dict[str, tuple[float, float, float, float]]] = {}
    for offset, person in enumerate(persons):
        # roots must line up with the ids init_tracks assigns (first person is 1)
        pose_regions[offset + 1] = detect_mod.hand_regions_from_pose(
            first_payload, person.box, ctx.client, meta, cfg
        )
    raw_hands = detect_mod.hand_detections_from_payload(ctx.client.hands(first_payload))
    hand_detections = detect_mod.associate_hands(pose_regions, raw_hands, meta, cfg)

    tracker = TrackerClient(ctx.client, session_id=video_id)
    session = track_mod.init_tracks(
        detections,
        hand_detections,
        persons,
        tracker,
        cfg,
        video_id=video_id,
        frame_count=frames.frame_count,
    )

    def hands_at(local_frame: int) -> Optional[list[detect_mod.HandDetection]]:
        source_index = frames.plan.frame_indices[local_frame]
        payload = payloads.get(source_index)
        if payload is None:
            return None
        try:
            return detect_mod.hand_detections_from_payload(ctx.client.hands(payload))
        except BackendError:
            return None

    track_mod.run_two_stage_tracking(session, tracker, hands_at, cfg)
    record.stages["tracked"] = {"entities": sorted(session.entities)}
    tracklets = track_mod.assemble_tracklets(session)

    interactions = annotate_mod.compute_interactions(tracklets, cfg)
    motion_bytes = annotate_mod.build_motion_json(tracklets, interactions)
    motion_path.write_bytes(motion_bytes)
    record.outputs["motion"] = motion_path.name

    idmap_path = ctx.out_dir / f"{video_id}.idmap.json"
    idmap = {"config_hash": ctx.run_hash, "entities": annotate_mod.build_id_map(tracklets)}
    idmap_path.write_text(json.dumps(idmap, indent=2, sort_keys=True) + "\n", "utf-8")
    record.outputs["idmap"] = idmap_path.name

    overlay_payload = annotate_mod.render_overlay_plan(tracklets, cfg).to_payload()
    overlay_path.write_text(json.dumps(overlay_payload, indent=2, sort_keys=True) + "\n", "utf-8")
    record.outputs["overlay"] = overlay_path.name

    record.stages["annotated"] = {"objects": len(annotate_mod.parse_motion_json(motion_bytes))}
    return annotate_mod.parse_motion_json(motion_bytes), overlay_payload


def _caption_payloads(frames: FrameSet, payloads: FramePayloadCache) -> list[dict]:
    out = []
    for index in frames.plan.caption_frame_indices:
        payload = payloads.get(index)
        if payload is not None:
            out.append(payload)
    return out


def _stage_caption(
    record: VideoRecord,
    document: dict,
    overlay_payload: dict,
    frames: FrameSet,
    payloads: FramePayloadCache,
    ctx: CurateContext,
    video_id: str,
) -> generate_mod.CaptionRecord:
    caption_path = ctx.out_dir / f"{video_id}.caption.json"
    if "captioned" in record.stages and caption_path.exists():
        raw = json.loads(caption_path.read_text(encoding="utf-8"))
        return generate_mod.CaptionRecord(
            video_id=raw["video_id"],
            caption=raw["caption"],
            fingerprint=raw["fingerprint"],
            model_tag=raw["model_tag"],
        )
    prompt = generate_mod.build_caption_prompt(
        document,
        _caption_payloads(frames, payloads),
        overlay_payload,
        max_prompt_bytes=ctx.cfg.max_prompt_bytes,
    )
    caption = generate_mod.generate_caption(
        prompt, ctx.client, video_id=video_id, model_tag=ctx.model_tag
    )
    payload = caption.to_payload()
    payload["config_hash"] = ctx.run_hash
    payload["thinning_stride"] = prompt.thinning_stride
    caption_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", "utf-8")
    record.outputs["caption"] = caption_path.name
    record.stages["captioned"] = {"retries": ctx.client.last_retry_count}
    return caption


def _stage_qa(
    record: VideoRecord,
    caption: generate_mod.CaptionRecord,
    frames: FrameSet,
    payloads: FramePayloadCache,
    ctx: CurateContext,
    video_id: str,
) -> None:
    qa_path = ctx.out_dir / f"{video_id}.qa.jsonl"
    if "qa" in record.stages and qa_path.exists():
        return
    qa_prompt = generate_mod.build_qa_prompt(caption.caption, _caption_payloads(frames, payloads))
    reply = ctx.client.llm(qa_prompt.prompt, qa_prompt.frames, None)
    parsed = generate_mod.parse_qa_output(reply)

    rng = np.random.default_rng(derive_seed(ctx.cfg.seed, video_id, "shuffle"))
    items = []
    for n, item in enumerate(parsed.items):
        shuffled = generate_mod.shuffle_choices(item, rng)
        items.append(
            generate_mod.QAItem(
                video_id=video_id,
                question=shuffled.question,
                options=shuffled.options,
                answer_index=shuffled.correct_index,
                category=generate_mod.categorize_qa(shuffled.question),
                provenance=f"{video_id}:q{n}:tpl{qa_prompt.fingerprint[:8]}:cfg{ctx.run_hash[:8]}",
            )
        )
    report = generate_mod.validate_qa(items)
    qa_path.write_text(
        "".join(item.to_json_line() + "\n" for item in report.accepted), "utf-8"
    )
    record.outputs["qa"] = qa_path.name
    record.stages["qa"] = {
        "parsed": len(parsed.items),
        "dropped_in_parse": parsed.dropped,
        "accepted": len(report.accepted),
        "rejected": len(report.rejected),
        "position_counts": report.position_counts,
        "position_flags": report.position_flags,
    }


def curate_run(
    video_dir: Path,
    out_dir: Path,
    cfg: PipelineConfig,
    client: BackendClient,
    *,
    model_tag: str = "llm",
    workers: int = 1,
    resume: bool = False,
) -> RunManifest:
    """Curate every video in the directory; per-video failures are nonfatal."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    run_hash = config_hash(cfg, model_tag)
    manifest_path = out_dir / "manifest.json"

    manifest = RunManifest(config_hash=run_hash)
    if resume and manifest_path.exists():
        previous = RunManifest.load(manifest_path)
        if previous.config_hash == run_hash:
            manifest = previous
        else:
            logger.warning("config hash changed; ignoring previous manifest")

    ctx = CurateContext(
        cfg=cfg, client=client, out_dir=out_dir, run_hash=run_hash, model_tag=model_tag
    )
    videos = discover_videos(video_dir)
    jobs: list[tuple[Path, VideoRecord]] = []
    for path in videos:
        video_id = video_id_for(path)
        record = manifest.videos.get(video_id) if resume else None
        if record is None:
            record = VideoRecord()
        if resume and record.status in ("done", "excluded"):
            logger.info("skipping %s: already %s", video_id, record.status)
            manifest.videos[video_id] = record
            continue
        if record.status == "failed":
            record.status, record.failure = "pending", None
        manifest.videos[video_id] = record
        jobs.append((path, record))

    if workers <= 1:
        for path, record in jobs:
            curate_video(path, record, ctx)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda job: curate_video(job[0], job[1], ctx), jobs))

    _merge_qa(manifest, out_dir)
    manifest.save(manifest_path)
    return manifest


def _merge_qa(manifest: RunManifest, out_dir: Path) -> None:
    lines = []
    for video_id in sorted(manifest.videos):
        per_video = out_dir / f"{video_id}.qa.jsonl"
        if manifest.videos[video_id].status == "done" and per_video.exists():
            lines.extend(per_video.read_text(encoding="utf-8").splitlines())
    (out_dir / "qa.jsonl").write_text("".join(line + "\n" for line in lines), "utf-8")
