import hashlib
import json

import pytest

from motioncurate.backends.client import BackendClient
from motioncurate.backends.mock import MockScript, MockTransport
from motioncurate.core import PipelineConfig
from motioncurate.demo import demo_mock_script, write_demo_workspace
from motioncurate.pipeline import (
    RunManifest,
    config_hash,
    curate_run,
    derive_seed,
    discover_videos,
    video_id_for,
)

CFG = PipelineConfig(seed=7)


def tree_digest(out_dir) -> dict[str, str]:
    return {
        f.name: hashlib.sha256(f.read_bytes()).hexdigest()
        for f in sorted(out_dir.iterdir())
        if f.is_file()
    }


def run_demo(tmp_path, name: str, script: dict | None = None, cfg: PipelineConfig = CFG,
             resume: bool = False):
    root = tmp_path / name
    paths = write_demo_workspace(root)
    if script is None:
        script = demo_mock_script()
    transport = MockTransport(MockScript.from_dict(script))
    client = BackendClient(transport)
    manifest = curate_run(paths["videos"], root / "out", cfg, client, resume=resume)
    return root, manifest, transport


class TestCurateRun:
    def test_all_videos_complete(self, tmp_path):
        _, manifest, _ = run_demo(tmp_path, "a")
        assert {r.status for r in manifest.videos.values()} == {"done"}
        assert set(manifest.videos) == {"vid_kitchen", "vid_table"}

    def test_two_runs_byte_identical(self, tmp_path):
        root_a, _, _ = run_demo(tmp_path, "a")
        root_b, _, _ = run_demo(tmp_path, "b")
        assert tree_digest(root_a / "out") == tree_digest(root_b / "out")

    def test_keyframe_hand_calls(self, tmp_path):
        _, _, transport = run_demo(tmp_path, "a")
        frames = [c["frame"]["frame_index"] for c in transport.calls_for("hands")]
        assert frames and all(f % 5 == 0 for f in frames)
        assert frames.count(0) == 2  # once per video at initialization

    def test_moving_camera_excluded(self, tmp_path):
        _, manifest, transport = run_demo(
            tmp_path, "a", script=demo_mock_script(moving_camera=True)
        )
        for record in manifest.videos.values():
            assert record.status == "excluded"
            assert record.failure == {"stage": "filtered", "reason": "camera_motion"}
        assert transport.calls_for("describe") == []

    def test_qa_merged_sorted_by_video(self, tmp_path):
        root, _, _ = run_demo(tmp_path, "a")
        lines = (root / "out" / "qa.jsonl").read_text().splitlines()
        video_ids = [json.loads(line)["video_id"] for line in lines]
        assert video_ids == sorted(video_ids)
        assert set(video_ids) == {"vid_kitchen", "vid_table"}

    def test_demo_questions_span_all_five_categories(self, tmp_path):
        root, _, _ = run_demo(tmp_path, "a")
        lines = (root / "out" / "qa.jsonl").read_text().splitlines()
        categories = {
            json.loads(line)["category"]
            for line in lines
            if json.loads(line)["video_id"] == "vid_kitchen"
        }
        assert categories == {
            "motion_recognition",
            "action_order",
            "motion_related_object",
            "location_related_motion",
            "repetition_count",
        }

    def test_manifest_round_trips(self, tmp_path):
        root, manifest, _ = run_demo(tmp_path, "a")
        loaded = RunManifest.load(root / "out" / "manifest.json")
        assert loaded.config_hash == manifest.config_hash
        assert loaded.to_payload() == manifest.to_payload()

    def test_motion_documents_validate(self, tmp_path):
        from motioncurate.annotate import parse_motion_json, validate_motion_document

        root, _, _ = run_demo(tmp_path, "a")
        for path in (root / "out").glob("*.motion.json"):
            validate_motion_document(parse_motion_json(path.read_bytes()))


class TestResume:
    def test_completed_videos_skipped_entirely(self, tmp_path):
        root = tmp_path / "a"
        paths = write_demo_workspace(root)
        script = demo_mock_script()
        first = MockTransport(MockScript.from_dict(script))
        curate_run(paths["videos"], root / "out", CFG, BackendClient(first))

        second = MockTransport(MockScript.from_dict(script))
        manifest = curate_run(
            paths["videos"], root / "out", CFG, BackendClient(second), resume=True
        )
        assert {r.status for r in manifest.videos.values()} == {"done"}
        assert second.calls == []

    def test_failed_stage_retried_reusing_earlier_stages(self, tmp_path):
        root = tmp_path / "a"
        paths = write_demo_workspace(root)
        broken = demo_mock_script()
        # caption route works, the QA route is missing: every video fails at qa
        broken["llm"]["rule"]["routes"] = broken["llm"]["rule"]["routes"][:1]
        first = MockTransport(MockScript.from_dict(broken))
        manifest = curate_run(paths["videos"], root / "out", CFG, BackendClient(first))
        assert all(r.status == "failed" for r in manifest.videos.values())
        assert all(r.failure["stage"] == "qa" for r in manifest.videos.values())
        motion_before = tree_digest(root / "out")["vid_kitchen.motion.json"]

        fixed = MockTransport(MockScript.from_dict(demo_mock_script()))
        manifest = curate_run(
            paths["videos"], root / "out", CFG, BackendClient(fixed), resume=True
        )
        assert {r.status for r in manifest.videos.values()} == {"done"}
        # per video: exactly one llm call (QA); caption and tracking were reused
        assert len(fixed.calls_for("llm")) == 2
        assert fixed.calls_for("describe") == []
        assert fixed.calls_for("track_advance") == []
        assert tree_digest(root / "out")["vid_kitchen.motion.json"] == motion_before

    def test_config_change_invalidates_resume(self, tmp_path):
        root = tmp_path / "a"
        paths = write_demo_workspace(root)
        script = demo_mock_script()
        curate_run(
            paths["videos"], root / "out", CFG,
            BackendClient(MockTransport(MockScript.from_dict(script))),
        )
        other_cfg = PipelineConfig(seed=8)
        transport = MockTransport(MockScript.from_dict(script))
        curate_run(
            paths["videos"], root / "out", other_cfg, BackendClient(transport), resume=True
        )
        assert transport.calls  # everything re-ran under the new hash


class TestFailureHandling:
    def test_tracker_abort_marks_video_failed_not_fatal(self, tmp_path):
        root = tmp_path / "a"
        paths = write_demo_workspace(root)
        broken = demo_mock_script()
        # tracker dies after one advance; both videos fail at the tracked stage
        broken["track_advance"] = {"responses": [{"boxes": {}}]}
        transport = MockTransport(MockScript.from_dict(broken))
        manifest = curate_run(paths["videos"], root / "out", CFG, BackendClient(transport))
        for record in manifest.videos.values():
            assert record.status == "failed"
            assert record.failure["stage"] == "tracked"
            assert "TrackAbort" in record.failure["reason"]
        assert (root / "out" / "qa.jsonl").read_text() == ""

    def test_parallel_workers_match_serial_tree(self, tmp_path):
        serial_root, _, _ = run_demo(tmp_path, "serial")
        parallel_root = tmp_path / "parallel"
        paths = write_demo_workspace(parallel_root)
        transport = MockTransport(MockScript.from_dict(demo_mock_script()))
        curate_run(
            paths["videos"], parallel_root / "out", CFG, BackendClient(transport), workers=2
        )
        assert tree_digest(parallel_root / "out") == tree_digest(serial_root / "out")


class TestHelpers:
    def test_video_id_strips_synth_suffix(self, tmp_path):
        assert video_id_for(tmp_path / "clip.synth.json") == "clip"
        assert video_id_for(tmp_path / "clip.mp4") == "clip"

    def test_discovery_ignores_other_files(self, tmp_path):
        (tmp_path / "a.synth.json").write_text("{}")
        (tmp_path / "b.mp4").write_text("")
        (tmp_path / "notes.txt").write_text("")
        names = [p.name for p in discover_videos(tmp_path)]
        assert names == ["a.synth.json", "b.mp4"]

    def test_config_hash_sensitive_to_pipeline_fields(self):
        assert config_hash(PipelineConfig(seed=1), "llm") != config_hash(PipelineConfig(seed=2), "llm")
        assert config_hash(PipelineConfig(), "llm") != config_hash(PipelineConfig(), "other")

    def test_derived_seeds_differ_by_purpose(self):
        assert derive_seed(7, "v", "sample") != derive_seed(7, "v", "shuffle")
        assert derive_seed(7, "v", "sample") == derive_seed(7, "v", "sample")
