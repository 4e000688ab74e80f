"""Self-contained demo inputs: synthetic videos plus a mock script that drives
every backend deterministically. Used by the end-to-end tests and the demo
scripts; no model weights or codecs involved."""

from __future__ import annotations

import json
from pathlib import Path

from .backends.mock import expanded_hand_region

PERSON_BOX = [0.30, 0.20, 0.70, 0.95]
CUP_BOX = [0.10, 0.55, 0.22, 0.70]
BALL_BOX = [0.62, 0.80, 0.72, 0.90]
BALL_VELOCITY = [0.005, 0.0]

DEMO_VIDEOS = {
    "vid_kitchen": {"width": 160, "height": 120, "fps": 5.0, "duration": 6.2, "seed": 1},
    "vid_table": {"width": 160, "height": 120, "fps": 5.0, "duration": 7.4, "seed": 2},
}

CAPTION_REPLY = (
    "A person stands at a table in the middle of the frame for the whole clip. "
    "Their left hand holds a cup near the left edge of the table while a ball "
    "rolls steadily to the right along the lower right part of the scene. "
    "The person first lifts the cup slightly, then sets it back down, lifting "
    "it twice in total; the right hand stays still beside the body."
)

QA_REPLY = """[
'Q1: What action is the person performing with their left hand?
A: The person is holding a cup with their left hand.
B: The person is waving at the camera.
C: The person is pointing to the right.
D: The person is resting the hand on their lap.',

'Q2: Which action happens first in the video?
A: The person lifts the cup before setting it down.
B: The person sets the cup down before lifting it.
C: The ball stops before the cup moves.
D: The person leaves the table first.',

'Q3: What object performs the rolling motion?
A: The ball performs the rolling motion.
B: The cup performs the rolling motion.
C: The table performs the rolling motion.
D: Nothing rolls in the video.',

'Q4: Where in the scene does the rolling action take place?
A: In the lower right part of the scene.
B: In the upper left part of the scene.
C: In the exact center of the scene.
D: Outside the visible frame.',

'Q5: How many times does the person lift the cup?
A: Twice.
B: Once.
C: Three times.
D: The cup is never lifted.'
]"""


def _hand_entry(side: str, *, holding: bool) -> dict:
    box = expanded_hand_region(PERSON_BOX, side)
    return {
        "box": [round(v, 6) for v in box],
        "side": side,
        "contact": "object_contact" if holding else "no_contact",
        "held_object_box": CUP_BOX if holding else None,
        "score": 0.9,
    }


def demo_mock_script(*, moving_camera: bool = False, max_keyframe: int = 40) -> dict:
    """Mock script serving the full pipeline for the demo scene.

    One person holds a cup with the left hand; a ball drifts right. Hands are
    re-detected at every keyframe with the same boxes, so refinement is
    observable in transcripts without changing the tracks.
    """
    hands = [_hand_entry("left", holding=True), _hand_entry("right", holding=False)]
    hands_by_frame = {str(frame): hands for frame in range(0, max_keyframe + 1, 5)}
    camera_rule = (
        {"kind": "linear_track", "step": [0.8, 0.0, 0.0], "yaw_step": 0.05}
        if moving_camera
        else {"kind": "linear_track", "step": [0.0, 0.0, 0.0], "yaw_step": 0.0}
    )
    return {
        "camera_poses": {"rule": camera_rule},
        "describe": {"rule": {"kind": "fixed_text", "text": "person, cup, ball"}},
        "ground": {
            "rule": {
                "kind": "boxes_by_class",
                "classes": {
                    "cup": [{"box": CUP_BOX, "score": 0.88}],
                    "ball": [{"box": BALL_BOX, "score": 0.81}],
                },
            }
        },
        "persons": {
            "rule": {"kind": "fixed_detections", "detections": [{"box": PERSON_BOX, "score": 0.93}]}
        },
        "pose": {"rule": {"kind": "hands_in_person_box", "confidence": 0.95}},
        "hands": {"rule": {"kind": "hands_by_frame", "frames": hands_by_frame, "default": []}},
        "track_register": {"rule": {"kind": "ack"}},
        "track_advance": {
            "rule": {"kind": "follow_prompts", "velocity": {"1000": BALL_VELOCITY}}
        },
        "llm": {
            "rule": {
                "kind": "marker_router",
                "routes": [
                    {
                        "contains": "The motion information for the video in JSON format",
                        "text": CAPTION_REPLY,
                    },
                    {
                        "contains": "Always put the correct answer at the first choice.",
                        "text": QA_REPLY,
                    },
                ],
            }
        },
    }


def write_demo_workspace(root: Path, *, moving_camera: bool = False) -> dict[str, Path]:
    """Materialize videos/ and mocks/ under root; returns the notable paths."""
    root = Path(root)
    videos = root / "videos"
    mocks = root / "mocks"
    videos.mkdir(parents=True, exist_ok=True)
    mocks.mkdir(parents=True, exist_ok=True)
    for name, spec in DEMO_VIDEOS.items():
        (videos / f"{name}.synth.json").write_text(json.dumps(spec, indent=2) + "\n", "utf-8")
    script_path = mocks / "mock_script.json"
    script_path.write_text(
        json.dumps(demo_mock_script(moving_camera=moving_camera), indent=2) + "\n", "utf-8"
    )
    return {"videos": videos, "mocks": mocks, "script": script_path}
