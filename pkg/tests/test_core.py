import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motioncurate.core import (
    ContactState,
    ContactValue,
    EntityId,
    NormalizedBBox,
    PipelineConfig,
    Tracklet,
    VideoMeta,
    allocate_entity_ids,
    denormalize_bbox,
    iou,
    normalize_bbox,
)
from motioncurate.errors import IdRangeExceeded, InvalidBox

META = VideoMeta(path="v", width=1280, height=720, fps=30.0, duration=10.0, frame_count=300)


def raster_iou(a: NormalizedBBox, b: NormalizedBBox, grid: int) -> float:
    """Counting oracle: rasterize both boxes onto a grid and count cells."""
    centers = (np.arange(grid) + 0.5) / grid
    mask_a = np.outer(
        (centers >= a.top) & (centers <= a.bottom), (centers >= a.left) & (centers <= a.right)
    )
    mask_b = np.outer(
        (centers >= b.top) & (centers <= b.bottom), (centers >= b.left) & (centers <= b.right)
    )
    union = int(np.logical_or(mask_a, mask_b).sum())
    if union == 0:
        return 0.0
    return int(np.logical_and(mask_a, mask_b).sum()) / union


class TestNormalizeBBox:
    def test_quarter_frame(self):
        box = normalize_bbox((320, 180, 640, 360), META)
        assert box.as_list() == [0.25, 0.25, 0.50, 0.50]

    def test_full_frame(self):
        assert normalize_bbox((0, 0, 1280, 720), META).as_list() == [0, 0, 1, 1]

    def test_degenerate_point(self):
        meta = VideoMeta(path="v", width=200, height=100, fps=1, duration=1, frame_count=1)
        assert normalize_bbox((100, 50, 100, 50), meta).as_list() == [0.5, 0.5, 0.5, 0.5]

    def test_inverted_rejected(self):
        with pytest.raises(InvalidBox):
            normalize_bbox((640, 180, 320, 360), META)

    def test_one_pixel_overhang_clamped(self):
        box = normalize_bbox((-0.5, 0, 1280.5, 720), META)
        assert box.left == 0.0 and box.right == 1.0

    def test_far_out_of_frame_rejected(self):
        with pytest.raises(InvalidBox):
            normalize_bbox((0, 0, 1290, 720), META)

    @given(
        x=st.tuples(st.floats(0, 1280), st.floats(0, 1280)),
        y=st.tuples(st.floats(0, 720), st.floats(0, 720)),
    )
    def test_round_trip_within_half_pixel(self, x, y):
        left, right = sorted(x)
        top, bottom = sorted(y)
        back = denormalize_bbox(normalize_bbox((left, top, right, bottom), META), META)
        for original, recovered in zip((left, top, right, bottom), back):
            assert abs(original - recovered) <= 0.5


class TestIou:
    def test_identity(self):
        a = NormalizedBBox(0.1, 0.1, 0.6, 0.7)
        assert iou(a, a) == 1.0

    def test_disjoint(self):
        assert iou(NormalizedBBox(0, 0, 0.2, 0.2), NormalizedBBox(0.5, 0.5, 0.9, 0.9)) == 0.0

    def test_one_seventh_overlap(self):
        a = NormalizedBBox(0, 0, 0.2, 0.2)
        b = NormalizedBBox(0.1, 0.1, 0.3, 0.3)
        expected = 1.0 / 7.0
        assert iou(a, b) == pytest.approx(expected, abs=1e-12)
        assert raster_iou(a, b, grid=1024) == pytest.approx(expected, abs=2e-3)

    def test_degenerate_boxes_are_zero(self):
        point = NormalizedBBox(0.5, 0.5, 0.5, 0.5)
        assert iou(point, point) == 0.0
        assert iou(point, NormalizedBBox(0, 0, 1, 1)) == 0.0

    @given(
        coords=st.lists(st.integers(0, 64), min_size=8, max_size=8),
    )
    @settings(max_examples=300)
    def test_integer_grid_matches_raster_exactly(self, coords):
        ax = sorted(coords[0:2])
        ay = sorted(coords[2:4])
        bx = sorted(coords[4:6])
        by = sorted(coords[6:8])
        a = NormalizedBBox(ax[0] / 64, ay[0] / 64, ax[1] / 64, ay[1] / 64)
        b = NormalizedBBox(bx[0] / 64, by[0] / 64, bx[1] / 64, by[1] / 64)
        assert iou(a, b) == raster_iou(a, b, grid=64)

    @given(
        values=st.lists(st.floats(0, 1, allow_nan=False), min_size=8, max_size=8),
    )
    @settings(max_examples=200)
    def test_symmetry(self, values):
        a = NormalizedBBox(min(values[0], values[1]), min(values[2], values[3]),
                           max(values[0], values[1]), max(values[2], values[3]))
        b = NormalizedBBox(min(values[4], values[5]), min(values[6], values[7]),
                           max(values[4], values[5]), max(values[6], values[7]))
        assert iou(a, b) == iou(b, a)


class TestEntityIds:
    def test_single_root_triple(self):
        assignment = allocate_entity_ids([3], 0)
        assert assignment.persons[3].raw == 30
        assert assignment.left_hands[3].raw == 31
        assert assignment.right_hands[3].raw == 34

    def test_objects_start_at_1000(self):
        assignment = allocate_entity_ids([], 2)
        assert [e.raw for e in assignment.objects] == [1000, 1001]

    def test_extreme_roots_distinct(self):
        assignment = allocate_entity_ids([0, 99], 0)
        raws = [e.raw for e in assignment.all_ids()]
        assert raws == [0, 1, 4, 990, 991, 994]
        assert len(set(raws)) == len(raws)

    def test_root_out_of_range(self):
        with pytest.raises(IdRangeExceeded):
            allocate_entity_ids([100], 0)
        with pytest.raises(IdRangeExceeded):
            EntityId.person(-1)

    def test_too_many_persons(self):
        with pytest.raises(IdRangeExceeded):
            allocate_entity_ids(list(range(101)), 0)

    def test_full_allocation_injective_and_disjoint(self):
        assignment = allocate_entity_ids(list(range(100)), 10_000)
        person_derived = [
            e.raw
            for root in range(100)
            for e in (
                assignment.persons[root],
                assignment.left_hands[root],
                assignment.right_hands[root],
            )
        ]
        object_ids = [e.raw for e in assignment.objects]
        everything = person_derived + object_ids
        assert len(set(everything)) == len(everything)
        assert max(person_derived) < min(object_ids)

    def test_hand_side_helpers(self):
        assert EntityId.hand(2, "left").raw == 21
        assert EntityId.hand(2, "right").raw == 24
        assert EntityId.object(5).raw == 1005
        assert EntityId.left_hand(7).root == 7


class TestContactState:
    def test_held_box_requires_object_contact(self):
        with pytest.raises(ValueError):
            ContactState(ContactValue.NO_CONTACT, NormalizedBBox(0, 0, 0.1, 0.1))
        with pytest.raises(ValueError):
            ContactState(ContactValue.OBJECT_CONTACT, None)
        state = ContactState(ContactValue.OBJECT_CONTACT, NormalizedBBox(0, 0, 0.1, 0.1))
        assert state.held_object_box is not None


class TestTracklet:
    def test_hands_need_contact_states(self):
        boxes = (NormalizedBBox(0, 0, 0.1, 0.1), None)
        with pytest.raises(ValueError):
            Tracklet(id=EntityId.left_hand(0), object_type="left_hand", boxes=boxes)
        tracklet = Tracklet(
            id=EntityId.left_hand(0),
            object_type="left_hand",
            boxes=boxes,
            contact_states=(None, None),
        )
        assert tracklet.frame_count == 2

    def test_non_hands_reject_contact_states(self):
        with pytest.raises(ValueError):
            Tracklet(
                id=EntityId.object(0),
                object_type="cup",
                boxes=(None,),
                contact_states=(None,),
            )


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(motion_threshold=0.0)
    with pytest.raises(ValueError):
        PipelineConfig(person_score_threshold=1.5)
    assert PipelineConfig().keyframe_stride == 5


def test_video_meta_frame_count_must_match_duration():
    with pytest.raises(ValueError):
        VideoMeta(path="v", width=10, height=10, fps=30.0, duration=10.0, frame_count=100)
    VideoMeta(path="v", width=10, height=10, fps=30.0, duration=10.0, frame_count=301)
