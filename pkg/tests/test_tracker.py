import math

import numpy as np
import pytest

from gridshift.grid import InvalidInputError
from gridshift.tracker import (
    GROWTH,
    InvalidWindowError,
    SelectionError,
    TrackWindow,
    TrackerConfig,
    init_tracker,
    track_frame,
    track_sequence,
)
from helpers import GROUND, SQUARE, moving_square_frames, square_center

H = 0.2


def color_cell(rgb):
    return tuple(int(math.floor(c / 255 / H)) for c in rgb)


def three_color_frame():
    f = np.zeros((30, 30, 3), np.uint8)
    f[:, :10] = (250, 10, 10)
    f[:, 10:20] = (10, 250, 10)
    f[:, 20:] = (10, 10, 250)
    return f


class TestWindow:
    def test_bounds(self):
        assert TrackWindow(5.0, 5.0, 4.0, 2.0).pixel_bounds((20, 20)) == (3, 6, 4, 5)

    def test_clipped(self):
        assert TrackWindow(0.0, 0.0, 4.0, 4.0).pixel_bounds((10, 10)) == (0, 1, 0, 1)

    def test_outside(self):
        assert TrackWindow(-50.0, 5.0, 4.0, 4.0).pixel_bounds((10, 10)) is None

    def test_positive_dims(self):
        with pytest.raises(InvalidWindowError):
            TrackWindow(1.0, 1.0, 0.0, 3.0)


class TestInit:
    def test_red_square_top1(self):
        frame = moving_square_frames(1)[0]
        cx, cy = square_center(0)
        ref, lab = init_tracker(frame, TrackWindow(cx, cy, 20, 20), TrackerConfig(h=H))
        assert lab.n_clusters == 2
        assert ref == {color_cell(SQUARE)}

    def test_single_color_window(self):
        frame = moving_square_frames(1)[0]
        ref, lab = init_tracker(frame, TrackWindow(5, 5, 6, 6), TrackerConfig(h=H))
        assert lab.n_clusters == 1
        assert ref == {color_cell(GROUND)}

    def test_explicit_ids(self):
        ref, lab = init_tracker(three_color_frame(), TrackWindow(15, 15, 30, 30),
                                TrackerConfig(h=H, selection=[0, 1]))
        assert lab.n_clusters == 3
        cells = {color_cell(c) for c in lab.centroids[[0, 1]] * 255}
        assert ref == cells

    def test_window_outside(self):
        with pytest.raises(InvalidWindowError):
            init_tracker(three_color_frame(), TrackWindow(500, 500, 4, 4), TrackerConfig(h=H))

    def test_bad_selection(self):
        with pytest.raises(SelectionError):
            init_tracker(three_color_frame(), TrackWindow(15, 15, 30, 30), TrackerConfig(h=H, selection=[7]))
        with pytest.raises(SelectionError):
            init_tracker(three_color_frame(), TrackWindow(15, 15, 30, 30), TrackerConfig(h=H, selection="best"))


class TestTrackFrame:
    def test_shift_by_five(self):
        frames = moving_square_frames(2, vel=(5, 0))
        cfg = TrackerConfig(h=H, f=0.5, eta=1.0)
        cx, cy = square_center(0)
        ref, _ = init_tracker(frames[0], TrackWindow(cx, cy, 16, 16), cfg)
        res = track_frame(frames[1], TrackWindow(cx, cy, 16, 16), ref, cfg)
        tx, ty = square_center(1, vel=(5, 0))
        assert math.hypot(res.window.cx - tx, res.window.cy - ty) <= 1.0
        assert not res.lost

    @pytest.mark.parametrize("k", [1, 3, 7])
    def test_growth_when_nothing_matches(self, k):
        blank = np.zeros((40, 40, 3), np.uint8)
        cfg = TrackerConfig(h=H, max_inner_iters=k)
        res = track_frame(blank, TrackWindow(20, 20, 10, 6), frozenset({color_cell(SQUARE)}), cfg)
        assert res.lost
        assert res.inner_iterations == k
        length, width = 10.0, 6.0
        for _ in range(k):
            length *= GROWTH
            width *= GROWTH
        assert res.window.length == length and res.window.width == width
        assert (res.window.cx, res.window.cy) == (20, 20)

    def test_stationary_shrinks_once(self):
        frame = moving_square_frames(1)[0]
        cx, cy = square_center(0)
        cfg = TrackerConfig(h=H, f=1.0, eta=1.0)
        res = track_frame(frame, TrackWindow(cx, cy, 20, 20), frozenset({color_cell(SQUARE)}), cfg)
        assert res.inner_iterations == 1
        assert res.window.length == pytest.approx(20 * 0.99)
        assert res.window.width == pytest.approx(20 * 0.99)

    def test_extent_reaching_window_grows(self):
        frame = np.full((30, 30, 3), SQUARE, np.uint8)
        cfg = TrackerConfig(h=H, f=0.5)
        res = track_frame(frame, TrackWindow(15, 15, 4, 4), frozenset({color_cell(SQUARE)}), cfg)
        # search region is 8x8 so the matched extent (7) exceeds the 4-pixel window
        assert res.window.length == pytest.approx(4 * 1.01)


class TestSequence:
    def test_linear_motion(self):
        frames = moving_square_frames(31)
        cx, cy = square_center(0)
        out = track_sequence(frames, TrackWindow(cx, cy, 16, 16), TrackerConfig(h=H, f=0.5, eta=1.0))
        assert len(out) == 30
        for t, r in enumerate(out, start=1):
            tx, ty = square_center(t)
            assert math.hypot(r.window.cx - tx, r.window.cy - ty) <= 2.0
            assert not r.lost
            assert r.bin

    def test_constant_sequence(self):
        frames = moving_square_frames(6, vel=(0, 0))
        cx, cy = square_center(0)
        out = track_sequence(frames, TrackWindow(cx, cy, 16, 16), TrackerConfig(h=H, eta=1.0))
        for r in out:
            assert math.hypot(r.window.cx - cx, r.window.cy - cy) < 1.0

    def test_removal_marks_lost_and_grows(self):
        frames = moving_square_frames(16, removed_at=10)
        cx, cy = square_center(0)
        cfg = TrackerConfig(h=H, f=0.5, eta=1.0, max_inner_iters=4)
        out = track_sequence(frames, TrackWindow(cx, cy, 16, 16), cfg)
        assert [r.lost for r in out] == [False] * 9 + [True] * 6
        for prev, cur in zip(out[8:], out[9:]):
            length = prev.window.length
            for _ in range(4):
                length *= GROWTH
            assert cur.window.length == length

    def test_bounded_growth_and_center_in_frame(self):
        frames = moving_square_frames(12, removed_at=6)
        cx, cy = square_center(0)
        cfg = TrackerConfig(h=H, f=0.5, max_inner_iters=5)
        prev = TrackWindow(cx, cy, 16, 16)
        for r in track_sequence(frames, prev, cfg):
            assert r.window.length <= prev.length * GROWTH ** 5 + 1e-9
            assert 0 <= r.window.cx <= 159 and 0 <= r.window.cy <= 119
            prev = r.window

    def test_select_zero_equals_top1(self):
        frames = moving_square_frames(5)
        cx, cy = square_center(0)
        w = TrackWindow(cx, cy, 16, 16)
        a = track_sequence(frames, w, TrackerConfig(h=H, f=0.5, selection="top_1"))
        b = track_sequence(frames, w, TrackerConfig(h=H, f=0.5, selection=[0]))
        assert [r.window for r in a] == [r.window for r in b]

    def test_size_mismatch(self):
        frames = moving_square_frames(3)
        frames[2] = frames[2][:50]
        with pytest.raises(InvalidInputError):
            track_sequence(frames, TrackWindow(40, 50, 16, 16), TrackerConfig(h=H))

    def test_needs_two_frames(self):
        with pytest.raises(InvalidInputError):
            track_sequence(moving_square_frames(1), TrackWindow(40, 50, 16, 16), TrackerConfig(h=H))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrackerConfig(h=H, eta=0)
        with pytest.raises(ValueError):
            TrackerConfig(h=H, f=0)
        with pytest.raises(ValueError):
            TrackerConfig(h=-1)
