"""Object tracking with a reference bin of color-space grid cells.

The target is described by the set ``B`` of color cells occupied by its
pixels.  In every frame the window centre is moved to the mean position of
the pixels inside the search region whose color falls in ``B``, the bin is
refreshed from those pixels, and the window length/width are nudged to
follow the target's extent.  When no pixel matches, the window grows by 10%
per attempt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import engine
from .grid import InvalidInputError, check_bandwidth

GROWTH = 1.1
SHRINK = 0.99
EXPAND = 1.01


class TrackerError(ValueError):
    pass


class InvalidWindowError(TrackerError):
    pass


class SelectionError(TrackerError):
    pass


@dataclass(frozen=True)
class TrackWindow:
    """Axis-aligned window: centre ``(cx, cy)``, length along x, width along y."""

    cx: float
    cy: float
    length: float
    width: float

    def __post_init__(self):
        if not (self.length > 0 and self.width > 0):
            raise InvalidWindowError("window length and width must be positive")

    def pixel_bounds(self, shape, scale: float = 1.0):
        """Inclusive pixel ranges ``(x0, x1, y0, y1)`` covered by the window, clipped.

        A pixel with integer coordinate ``x`` belongs to the window when
        ``cx - l/2 <= x < cx + l/2``.  Returns ``None`` if the clipped window
        holds no pixel.
        """
        height, width = shape[:2]
        half_l = self.length / scale / 2
        half_w = self.width / scale / 2
        x0 = max(math.ceil(self.cx - half_l), 0)
        x1 = min(math.ceil(self.cx + half_l) - 1, width - 1)
        y0 = max(math.ceil(self.cy - half_w), 0)
        y1 = min(math.ceil(self.cy + half_w) - 1, height - 1)
        if x0 > x1 or y0 > y1:
            return None
        return x0, x1, y0, y1


@dataclass
class TrackerConfig:
    """Tracker parameters.

    The search region is the window scaled by ``1/f``: ``f = 1`` searches the
    window itself, ``f < 1`` a proportionally larger region.  Only with a
    search region larger than the window can the matched extent exceed the
    window size, which is what lets the window grow back after shrinking.
    """

    h: float
    f: float = 1.0
    eta: float = 1.0
    selection: str | Sequence[int] = "top_1"
    max_inner_iters: int = 20

    def __post_init__(self):
        self.h = check_bandwidth(self.h)
        if not self.eta > 0:
            raise TrackerError("eta must be positive")
        if not self.f > 0:
            raise TrackerError("increment factor f must be positive")
        if int(self.max_inner_iters) < 1:
            raise TrackerError("max_inner_iters must be >= 1")


@dataclass
class FrameResult:
    window: TrackWindow
    lost: bool
    inner_iterations: int
    bin: frozenset = field(repr=False, default=frozenset())


def _color_cells(pixels: np.ndarray, h: float) -> np.ndarray:
    """Grid indices of normalised RGB colors, one row per pixel."""
    return np.floor(pixels.astype(np.float64) / 255.0 / h).astype(np.int64)


def _cell_codes(cells: np.ndarray, h: float) -> np.ndarray:
    side = int(math.floor(1.0 / h)) + 1
    return (cells[:, 0] * side + cells[:, 1]) * side + cells[:, 2]


def _region(frame: np.ndarray, window: TrackWindow, scale: float = 1.0):
    bounds = window.pixel_bounds(frame.shape, scale)
    if bounds is None:
        return None
    x0, x1, y0, y1 = bounds
    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    return xs.reshape(-1), ys.reshape(-1), frame[y0:y1 + 1, x0:x1 + 1].reshape(-1, 3)


def select_clusters(labeling: engine.ClusterLabeling, selection) -> list[int]:
    """Resolve ``top_k`` or explicit cluster ids to a list of cluster ids."""
    counts = labeling.counts
    k = len(counts)
    if isinstance(selection, str):
        if not selection.startswith("top_"):
            raise SelectionError(f"unknown selection policy {selection!r}")
        try:
            top = int(selection[4:])
        except ValueError:
            raise SelectionError(f"bad selection {selection!r}") from None
        if top < 1:
            raise SelectionError("top_k needs k >= 1")
        order = sorted(range(k), key=lambda c: (-counts[c], c))
        return sorted(order[:top])
    ids = sorted({int(c) for c in selection})
    if not ids or any(c < 0 or c >= k for c in ids):
        raise SelectionError(f"selection {list(selection)} matches no cluster among {k}")
    return ids


def init_tracker(frame0, window: TrackWindow, cfg: TrackerConfig):
    """Cluster the colors under the initial window and build the reference bin.

    Returns ``(bin, labeling)`` where ``bin`` is a frozenset of color-cell
    index tuples.
    """
    frame0 = _check_frame(frame0)
    region = _region(frame0, window)
    if region is None:
        raise InvalidWindowError("initial window does not intersect the frame")
    _, _, colors = region
    labeling = engine.run(colors.astype(np.float64) / 255.0, cfg.h)
    chosen = select_clusters(labeling, cfg.selection)
    mask = np.isin(labeling.labels, chosen)
    cells = _color_cells(colors[mask], cfg.h)
    return frozenset(map(tuple, np.unique(cells, axis=0).tolist())), labeling


def _extent(coords: np.ndarray) -> float:
    return float(coords.max() - coords.min())


def track_frame(frame, window: TrackWindow, ref_bin, cfg: TrackerConfig) -> FrameResult:
    """Relocate and resize ``window`` on one frame."""
    frame = _check_frame(frame)
    cx, cy, length, width = window.cx, window.cy, window.length, window.width
    ref = np.array(sorted(ref_bin), dtype=np.int64).reshape(-1, 3)
    ref_codes = _cell_codes(ref, cfg.h)
    found = False
    it = 0
    while it < cfg.max_inner_iters:
        it += 1
        region = _region(frame, TrackWindow(cx, cy, length, width), cfg.f)
        match = None
        if region is not None:
            xs, ys, colors = region
            cells = _color_cells(colors, cfg.h)
            hit = np.isin(_cell_codes(cells, cfg.h), ref_codes)
            if hit.any():
                match = xs[hit], ys[hit], cells[hit]
        if match is None:
            length *= GROWTH
            width *= GROWTH
            continue
        found = True
        mx, my, mcells = match
        ncx, ncy = float(mx.mean()), float(my.mean())
        ref = np.unique(mcells, axis=0)
        ref_codes = _cell_codes(ref, cfg.h)
        length *= SHRINK if _extent(mx) < length else EXPAND
        width *= SHRINK if _extent(my) < width else EXPAND
        shift = math.hypot(ncx - cx, ncy - cy)
        cx, cy = ncx, ncy
        if shift < cfg.eta:
            break
    new_bin = frozenset(map(tuple, ref.tolist())) if found else frozenset(ref_bin)
    return FrameResult(TrackWindow(cx, cy, length, width), not found, it, new_bin)


def _check_frame(frame) -> np.ndarray:
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[2] != 3 or frame.dtype != np.uint8:
        raise InvalidInputError(f"frames must be (H, W, 3) uint8 arrays, got {frame.shape}")
    return frame


def track_sequence(frames, window: TrackWindow, cfg: TrackerConfig) -> list[FrameResult]:
    """Initialise on ``frames[0]`` and track through the remaining frames."""
    frames = [_check_frame(f) for f in frames]
    if len(frames) < 2:
        raise InvalidInputError("need an initial frame and at least one frame to track")
    shape = frames[0].shape
    for i, f in enumerate(frames):
        if f.shape != shape:
            raise InvalidInputError(f"frame {i} has shape {f.shape}, expected {shape}")
    ref_bin, _ = init_tracker(frames[0], window, cfg)
    out = []
    for frame in frames[1:]:
        res = track_frame(frame, window, ref_bin, cfg)
        out.append(res)
        window = res.window
        ref_bin = res.bin
    return out


__all__ = [
    "FrameResult",
    "InvalidWindowError",
    "SelectionError",
    "TrackWindow",
    "TrackerConfig",
    "init_tracker",
    "select_clusters",
    "track_frame",
    "track_sequence",
]
