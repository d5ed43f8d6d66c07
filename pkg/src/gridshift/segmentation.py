"""Pixel clustering with GridShift: features, segmentation and rendering."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import engine
from .grid import InvalidInputError, check_bandwidth
from .imageio import load_image  # noqa: F401  (re-exported for convenience)

MODES = ("rgb", "rgbxy")


@dataclass
class SegmentationResult:
    label_map: np.ndarray  # (H, W) int64
    colors: np.ndarray  # (k, 3) uint8, per-segment mean color
    runtime_ms: float
    labeling: engine.ClusterLabeling

    @property
    def n_segments(self) -> int:
        return len(self.colors)


def _check_image(img) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] < 1 or img.shape[1] < 1:
        raise InvalidInputError(f"expected an (H, W, 3) image, got shape {img.shape}")
    if img.dtype != np.uint8:
        raise InvalidInputError(f"expected uint8 pixels, got {img.dtype}")
    return img


def pixels_to_features(img, mode: str = "rgb") -> np.ndarray:
    """Row-major pixel features; channels /255, positions scaled to [0, 1]."""
    img = _check_image(img)
    if mode not in MODES:
        raise InvalidInputError(f"unknown feature mode {mode!r}")
    h, w, _ = img.shape
    rgb = img.reshape(-1, 3).astype(np.float64) / 255.0
    if mode == "rgb":
        return rgb
    ys, xs = np.mgrid[0:h, 0:w]
    x = xs.reshape(-1) / (w - 1) if w > 1 else np.zeros(h * w)
    y = ys.reshape(-1) / (h - 1) if h > 1 else np.zeros(h * w)
    return np.column_stack([rgb, x, y])


def to_8bit(values) -> np.ndarray:
    """Map [0, 1] intensities to 0..255, rounding half up."""
    return np.clip(np.floor(np.asarray(values) * 255.0 + 0.5), 0, 255).astype(np.uint8)


def segment(img, h: float, mode: str = "rgb", max_iterations: int = 1000) -> SegmentationResult:
    img = _check_image(img)
    check_bandwidth(h)
    feats = pixels_to_features(img, mode)
    t0 = time.perf_counter()
    labeling = engine.run(feats, engine.EngineConfig(h=h, max_iterations=max_iterations))
    runtime_ms = (time.perf_counter() - t0) * 1000.0
    label_map = labeling.labels.reshape(img.shape[:2])
    colors = to_8bit(labeling.centroids[:, :3])
    return SegmentationResult(label_map, colors, runtime_ms, labeling)


def render(result: SegmentationResult, img) -> np.ndarray:
    """Replace every pixel by the mean color of its segment."""
    img = _check_image(img)
    if result.label_map.shape != img.shape[:2]:
        raise InvalidInputError(
            f"label map {result.label_map.shape} does not match image {img.shape[:2]}"
        )
    return result.colors[result.label_map]
