"""Reading and writing the image formats used by the pipelines."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

SUPPORTED = {"PNG", "PPM"}


class ImageDecodeError(ValueError):
    pass


def load_image(path) -> np.ndarray:
    """Decode a PNG or binary PPM file to an (H, W, 3) uint8 array."""
    path = Path(path)
    if not path.is_file():
        raise ImageDecodeError(f"no such image file: {path}")
    try:
        with Image.open(path) as im:
            if im.format not in SUPPORTED:
                raise ImageDecodeError(f"{path}: unsupported format {im.format}")
            im.load()
            rgb = im.convert("RGB")
    except ImageDecodeError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise ImageDecodeError(f"{path}: {exc}") from exc
    return np.asarray(rgb, dtype=np.uint8).copy()


def save_png(img: np.ndarray, path) -> None:
    Image.fromarray(np.asarray(img, dtype=np.uint8), mode="RGB").save(path, format="PNG")


def save_ppm(img: np.ndarray, path) -> None:
    img = np.asarray(img, dtype=np.uint8)
    h, w, _ = img.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(img.tobytes())


def save_pgm(labels: np.ndarray, path) -> None:
    """Write a label map as binary PGM; 16-bit big-endian once ids exceed 255."""
    labels = np.asarray(labels)
    h, w = labels.shape
    maxval = int(labels.max()) if labels.size else 0
    if maxval > 65535:
        raise ValueError("too many segments for a 16-bit PGM label map")
    if maxval <= 255:
        data = labels.astype(np.uint8).tobytes()
        header_max = 255
    else:
        data = labels.astype(">u2").tobytes()
        header_max = 65535
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n{header_max}\n".encode("ascii"))
        f.write(data)


def load_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    fields = []
    pos = 0
    while len(fields) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos)
            continue
        start = pos
        while not raw[pos:pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos].decode("ascii"))
    pos += 1
    magic, w, h, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    if magic != "P5":
        raise ImageDecodeError(f"{path}: not a binary PGM")
    dtype = np.uint8 if maxval <= 255 else np.dtype(">u2")
    count = w * h
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=pos)
    return data.reshape(h, w).astype(np.int64)


def save_labels_csv(labels: np.ndarray, path) -> None:
    np.savetxt(path, np.asarray(labels, dtype=np.int64), fmt="%d", delimiter=",")


def draw_rectangle(img: np.ndarray, x0: int, y0: int, x1: int, y1: int,
                   color=(255, 255, 0)) -> np.ndarray:
    """Return a copy of ``img`` with a 1-pixel rectangle outline, clipped to the frame."""
    out = np.array(img, dtype=np.uint8, copy=True)
    h, w, _ = out.shape
    x0c, x1c = max(x0, 0), min(x1, w - 1)
    y0c, y1c = max(y0, 0), min(y1, h - 1)
    if x0c > x1c or y0c > y1c:
        return out
    if 0 <= y0 < h:
        out[y0, x0c:x1c + 1] = color
    if 0 <= y1 < h:
        out[y1, x0c:x1c + 1] = color
    if 0 <= x0 < w:
        out[y0c:y1c + 1, x0] = color
    if 0 <= x1 < w:
        out[y0c:y1c + 1, x1] = color
    return out
