"""Synthetic fixtures shared by the test modules."""

import numpy as np

BLOCK_A = (200, 40, 40)
BLOCK_B = (40, 40, 200)
SQUARE = (220, 30, 30)
GROUND = (30, 60, 200)


def two_block_image(height=24, width=32):
    img = np.zeros((height, width, 3), dtype=np.uint8)
    img[:, : width // 2] = BLOCK_A
    img[:, width // 2:] = BLOCK_B
    return img


def square_center(t, start=(30, 40), vel=(2, 1), side=16):
    """True centre of the square in frame ``t`` (pixel-index coordinates)."""
    return start[0] + vel[0] * t + (side - 1) / 2, start[1] + vel[1] * t + (side - 1) / 2


def moving_square_frames(n_frames=31, shape=(120, 160), start=(30, 40), vel=(2, 1), side=16,
                         removed_at=None):
    frames = []
    for t in range(n_frames):
        f = np.empty(shape + (3,), dtype=np.uint8)
        f[:] = GROUND
        if removed_at is None or t < removed_at:
            x0, y0 = start[0] + vel[0] * t, start[1] + vel[1] * t
            f[y0:y0 + side, x0:x0 + side] = SQUARE
        frames.append(f)
    return frames


def separated_groups(rng, k, per_group, d, h, spread=None):
    """``k`` tight groups on a diagonal lattice, neighbouring groups 6h apart on every axis."""
    spread = 0.2 * h if spread is None else spread
    centers = np.array([[6.0 * h * g + 0.5 * h] * d for g in range(k)])
    X = np.concatenate([c + rng.uniform(0, spread, size=(per_group, d)) for c in centers])
    y = np.repeat(np.arange(k), per_group)
    return X, y


def brute_ari(a, b):
    """Adjusted Rand index by explicit iteration over all point pairs."""
    n = len(a)
    tp = same_a = same_b = 0
    for i in range(n):
        for j in range(i + 1, n):
            sa, sb = a[i] == a[j], b[i] == b[j]
            same_a += sa
            same_b += sb
            tp += sa and sb
    pairs = n * (n - 1) // 2
    expected = same_a * same_b / pairs
    top = (same_a + same_b) / 2
    if top == expected:
        return 1.0
    return (tp - expected) / (top - expected)


def brute_fm(a, b):
    n = len(a)
    tp = fp = fn = 0
    for i in range(n):
        for j in range(i + 1, n):
            sa, sb = a[i] == a[j], b[i] == b[j]
            tp += sa and sb
            fp += sb and not sa
            fn += sa and not sb
    if tp + fp == 0 and tp + fn == 0:
        return 1.0  # no co-clustered pair on either side: identical partitions
    if tp + fp == 0 or tp + fn == 0:
        return 0.0
    return tp / np.sqrt((tp + fp) * (tp + fn))
