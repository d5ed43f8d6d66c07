"""Per-point grid mean shift (MS++ style) and brute-force reference oracles.

The oracles here are deliberately naive: they loop over every data point
and never touch the hash-table machinery, so they can be used to check the
grid-based code paths independently.
"""

from __future__ import annotations

import warnings

import numpy as np

from .engine import ClusterLabeling, ConvergenceWarning
from .grid import (
    GridError,
    as_dataset,
    check_bandwidth,
    encode_rows,
    grid_indices,
    neighbor_offsets,
    unique_rows,
)

VANILLA_MAX_POINTS = 5000


class OracleScaleError(GridError):
    """Raised when an O(n^2) oracle is asked to run on too many points."""


def default_a(h: float, d: int) -> float:
    """Flat-region constant of the grid kernel: the squared 3h-diagonal."""
    return (3.0 * h * np.sqrt(d)) ** 2


def cell_distance(z, x, h: float) -> int:
    """Chebyshev distance between the cell indices of ``z`` and ``x``."""
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    return int(np.max(np.abs(np.floor(x / h) - np.floor(z / h))))


def brute_force_shift(z, X, h: float) -> np.ndarray:
    """Mean of every point of ``X`` within cell distance 1 of ``z``.

    Returns ``z`` unchanged when no such point exists.
    """
    h = check_bandwidth(h)
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    X = as_dataset(X)
    total = np.zeros_like(z)
    hits = 0
    for x in X:
        if cell_distance(z, x, h) <= 1:
            total += x
            hits += 1
    if hits == 0:
        return z.copy()
    return total / hits


def kde_loss(z, refs, h: float, a: float, n_total: int) -> float:
    """Weighted grid-kernel loss at ``z``.

    ``refs`` is a sequence of ``(point, weight)`` pairs.  References within
    cell distance 1 of ``z`` contribute ``weight * |z - r|^2``; the remaining
    mass out of ``n_total`` contributes the flat value ``a`` each.
    """
    h = check_bandwidth(h)
    if a <= 0:
        raise ValueError(f"a must be positive, got {a}")
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    near = 0.0
    mass = 0.0
    for r, m in refs:
        r = np.atleast_1d(np.asarray(r, dtype=np.float64))
        if cell_distance(z, r, h) <= 1:
            sq = float(np.sum((z - r) ** 2))
            if sq > a:
                raise ValueError(
                    f"a={a} is smaller than an in-neighbourhood squared distance {sq}"
                )
            near += m * sq
            mass += m
    return near + (n_total - mass) * a


def _cell_tables(P: np.ndarray, h: float):
    """Cell keys, point->cell map, per-cell counts and coordinate sums."""
    keys, inverse, counts = unique_rows(grid_indices(P, h))
    d = P.shape[1]
    sums = np.empty((len(keys), d))
    for k in range(d):
        sums[:, k] = np.bincount(inverse, weights=P[:, k], minlength=len(keys))
    return keys, inverse, counts, sums


def _neighbor_means(keys, counts, sums):
    """Count-weighted mean over each cell's 1-neighbourhood, vectorised."""
    m, d = keys.shape
    codes, _, strides = encode_rows(keys, pad=1)
    tot_sum = np.zeros_like(sums)
    tot_cnt = np.zeros(m)
    for v in neighbor_offsets(d):
        cand = codes + np.asarray(v, dtype=np.int64) @ strides
        pos = np.minimum(np.searchsorted(codes, cand), m - 1)
        hit = codes[pos] == cand
        tot_sum[hit] += sums[pos[hit]]
        tot_cnt[hit] += counts[pos[hit]]
    return tot_sum / tot_cnt[:, None]


def mspp_step(P, h: float) -> np.ndarray:
    """One parallel MS++ update of every position in ``P``.

    The grid is built over the current positions and every point moves to
    the mean of all points in its cell's 1-neighbourhood, all computed from
    the same snapshot.
    """
    h = check_bandwidth(h)
    P = as_dataset(P)
    keys, inverse, counts, sums = _cell_tables(P, h)
    return _neighbor_means(keys, counts, sums)[inverse]


def _labels_by_final_cell(P: np.ndarray, h: float):
    keys, inverse, counts, sums = _cell_tables(P, h)
    return inverse.astype(np.int64), sums / counts[:, None], counts


def mspp_run(X, h: float, tol: float | None = None, max_iter: int = 300) -> ClusterLabeling:
    """MS++ clustering: shift all points in parallel until they stop moving.

    Points that end in the same cell form a cluster; clusters are numbered
    by sorted cell key.
    """
    h = check_bandwidth(h)
    X = as_dataset(X)
    tol = 1e-6 * h if tol is None else float(tol)
    P = X.copy()
    converged = False
    it = 0
    while it < max_iter:
        new = mspp_step(P, h)
        it += 1
        shift = float(np.max(np.linalg.norm(new - P, axis=1)))
        P = new
        if shift < tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"MS++ did not converge within {max_iter} iterations", ConvergenceWarning)
    labels, centroids, counts = _labels_by_final_cell(P, h)
    return ClusterLabeling(
        labels=labels, centroids=centroids, counts=counts, iterations=it, converged=converged
    )


def _brute_shift_all(Z: np.ndarray, X: np.ndarray, h: float, chunk: int = 256) -> np.ndarray:
    """brute_force_shift for every row of ``Z`` by explicit pairwise comparison."""
    cx = np.floor(X / h)
    out = np.empty_like(Z)
    for s in range(0, len(Z), chunk):
        cz = np.floor(Z[s:s + chunk] / h)
        near = np.max(np.abs(cz[:, None, :] - cx[None, :, :]), axis=2) <= 1
        hits = near.sum(axis=1)
        means = near.astype(np.float64) @ X
        empty = hits == 0
        means[~empty] /= hits[~empty, None]
        means[empty] = Z[s:s + chunk][empty]
        out[s:s + chunk] = means
    return out


def vanilla_ms_run(X, h: float, tol: float | None = None, max_iter: int = 300,
                   max_points: int = VANILLA_MAX_POINTS) -> ClusterLabeling:
    """O(n^2) mean shift with the grid kernel, started at every data point."""
    h = check_bandwidth(h)
    X = as_dataset(X)
    if len(X) > max_points:
        raise OracleScaleError(
            f"vanilla mean shift is limited to {max_points} points, got {len(X)}"
        )
    tol = 1e-6 * h if tol is None else float(tol)
    Z = X.copy()
    converged = False
    it = 0
    while it < max_iter:
        new = _brute_shift_all(Z, X, h)
        it += 1
        shift = float(np.max(np.linalg.norm(new - Z, axis=1)))
        Z = new
        if shift < tol:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"vanilla mean shift did not converge within {max_iter} iterations",
            ConvergenceWarning,
        )
    labels, centroids, counts = _labels_by_final_cell(Z, h)
    return ClusterLabeling(
        labels=labels, centroids=centroids, counts=counts, iterations=it, converged=converged
    )
