"""The GridShift iteration loop.

Each iteration sweeps the active cells in lexicographic key order and
replaces every centroid by the count-weighted mean of the centroids in its
1-neighbourhood.  Counts are frozen at the start of the iteration, while
centroids are updated in place, so cells visited later see the already
shifted centroids of earlier neighbours.  After its update a cell is moved
to the cell containing its new centroid and merged with whatever already
lives there.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .grid import (
    ActiveGridMap,
    CellRecord,
    as_dataset,
    build_active_grid,
    check_bandwidth,
    encode_rows,
    merge_into,
    neighbor_offsets,
)


class ConvergenceWarning(UserWarning):
    pass


@dataclass
class EngineConfig:
    h: float
    max_iterations: int = 1000
    record_history: bool = True

    def __post_init__(self):
        self.h = check_bandwidth(self.h)
        if int(self.max_iterations) < 1:
            raise ValueError("max_iterations must be a positive integer")
        self.max_iterations = int(self.max_iterations)


@dataclass
class IterationRecord:
    m: int  # active cells after the iteration
    max_shift: float


@dataclass
class ClusterLabeling:
    labels: np.ndarray
    centroids: np.ndarray
    iterations: int
    history: list[IterationRecord] = field(default_factory=list)
    converged: bool = True
    initial_cells: int = 0
    counts: np.ndarray | None = None

    @property
    def n_clusters(self) -> int:
        return len(self.centroids)

    @property
    def m_avg(self) -> float:
        """Mean number of active cells processed per iteration."""
        if not self.history:
            return float(self.initial_cells)
        processed = [self.initial_cells] + [r.m for r in self.history[:-1]]
        return float(np.mean(processed))


def _neighbor_table(keys: np.ndarray):
    """For sorted key rows, list the positions of active neighbours of each key.

    Returns a list of index arrays (self included) in visit order.
    """
    m, d = keys.shape
    codes, _, strides = encode_rows(keys, pad=1)
    offsets = np.array(neighbor_offsets(d), dtype=np.int64)
    shifts = offsets @ strides
    cand = codes[:, None] + shifts[None, :]
    pos = np.searchsorted(codes, cand)
    pos_c = np.minimum(pos, m - 1)
    hit = codes[pos_c] == cand
    return [pos_c[i][hit[i]] for i in range(m)]


def has_converged(amap: ActiveGridMap) -> bool:
    """True iff no active cell has another active cell in its 1-neighbourhood."""
    if len(amap) <= 1:
        return True
    keys = np.array(amap.keys(), dtype=np.int64)
    return all(len(nb) == 1 for nb in _neighbor_table(keys))


def sweep(amap: ActiveGridMap):
    """Run the in-place centroid sweep without relocating cells.

    Returns ``(keys, old, new, counts, neighbours)`` where ``old`` holds the
    centroids at the start of the iteration, ``new`` the updated ones, and
    ``neighbours[i]`` the positions whose centroids fed the update of cell
    ``i``.  Keys are in visit order.
    """
    key_list = amap.keys()
    keys = np.array(key_list, dtype=np.int64)
    cells = [amap.cells[k] for k in key_list]
    counts = np.array([c.count for c in cells], dtype=np.float64)
    old = np.array([c.centroid for c in cells], dtype=np.float64).reshape(len(cells), amap.d)
    cent = old.copy()
    nbrs = _neighbor_table(keys)
    for i, nb in enumerate(nbrs):
        if len(nb) > 1:
            w = counts[nb]
            cent[i] = w @ cent[nb] / w.sum()
    return key_list, old, cent, counts, nbrs


def _iterate(amap: ActiveGridMap):
    key_list, old, cent, _, _ = sweep(amap)
    new_keys = np.floor(cent / amap.h).astype(np.int64)
    out = ActiveGridMap(amap.h, amap.d)
    changed = False
    for i, key in enumerate(key_list):
        nk = tuple(new_keys[i].tolist())
        if nk != key or not np.array_equal(cent[i], old[i]):
            changed = True
        cell = amap.cells[key]
        merge_into(out, nk, CellRecord(cent[i], cell.count, cell.members), check=False)
    return out, changed, float(np.max(np.linalg.norm(cent - old, axis=1)))


def iterate_once(amap: ActiveGridMap):
    """One GridShift iteration; returns ``(new_map, changed)``."""
    out, changed, _ = _iterate(amap)
    return out, changed


def labeling_from_map(amap: ActiveGridMap, n: int, **extra) -> ClusterLabeling:
    """Number the final cells by sorted key and label every point."""
    labels = np.empty(n, dtype=np.int64)
    keys = amap.keys()
    centroids = np.empty((len(keys), amap.d))
    counts = np.empty(len(keys), dtype=np.int64)
    for cid, key in enumerate(keys):
        cell = amap.cells[key]
        labels[cell.members] = cid
        centroids[cid] = cell.centroid
        counts[cid] = cell.count
    return ClusterLabeling(labels=labels, centroids=centroids, counts=counts, **extra)


def _run(X, cfg: EngineConfig, trace: bool):
    X = as_dataset(X)
    amap = build_active_grid(X, cfg.h)
    initial = len(amap)
    history = []
    snapshots = []
    converged = False
    iterations = 0
    while iterations < cfg.max_iterations:
        amap, changed, shift = _iterate(amap)
        iterations += 1
        if cfg.record_history:
            history.append(IterationRecord(len(amap), shift))
        if trace:
            snapshots.append(amap.copy())
        if not changed or has_converged(amap):
            converged = True
            break
    if not converged:
        warnings.warn(
            f"GridShift did not converge within {cfg.max_iterations} iterations",
            ConvergenceWarning,
            stacklevel=3,
        )
    result = labeling_from_map(
        amap,
        len(X),
        iterations=iterations,
        history=history,
        converged=converged,
        initial_cells=initial,
    )
    return result, snapshots


def run(X, cfg: EngineConfig | float) -> ClusterLabeling:
    """Cluster ``X`` with GridShift.

    ``cfg`` may be an :class:`EngineConfig` or a bare bandwidth.  A run that
    hits ``max_iterations`` returns the partial labeling with
    ``converged=False`` and emits a :class:`ConvergenceWarning`.
    """
    if not isinstance(cfg, EngineConfig):
        cfg = EngineConfig(h=cfg)
    return _run(X, cfg, trace=False)[0]


def run_traced(X, cfg: EngineConfig | float):
    """Like :func:`run`, also returning a copy of the grid after every iteration."""
    if not isinstance(cfg, EngineConfig):
        cfg = EngineConfig(h=cfg)
    return _run(X, cfg, trace=True)
