"""Grid indexing and the active-grid hash tables.

Every algorithm in the package partitions feature space into axis-aligned
cubes of side ``h``.  A cube is addressed by its integer index
``floor(x / h)``; a cube holding at least one point is *active*.  The
:class:`ActiveGridMap` keeps, per active cell, the centroid, the resident
count and the resident point indices.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

MAX_DIMENSION = 12


class GridError(ValueError):
    """Base class for invalid-argument errors raised by the grid layer."""


class InvalidBandwidthError(GridError):
    pass


class InvalidInputError(GridError):
    pass


class EmptyInputError(InvalidInputError):
    pass


class InvariantError(RuntimeError):
    """An internal invariant of the active grid was violated."""


def check_bandwidth(h: float) -> float:
    try:
        h = float(h)
    except (TypeError, ValueError):
        raise InvalidBandwidthError(f"bandwidth must be a number, got {h!r}") from None
    if not np.isfinite(h) or h <= 0:
        raise InvalidBandwidthError(f"bandwidth must be positive and finite, got {h}")
    return h


def as_dataset(X) -> np.ndarray:
    """Coerce ``X`` to a finite float64 array of shape (n, d)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise InvalidInputError(f"dataset must be 2-dimensional, got shape {X.shape}")
    if X.shape[0] == 0:
        raise EmptyInputError("dataset is empty")
    if X.shape[1] == 0:
        raise InvalidInputError("dataset has zero features")
    if X.shape[1] > MAX_DIMENSION:
        raise InvalidInputError(
            f"dimension {X.shape[1]} exceeds the supported limit of {MAX_DIMENSION}"
        )
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("dataset contains NaN or infinite values")
    return X


def grid_index(x, h: float) -> tuple[int, ...]:
    """Return the integer cell index of point ``x`` (floor toward -inf)."""
    h = check_bandwidth(h)
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if not np.all(np.isfinite(x)):
        raise InvalidInputError(f"non-finite component in {x}")
    return tuple(int(v) for v in np.floor(x / h))


def grid_indices(X: np.ndarray, h: float) -> np.ndarray:
    """Vectorised :func:`grid_index` over the rows of ``X``."""
    return np.floor(X / h).astype(np.int64)


@lru_cache(maxsize=None)
def neighbor_offsets(d: int) -> tuple[tuple[int, ...], ...]:
    """All ``3**d`` offsets in ``{-1, 0, 1}**d``, lexicographic order."""
    return tuple(itertools.product((-1, 0, 1), repeat=d))


def neighborhood(j) -> list[tuple[int, ...]]:
    """The 1-neighbourhood of cell ``j``, including ``j`` itself."""
    j = tuple(int(c) for c in j)
    return [tuple(a + b for a, b in zip(j, v)) for v in neighbor_offsets(len(j))]


def encode_rows(idx: np.ndarray, pad: int = 1):
    """Map integer index rows to scalar codes preserving lexicographic order.

    Returns ``(codes, lo, strides)``.  Each axis is shifted by ``lo - pad`` so
    that indices up to ``pad`` cells outside the observed range still get a
    valid code, which lets neighbour lookups use the same encoding.  Returns
    ``None`` when the packed range would overflow int64.
    """
    lo = idx.min(axis=0) - pad
    span = idx.max(axis=0) - lo + pad + 1
    total = 1
    for s in span:
        total *= int(s)
    if total >= 2**62:
        return None
    strides = np.ones(idx.shape[1], dtype=np.int64)
    for k in range(idx.shape[1] - 2, -1, -1):
        strides[k] = strides[k + 1] * span[k + 1]
    codes = (idx - lo) @ strides
    return codes, lo, strides


def unique_rows(idx: np.ndarray):
    """``np.unique(idx, axis=0, return_inverse=True, return_counts=True)``, faster."""
    packed = encode_rows(idx, pad=0)
    if packed is None:
        keys, inverse, counts = np.unique(idx, axis=0, return_inverse=True, return_counts=True)
        return keys, inverse.reshape(-1), counts
    codes = packed[0]
    ucodes, first, inverse, counts = np.unique(
        codes, return_index=True, return_inverse=True, return_counts=True
    )
    return idx[first], inverse.reshape(-1), counts


@dataclass
class CellRecord:
    """One active cell: centroid, resident count and resident point indices."""

    centroid: np.ndarray
    count: int
    members: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.centroid = np.asarray(self.centroid, dtype=np.float64)
        self.members = np.asarray(self.members, dtype=np.int64)
        if self.count < 1:
            raise InvariantError(f"cell count must be >= 1, got {self.count}")
        if self.count != len(self.members):
            raise InvariantError(
                f"cell count {self.count} disagrees with {len(self.members)} members"
            )


class ActiveGridMap:
    """Mapping from cell index tuples to :class:`CellRecord`."""

    def __init__(self, h: float, d: int, cells: dict | None = None):
        self.h = check_bandwidth(h)
        self.d = int(d)
        self.cells: dict[tuple[int, ...], CellRecord] = {} if cells is None else cells

    def __len__(self):
        return len(self.cells)

    def __contains__(self, key):
        return key in self.cells

    def __getitem__(self, key):
        return self.cells[key]

    def keys(self):
        """Active keys in lexicographic order."""
        return sorted(self.cells)

    def total_count(self) -> int:
        return sum(c.count for c in self.cells.values())

    def weighted_sum(self) -> np.ndarray:
        total = np.zeros(self.d)
        for c in self.cells.values():
            total += c.count * c.centroid
        return total

    def copy(self) -> "ActiveGridMap":
        cells = {
            k: CellRecord(c.centroid.copy(), c.count, c.members)
            for k, c in self.cells.items()
        }
        return ActiveGridMap(self.h, self.d, cells)

    def check_partition(self, n: int) -> None:
        """Raise :class:`InvariantError` unless the member sets partition ``range(n)``."""
        seen = np.zeros(n, dtype=np.int64)
        for key, cell in self.cells.items():
            if cell.count != len(cell.members) or cell.count < 1:
                raise InvariantError(f"cell {key} has inconsistent count")
            np.add.at(seen, cell.members, 1)
        if not np.all(seen == 1):
            raise InvariantError("member sets do not partition the dataset")


def build_active_grid(X, h: float) -> ActiveGridMap:
    """Assign every point to its cell and record per-cell centroid and members.

    The centroid is the arithmetic mean of the resident points; it is what
    the incremental running-mean update produces, computed in one pass.
    """
    h = check_bandwidth(h)
    X = as_dataset(X)
    n, d = X.shape
    keys, inverse, counts = unique_rows(grid_indices(X, h))
    sums = np.zeros((len(keys), d))
    for k in range(d):
        sums[:, k] = np.bincount(inverse, weights=X[:, k], minlength=len(keys))
    centroids = sums / counts[:, None]
    order = np.argsort(inverse, kind="stable")
    members = np.split(order, np.cumsum(counts)[:-1])
    cells = {}
    for key, cen, cnt, mem in zip(keys.tolist(), centroids, counts.tolist(), members):
        cells[tuple(key)] = CellRecord(cen, cnt, mem)
    return ActiveGridMap(h, d, cells)


def merge_into(amap: ActiveGridMap, key, incoming: CellRecord, check: bool = True) -> ActiveGridMap:
    """Insert ``incoming`` at ``key``, merging count-weighted with any resident cell.

    With ``check`` set, overlapping member sets raise :class:`InvariantError`.
    """
    if incoming.count < 1:
        raise InvariantError("incoming cell must have count >= 1")
    key = tuple(key)
    existing = amap.cells.get(key)
    if existing is None:
        amap.cells[key] = incoming
        return amap
    if check and np.intersect1d(existing.members, incoming.members).size:
        raise InvariantError(f"member sets overlap while merging into {key}")
    count = existing.count + incoming.count
    centroid = (existing.count * existing.centroid + incoming.count * incoming.centroid) / count
    members = np.concatenate((existing.members, incoming.members))
    amap.cells[key] = CellRecord(centroid, count, members)
    return amap
