"""Clustering validation scores and silhouette-driven bandwidth tuning."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import gammaln

DEFAULT_H_GRID = tuple(round(0.05 * k, 2) for k in range(1, 21))


class MetricError(ValueError):
    pass


class UndefinedScoreError(MetricError):
    pass


class TuningError(MetricError):
    pass


@dataclass
class ContingencyTable:
    matrix: np.ndarray

    @property
    def a(self) -> np.ndarray:
        return self.matrix.sum(axis=1)

    @property
    def b(self) -> np.ndarray:
        return self.matrix.sum(axis=0)

    @property
    def n(self) -> int:
        return int(self.matrix.sum())


def contingency(labels_a, labels_b) -> ContingencyTable:
    """Co-occurrence counts; rows follow sorted labels of ``labels_a``."""
    labels_a = np.asarray(labels_a)
    labels_b = np.asarray(labels_b)
    if labels_a.shape != labels_b.shape or labels_a.ndim != 1:
        raise MetricError("labelings must be 1-d and of equal length")
    if len(labels_a) == 0:
        raise MetricError("labelings are empty")
    _, ia = np.unique(labels_a, return_inverse=True)
    _, ib = np.unique(labels_b, return_inverse=True)
    ia = ia.reshape(-1)
    ib = ib.reshape(-1)
    mat = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(mat, (ia, ib), 1)
    return ContingencyTable(mat)


def _table(x, labels_b=None) -> ContingencyTable:
    if isinstance(x, ContingencyTable):
        return x
    return contingency(x, labels_b)


def _comb2(x):
    x = np.asarray(x, dtype=np.int64)
    return x * (x - 1) // 2


def _pair_counts(t: ContingencyTable):
    """Return (TP, TP+FP, TP+FN) over unordered point pairs, exactly."""
    tp = int(_comb2(t.matrix).sum())
    same_a = int(_comb2(t.a).sum())
    same_b = int(_comb2(t.b).sum())
    return tp, same_a, same_b


def _require_pairs(t: ContingencyTable):
    if t.n < 2:
        raise MetricError("at least two points are required")


def ari(table, labels_b=None) -> float:
    """Adjusted Rand index (Hubert and Arabie)."""
    t = _table(table, labels_b)
    _require_pairs(t)
    tp, sa, sb = _pair_counts(t)
    total = t.n * (t.n - 1) // 2
    expected = sa * sb / total
    max_index = (sa + sb) / 2
    if max_index == expected:
        return 1.0
    return (tp - expected) / (max_index - expected)


def fowlkes_mallows(table, labels_b=None) -> float:
    """Geometric mean of pair precision and recall.

    A zero denominator scores 0.0, except when both labelings put every
    point in its own cluster, which is the same partition and scores 1.0.
    """
    t = _table(table, labels_b)
    _require_pairs(t)
    tp, sa, sb = _pair_counts(t)
    if sa == 0 and sb == 0:
        # both all-singletons: the partitions coincide
        return 1.0
    if sa == 0 or sb == 0:
        return 0.0
    return tp / np.sqrt(float(sa) * float(sb))


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def mutual_info(t: ContingencyTable) -> float:
    n = t.n
    nz = t.matrix > 0
    nij = t.matrix[nz].astype(np.float64)
    outer = np.outer(t.a, t.b)[nz].astype(np.float64)
    return float(np.sum(nij / n * (np.log(nij * n) - np.log(outer))))


def expected_mutual_info(t: ContingencyTable) -> float:
    """Expected MI under the hypergeometric permutation model."""
    n = t.n
    a = t.a
    b = t.b
    emi = 0.0
    lg_n = gammaln(n + 1)
    for ai in a:
        for bj in b:
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            if lo > hi:
                continue
            nij = np.arange(lo, hi + 1, dtype=np.float64)
            log_p = (
                gammaln(ai + 1) + gammaln(bj + 1) + gammaln(n - ai + 1) + gammaln(n - bj + 1)
                - lg_n - gammaln(nij + 1) - gammaln(ai - nij + 1) - gammaln(bj - nij + 1)
                - gammaln(n - ai - bj + nij + 1)
            )
            term = nij / n * (np.log(n * nij) - np.log(float(ai) * float(bj)))
            emi += float(np.sum(term * np.exp(log_p)))
    return emi


def ami(table, labels_b=None) -> float:
    """Adjusted mutual information, arithmetic-mean normalisation.

    A 0/0 ratio (e.g. a constant labeling) scores 0.0.  Identical labelings
    with at least two clusters score exactly 1.0.
    """
    t = _table(table, labels_b)
    _require_pairs(t)
    ka, kb = t.matrix.shape
    if ka == kb and ka > 1 and np.count_nonzero(t.matrix) == ka and np.all(
        t.matrix.max(axis=1) == t.a
    ):
        return 1.0
    mi = mutual_info(t)
    emi = expected_mutual_info(t)
    ha = _entropy(t.a, t.n)
    hb = _entropy(t.b, t.n)
    denom = (ha + hb) / 2 - emi
    numer = mi - emi
    if abs(denom) < 1e-15:
        return 0.0
    if abs(numer) < 1e-15:
        return 0.0
    return numer / denom


def silhouette_samples(X, labels, chunk: int = 1024) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    labels = np.asarray(labels)
    uniq, lab = np.unique(labels, return_inverse=True)
    lab = lab.reshape(-1)
    k = len(uniq)
    if k < 2:
        raise UndefinedScoreError("silhouette needs at least two clusters")
    sizes = np.bincount(lab, minlength=k).astype(np.float64)
    onehot = np.zeros((len(X), k))
    onehot[np.arange(len(X)), lab] = 1.0
    out = np.zeros(len(X))
    for s in range(0, len(X), chunk):
        xs = X[s:s + chunk]
        dist = cdist(xs, X)
        per_cluster = dist @ onehot
        own = lab[s:s + chunk]
        rows = np.arange(len(xs))
        own_size = sizes[own]
        a = np.where(own_size > 1, per_cluster[rows, own] / np.maximum(own_size - 1, 1), 0.0)
        means = per_cluster / sizes[None, :]
        means[rows, own] = np.inf
        b = means.min(axis=1)
        denom = np.maximum(a, b)
        val = np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
        val[own_size == 1] = 0.0
        out[s:s + chunk] = val
    return out


def silhouette(X, labels) -> float:
    """Mean silhouette coefficient with Euclidean distance.

    Points in singleton clusters contribute 0.
    """
    return float(np.mean(silhouette_samples(X, labels)))


def silhouette_subsampled(X, labels, cap: int, seed: int = 0) -> float:
    """Silhouette on a seeded uniform subsample of at most ``cap`` points."""
    if cap < 2:
        raise MetricError("cap must be at least 2")
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    if len(X) <= cap:
        return silhouette(X, labels)
    idx = np.sort(np.random.default_rng(seed).choice(len(X), size=cap, replace=False))
    return silhouette(X[idx], labels[idx])


@dataclass
class SweepEntry:
    h: float
    score: float | None
    n_clusters: int


@dataclass
class BandwidthSweepResult:
    entries: list[SweepEntry] = field(default_factory=list)
    best_h: float | None = None

    @property
    def best(self) -> SweepEntry:
        return next(e for e in self.entries if e.h == self.best_h)


def tune_bandwidth(
    X,
    clusterer: Callable[[np.ndarray, float], np.ndarray],
    h_grid: Sequence[float] = DEFAULT_H_GRID,
    subsample: int | None = None,
    seed: int = 0,
) -> BandwidthSweepResult:
    """Pick the bandwidth in ``h_grid`` with the largest silhouette score.

    ``clusterer(X, h)`` must return per-point labels.  Bandwidths that give
    fewer than two clusters are recorded with ``score=None``.  Ties go to the
    smallest bandwidth.
    """
    h_grid = [float(h) for h in h_grid]
    if not h_grid:
        raise TuningError("empty bandwidth grid")
    if any(not 0 < h <= 1 for h in h_grid):
        raise TuningError("bandwidths must lie in (0, 1]")
    X = np.asarray(X, dtype=np.float64)
    result = BandwidthSweepResult()
    best = None
    for h in sorted(h_grid):
        labels = np.asarray(clusterer(X, h))
        k = len(np.unique(labels))
        score = None
        if k >= 2:
            if subsample is not None:
                score = silhouette_subsampled(X, labels, subsample, seed)
            else:
                score = silhouette(X, labels)
            if best is None or score > best[0]:
                best = (score, h)
        result.entries.append(SweepEntry(h, score, k))
    if best is None:
        raise TuningError("no bandwidth produced at least two clusters")
    result.best_h = best[1]
    return result
