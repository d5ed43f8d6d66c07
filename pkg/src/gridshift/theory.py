"""Empirical checks of GridShift's convergence behaviour.

Two kinds of evidence are produced from traced engine runs:

* the Gaussian shrinkage experiment compares the per-iteration spread of
  the cell centroids (and the number of active cells) on normal data with
  the closed-form recurrences ``s' = s / (1 + 2.25 h^2 / s^2)`` and
  ``k = prod(floor(6 s / h) + 1)``;
* the descent check replays every single-cell update of a trace with its
  neighbours frozen and verifies that the weighted grid loss does not go up.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .baselines import kde_loss
from .grid import ActiveGridMap, as_dataset, build_active_grid, check_bandwidth


def predicted_ratio(s, h: float) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    return 1.0 / (1.0 + 2.25 * h * h / (s * s))


def predicted_step(s, h: float) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    out = np.zeros_like(s)
    nz = s > 0
    out[nz] = s[nz] * predicted_ratio(s[nz], h)
    return out


def predicted_cells(s, h: float) -> int:
    return int(np.prod(np.floor(6.0 * np.asarray(s, dtype=np.float64) / h) + 1))


def weighted_spread(amap: ActiveGridMap) -> np.ndarray:
    """Per-axis standard deviation of the centroids, each weighted by its count."""
    cells = list(amap.cells.values())
    cen = np.array([c.centroid for c in cells]).reshape(len(cells), amap.d)
    w = np.array([c.count for c in cells], dtype=np.float64)
    mu = w @ cen / w.sum()
    return np.sqrt(w @ (cen - mu) ** 2 / w.sum())


@dataclass
class GaussianExperimentRecord:
    h: float
    k: list[int] = field(default_factory=list)
    s_emp: list[np.ndarray] = field(default_factory=list)
    s_hat: list[np.ndarray] = field(default_factory=list)
    k_hat: list[int] = field(default_factory=list)

    @property
    def first_ratio(self) -> np.ndarray:
        """Empirical spread after one iteration over the initial spread, per axis."""
        if len(self.s_emp) < 2:
            return np.ones_like(self.s_emp[0])
        s0 = self.s_emp[0]
        return np.divide(self.s_emp[1], s0, out=np.ones_like(s0), where=s0 > 0)

    def to_csv(self) -> str:
        d = len(self.s_emp[0])
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(
            ["t", "k", "k_hat"]
            + [f"s_emp_axis{j}" for j in range(d)]
            + [f"s_hat_axis{j}" for j in range(d)]
        )
        for t, (k, kh, se, sh) in enumerate(zip(self.k, self.k_hat, self.s_emp, self.s_hat)):
            w.writerow([t, k, kh] + [f"{v:.10g}" for v in se] + [f"{v:.10g}" for v in sh])
        return buf.getvalue()


def gaussian_experiment(n: int, d: int, s, h: float, seed: int = 0,
                        max_iterations: int = 1000) -> GaussianExperimentRecord:
    """Trace GridShift on ``n`` draws from ``N(0, diag(s^2))``.

    Row ``t`` holds the state after ``t`` iterations (row 0 is the initial
    grid).  Predictions are seeded with the empirical spread of row 0.
    """
    h = check_bandwidth(h)
    if n < 1000:
        raise ValueError("n must be at least 1000")
    if not 1 <= d <= 5:
        raise ValueError("d must be between 1 and 5")
    s = np.broadcast_to(np.asarray(s, dtype=np.float64), (d,)).copy()
    if np.any(s < 0):
        raise ValueError("standard deviations must be non-negative")
    X = np.random.default_rng(seed).normal(0.0, 1.0, size=(n, d)) * s
    start = build_active_grid(X, h)
    _, snaps = engine.run_traced(X, engine.EngineConfig(h=h, max_iterations=max_iterations))
    rec = GaussianExperimentRecord(h=h)
    s_hat = weighted_spread(start)
    for amap in [start] + snaps:
        rec.k.append(len(amap))
        rec.s_emp.append(weighted_spread(amap))
        rec.s_hat.append(s_hat)
        rec.k_hat.append(predicted_cells(s_hat, h))
        s_hat = predicted_step(s_hat, h)
    return rec


@dataclass
class DescentReport:
    checked: int = 0
    strict: int = 0
    violations: list[tuple] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _fixed_set_loss(z, refs, a, n_total) -> float:
    r = np.array([q for q, _ in refs])
    m = np.array([w for _, w in refs], dtype=np.float64)
    return float(m @ np.sum((r - z) ** 2, axis=1) + (n_total - m.sum()) * a)


def check_descent(X, h: float, a: float | None = None, trace=None, rtol: float = 1e-12,
                  fixed_set: bool = False) -> DescentReport:
    """Replay every cell update of a traced run and compare the grid loss.

    For each update the references are the neighbour centroids and snapshot
    counts that fed it.  The loss at the new centroid must not exceed the
    loss at the old one, and must be strictly lower whenever the centroid
    moved.  ``a`` defaults to the squared diameter of the data's bounding
    box.  ``trace`` may be a precomputed ``run_traced`` snapshot list.

    By default the loss is :func:`kde_loss`, whose neighbour set depends on
    the evaluation point, so a reference can drop out when the centroid
    changes cell.  With ``fixed_set=True`` every reference that fed the
    update stays in the sum at both points.
    """
    X = as_dataset(X)
    h = check_bandwidth(h)
    n = len(X)
    if a is None:
        a = float(np.sum((X.max(axis=0) - X.min(axis=0)) ** 2))
        if a == 0.0:
            a = 1.0
    if trace is None:
        _, trace = engine.run_traced(X, h)
    report = DescentReport()
    for t, amap in enumerate([build_active_grid(X, h)] + list(trace[:-1])):
        keys, old, new, counts, nbrs = engine.sweep(amap)
        current = old.copy()
        for i, nb in enumerate(nbrs):
            refs = [(current[j], counts[j]) for j in nb]
            z_old, z_new = current[i], new[i]
            if fixed_set:
                f_old = _fixed_set_loss(z_old, refs, a, n)
                f_new = _fixed_set_loss(z_new, refs, a, n)
            else:
                f_old = kde_loss(z_old, refs, h, a, n)
                f_new = kde_loss(z_new, refs, h, a, n)
            report.checked += 1
            tol = rtol * max(abs(f_old), 1.0)
            drop = float(counts[nb].sum() * np.sum((z_old - z_new) ** 2))
            if drop > tol:
                report.strict += 1
                if not f_new < f_old:
                    report.violations.append((t, keys[i], f_old, f_new))
            elif f_new > f_old + tol:
                report.violations.append((t, keys[i], f_old, f_new))
            current[i] = z_new
    return report


@dataclass
class MonotoneReport:
    k: list[int]

    @property
    def non_increasing(self) -> bool:
        return all(b <= a for a, b in zip(self.k, self.k[1:]))

    @property
    def final_k(self) -> int:
        return self.k[-1]


def monotone_cells_report(trace, initial: ActiveGridMap | None = None) -> MonotoneReport:
    ks = ([len(initial)] if initial is not None else []) + [len(a) for a in trace]
    return MonotoneReport(ks)
