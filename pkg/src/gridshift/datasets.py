"""Bundled datasets and seeded synthetic generators."""

from __future__ import annotations

import csv
import io
from importlib import resources

import numpy as np


def _read_bundled(name: str):
    text = resources.files("gridshift").joinpath("data", name).read_text(encoding="utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], rows[1:]


def load_iris():
    """Fisher's Iris: ``(X, y)`` with 150 rows, 4 features and integer species ids."""
    _, rows = _read_bundled("iris.csv")
    X = np.array([[float(v) for v in r[:4]] for r in rows])
    _, y = np.unique([r[4] for r in rows], return_inverse=True)
    return X, y.astype(np.int64)


def load_prnn():
    """Ripley's synthetic two-class training set: 250 rows, 2 features."""
    _, rows = _read_bundled("prnn_synth.csv")
    X = np.array([[float(r[0]), float(r[1])] for r in rows])
    y = np.array([int(r[2]) for r in rows], dtype=np.int64)
    return X, y


def bundled_path(name: str):
    """Filesystem path of a bundled CSV (``iris.csv`` or ``prnn_synth.csv``)."""
    return resources.files("gridshift").joinpath("data", name)


def minmax(X) -> np.ndarray:
    """Scale each column to [0, 1]; constant columns map to 0."""
    X = np.asarray(X, dtype=np.float64)
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    return np.divide(X - lo, span, out=np.zeros_like(X), where=span > 0)


def mixture_means(k: int, d: int, min_sep: float, rng: np.random.Generator,
                  lo: float = 0.15, hi: float = 0.85, max_tries: int = 100_000) -> np.ndarray:
    """Rejection-sample ``k`` means in ``[lo, hi]^d`` at pairwise distance >= ``min_sep``."""
    means = []
    for _ in range(max_tries):
        c = rng.uniform(lo, hi, size=d)
        if all(np.linalg.norm(c - m) >= min_sep for m in means):
            means.append(c)
            if len(means) == k:
                return np.array(means)
    raise ValueError(f"could not place {k} means {min_sep} apart in {d} dimensions")


def gaussian_mixture(n: int, d: int = 3, k: int = 10, std: float = 0.03,
                     min_sep: float = 0.3, seed: int = 0):
    """Equal-weight isotropic Gaussian mixture; returns ``(X, y)``."""
    if n < 1 or k < 1:
        raise ValueError("n and k must be positive")
    rng = np.random.default_rng(seed)
    means = mixture_means(k, d, min_sep, rng)
    y = np.arange(n, dtype=np.int64) % k
    X = means[y] + rng.normal(0.0, std, size=(n, d))
    return X, y
