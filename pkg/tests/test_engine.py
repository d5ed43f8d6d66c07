import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gridshift import engine
from gridshift.engine import ConvergenceWarning, EngineConfig, has_converged, iterate_once
from gridshift.grid import ActiveGridMap, CellRecord, InvalidBandwidthError, build_active_grid, neighborhood
from helpers import separated_groups


def cellmap(h, cells):
    out = ActiveGridMap(h, len(next(iter(cells))))
    nxt = 0
    for key, (c, cnt) in cells.items():
        out.cells[key] = CellRecord(np.atleast_1d(np.asarray(c, float)), cnt, list(range(nxt, nxt + cnt)))
        nxt += cnt
    return out


def reference_iterate(amap):
    """Plain dict-and-loop transcription of one sweep, used as an oracle."""
    snap = {k: c.count for k, c in amap.cells.items()}
    cen = {k: c.centroid.copy() for k, c in amap.cells.items()}
    for key in sorted(cen):
        num = np.zeros(amap.d)
        den = 0
        for nb in neighborhood(key):
            if nb in cen:
                num += snap[nb] * cen[nb]
                den += snap[nb]
        cen[key] = num / den
    merged = {}
    for key in sorted(cen):
        nk = tuple(int(v) for v in np.floor(cen[key] / amap.h))
        if nk in merged:
            c0, n0, m0 = merged[nk]
            n1 = amap.cells[key].count
            merged[nk] = ((n0 * c0 + n1 * cen[key]) / (n0 + n1), n0 + n1, m0 + list(amap.cells[key].members))
        else:
            merged[nk] = (cen[key], amap.cells[key].count, list(amap.cells[key].members))
    return merged


class TestIterateOnce:
    def test_hand_trace_sequential(self):
        amap = cellmap(0.5, {(0,): (0.4, 3), (1,): (0.6, 1)})
        out, changed = iterate_once(amap)
        assert changed
        assert out.keys() == [(0,)]
        cell = out[(0,)]
        assert cell.count == 4
        assert cell.centroid[0] == pytest.approx(0.459375, abs=1e-15)

    def test_isolated_cell_unchanged(self):
        amap = cellmap(0.5, {(2,): (1.2, 4)})
        out, changed = iterate_once(amap)
        assert not changed
        assert out[(2,)].centroid[0] == 1.2

    def test_far_cells_unchanged(self):
        amap = cellmap(1.0, {(0, 0): ([0.5, 0.5], 2), (3, 0): ([3.5, 0.5], 1)})
        out, changed = iterate_once(amap)
        assert not changed
        assert out.keys() == [(0, 0), (3, 0)]

    @settings(max_examples=80, deadline=None)
    @given(
        st.integers(1, 3).flatmap(
            lambda d: arrays(np.float64, st.tuples(st.integers(1, 40), st.just(d)),
                             elements=st.floats(0, 1, allow_nan=False))
        ),
        st.sampled_from([0.05, 0.1, 0.2, 0.3]),
    )
    def test_matches_reference_sweep(self, X, h):
        amap = build_active_grid(X, h)
        out, _ = iterate_once(amap)
        ref = reference_iterate(amap)
        assert sorted(ref) == out.keys()
        for key, (c, cnt, mem) in ref.items():
            assert out[key].count == cnt
            np.testing.assert_allclose(out[key].centroid, c, rtol=1e-12, atol=1e-14)
            assert sorted(out[key].members.tolist()) == sorted(mem)
        out.check_partition(len(X))
        assert len(out) <= len(amap)


class TestHasConverged:
    def test_single(self):
        assert has_converged(cellmap(1.0, {(0,): (0.5, 1)}))

    def test_adjacent(self):
        assert not has_converged(cellmap(1.0, {(0,): (0.5, 1), (1,): (1.5, 1)}))

    def test_gap(self):
        assert has_converged(cellmap(1.0, {(0,): (0.5, 1), (3,): (3.5, 1)}))

    def test_diagonal_counts_as_neighbour(self):
        assert not has_converged(cellmap(1.0, {(0, 0): ([0.5, 0.5], 1), (1, 1): ([1.5, 1.5], 1)}))


class TestRun:
    def test_one_cell(self):
        X = 0.3 + 0.01 * np.arange(5)[:, None]
        lab = engine.run(X, 0.5)
        assert lab.n_clusters == 1
        assert lab.iterations == 1
        assert lab.converged

    def test_two_groups(self):
        rng = np.random.default_rng(3)
        X, y = separated_groups(rng, 2, 10, 2, 0.1)
        lab = engine.run(X, 0.1)
        assert lab.n_clusters == 2
        np.testing.assert_array_equal(lab.labels, y)
        for g in range(2):
            np.testing.assert_allclose(lab.centroids[g], X[y == g].mean(axis=0), rtol=1e-12)

    def test_bad_h(self):
        with pytest.raises(InvalidBandwidthError):
            engine.run([[0.0]], 0.0)

    def test_max_iterations_flags_partial_result(self):
        X = np.linspace(0, 1, 200)[:, None]
        with pytest.warns(ConvergenceWarning):
            lab = engine.run(X, EngineConfig(h=0.01, max_iterations=1))
        assert not lab.converged
        assert lab.iterations == 1
        assert len(lab.labels) == 200

    def test_deterministic(self):
        X = np.random.default_rng(11).random((300, 3))
        a = engine.run(X, 0.15)
        b = engine.run(X.copy(), 0.15)
        np.testing.assert_array_equal(a.labels, b.labels)
        np.testing.assert_array_equal(a.centroids, b.centroids)
        assert a.iterations == b.iterations

    def test_labels_follow_sorted_keys(self):
        X = np.array([[5.0], [0.1], [5.05], [0.12]])
        lab = engine.run(X, 0.5)
        assert lab.labels.tolist() == [1, 0, 1, 0]


class TestTraced:
    def test_single_cell_one_snapshot(self):
        _, snaps = engine.run_traced([[0.2], [0.25]], 1.0)
        assert len(snaps) == 1

    def test_two_groups_drop_to_two(self):
        rng = np.random.default_rng(0)
        X, _ = separated_groups(rng, 2, 30, 1, 0.1, spread=0.25)
        start = len(build_active_grid(X, 0.1))
        lab, snaps = engine.run_traced(X, 0.1)
        assert start > 2
        assert len(snaps[-1]) == 2
        assert lab.initial_cells == start

    @settings(max_examples=40, deadline=None)
    @given(
        st.integers(1, 3).flatmap(
            lambda d: arrays(np.float64, st.tuples(st.integers(1, 60), st.just(d)),
                             elements=st.floats(-1, 1, allow_nan=False))
        ),
        st.sampled_from([0.05, 0.1, 0.25, 0.5]),
    )
    def test_trace_invariants(self, X, h):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            lab, snaps = engine.run_traced(X, EngineConfig(h=h, max_iterations=200))
        lo, hi = X.min(axis=0), X.max(axis=0)
        ms = [len(build_active_grid(X, h))] + [len(s) for s in snaps]
        assert all(b <= a for a, b in zip(ms, ms[1:]))
        assert [r.m for r in lab.history] == ms[1:]
        for s in snaps:
            s.check_partition(len(X))
            for c in s.cells.values():
                assert np.all(c.centroid >= lo - 1e-12) and np.all(c.centroid <= hi + 1e-12)
        if lab.converged:
            assert has_converged(snaps[-1]) or (
                len(snaps) >= 2 and snaps[-1].keys() == snaps[-2].keys()
            )
        assert len(np.unique(lab.labels)) == lab.n_clusters

    def test_m_avg(self):
        X = np.random.default_rng(1).random((400, 2))
        lab = engine.run(X, 0.1)
        ms = [lab.initial_cells] + [r.m for r in lab.history[:-1]]
        assert lab.m_avg == pytest.approx(np.mean(ms))


@pytest.mark.xfail(strict=True, raises=AssertionError, reason="min-max Iris keys at h=0.78 all fall in {0,1}^4 and merge into one cell")
def test_iris_078_reference_ari():
    from gridshift.datasets import load_iris, minmax
    from gridshift.metrics import ari

    X, y = load_iris()
    assert abs(ari(y, engine.run(minmax(X), 0.78).labels) - 0.6246) <= 0.06
