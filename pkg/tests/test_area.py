import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spatialdecay import InsufficientPaths, PathResult, overlap_test, pool_area, unicity_report
from spatialdecay.area import format_unicity_report, pool_samples
from spatialdecay.montecarlo import McResult

centre = st.floats(-50, 50)
half = st.floats(0, 10)


def result(pid, d2s, u, k=2.0):
    return PathResult(pid, {"d2s": d2s, "lpas4m": 50.0, "rc": 6.0}, {"d2s": u, "lpas4m": 0.2, "rc": 0.3}, k)


class TestOverlap:
    def test_disjoint_pair(self):
        assert not overlap_test((6.8, 0.7), (5.4, 0.6))

    def test_touching_counts(self):
        assert overlap_test((0.0, 1.0), (2.0, 1.0))

    def test_negative_half_width(self):
        with pytest.raises(ValueError):
            overlap_test((0, -1), (0, 1))

    @given(centre, half, centre, half)
    def test_symmetric(self, ca, ha, cb, hb):
        assert overlap_test((ca, ha), (cb, hb)) == overlap_test((cb, hb), (ca, ha))

    @given(centre, half)
    def test_reflexive(self, c, h):
        assert overlap_test((c, h), (c, h))


class TestPooling:
    def test_two_paths(self):
        area = pool_area([result("A", 6.8, 0.4), result("B", 5.4, 0.4)])
        assert area.pooled_u("d2s") == pytest.approx(math.sqrt(0.49 + 0.16), abs=1e-12)
        assert area.pooled_u("d2s") == pytest.approx(0.806, abs=1e-3)
        assert area.notes

    def test_four_paths(self):
        area = pool_area([result(p, m, 0.4) for p, m in zip("ABCD", (6.8, 5.4, 7.0, 5.2))])
        assert area.pooled_u("d2s") == pytest.approx(0.9, abs=1e-12)
        assert area.pooling["d2s"].pooled_mean == pytest.approx(6.1)
        assert not area.unique("d2s")
        assert area.unique("lpas4m")

    def test_needs_two_paths(self):
        with pytest.raises(InsufficientPaths):
            pool_area([result("A", 6.0, 0.4)])

    @given(st.lists(st.tuples(st.floats(0, 10), st.floats(0.01, 2)), min_size=2, max_size=8))
    def test_pooled_u_bounds(self, items):
        area = pool_area([result(str(i), m, u) for i, (m, u) in enumerate(items)])
        us = [u for _, u in items]
        assert area.pooled_u("d2s") >= min(us) - 1e-12
        assert area.pooled_u("d2s") >= math.sqrt(np.mean(np.square(us))) - 1e-12

    @given(st.lists(st.tuples(st.floats(0, 10), st.floats(0.01, 2)), min_size=2, max_size=6), st.data())
    def test_duplicate_path_keeps_unicity(self, items, data):
        results = [result(str(i), m, u) for i, (m, u) in enumerate(items)]
        dup = data.draw(st.sampled_from(results))
        before = pool_area(results).unique("d2s")
        after = pool_area(results + [PathResult("dup", dup.values, dup.uncertainties, dup.k)]).unique("d2s")
        if before:
            assert after

    def test_samples_pooling(self):
        rng = np.random.default_rng(0)

        def fake(mean):
            s = {n: rng.normal(mean, 0.4, 20000) for n in ("d2s", "lpas4m", "rc")}
            return McResult({}, 20000, True, samples=s)

        out = pool_samples([fake(6.8), fake(5.4)])
        assert out["d2s"]["u"] == pytest.approx(0.806, abs=0.01)


class TestReport:
    def test_disjoint_pairs_listed(self):
        a = PathResult("A", {"d2s": 6.8, "lpas4m": 50, "rc": 6}, {"d2s": 0.35, "lpas4m": 0.2, "rc": 0.3})
        b = PathResult("B", {"d2s": 5.4, "lpas4m": 50, "rc": 6}, {"d2s": 0.30, "lpas4m": 0.2, "rc": 0.3})
        rep = unicity_report(pool_area([a, b]))
        assert rep["snq"]["d2s"]["disjoint_pairs"] == [["A", "B"]]
        assert rep["snq"]["lpas4m"]["unique"]
        text = format_unicity_report(rep)
        assert "NOT unique" in text and "A and B" in text

    def test_interval(self):
        r = result("A", 6.8, 0.35)
        assert r.interval("d2s") == pytest.approx((6.1, 7.5))
