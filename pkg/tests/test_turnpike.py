from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randgap.errors import DomainError, SearchBudgetExceeded
from randgap.qcore import Spectrum
from randgap.turnpike import GapMultiset, gap_multiset, is_unique_gap, reconstruct_spectrum, reflect


def _gaps(points):
    p = np.asarray(points, dtype=float)
    i, j = np.tril_indices(p.size, -1)
    return np.sort(np.abs(p[i] - p[j]))


def brute_force(gaps, tol=1e-9):
    """Every spectrum whose gaps match, by exhaustive placement.

    Each interior point sits at a distance from 0 that is itself a gap,
    so candidates are subsets of the gap values.
    """
    g = np.sort(np.asarray(gaps, dtype=float))
    n = int((1 + np.sqrt(1 + 8 * g.size)) / 2)
    width = g[-1]
    sols = []
    for interior in combinations(sorted(set(np.round(g[:-1], 12))), n - 2):
        pts = np.array([0.0, *interior, width])
        if np.allclose(_gaps(pts), g, atol=tol):
            sols.append(pts)
    return sols


def _random_unique_spectrum(n, rng):
    while True:
        s = np.concatenate([[0.0], np.sort(rng.uniform(0, 10, n - 1))])
        if is_unique_gap(s, 1e-6):
            return s


class TestGapMultiset:
    def test_triangular_size(self):
        with pytest.raises(DomainError):
            GapMultiset((1.0, 2.0))

    def test_positive(self):
        with pytest.raises(DomainError):
            GapMultiset((0.0, 1.0, 1.0))

    def test_default_tolerance(self):
        assert GapMultiset((1.0, 2.0, 3.0)).tolerance == pytest.approx(3e-9)
        assert GapMultiset((1.0, 2.0, 3.0)).levels == 3


class TestReconstruct:
    def test_three_gaps(self):
        sols = {s.values for s in reconstruct_spectrum([1, 2, 3])}
        assert sols == {(0.0, 1.0, 3.0), (0.0, 2.0, 3.0)}
        assert {tuple(b) for b in brute_force([1, 2, 3])} == sols

    def test_single_gap(self):
        assert [s.values for s in reconstruct_spectrum([2.5])] == [(0.0, 2.5)]

    def test_inconsistent(self):
        assert reconstruct_spectrum([1.0, 1.0, 5.0]) == []

    def test_homometric_pair(self):
        # {0,1,4,10,12,17} and {0,1,8,11,13,17} share a gap multiset
        sols = {s.values for s in reconstruct_spectrum(_gaps([0, 1, 4, 10, 12, 17]))}
        assert (0.0, 1.0, 4.0, 10.0, 12.0, 17.0) in sols
        assert (0.0, 1.0, 8.0, 11.0, 13.0, 17.0) in sols
        assert len(sols) == 4

    def test_arithmetic_progression(self):
        sols = reconstruct_spectrum(_gaps([0, 1, 2, 3, 4]))
        assert [s.values for s in sols] == [(0.0, 1.0, 2.0, 3.0, 4.0)]

    def test_node_budget(self):
        with pytest.raises(SearchBudgetExceeded):
            reconstruct_spectrum(_gaps(np.arange(12)), node_budget=5)

    @pytest.mark.parametrize("n", [3, 4])
    def test_matches_brute_force(self, rng, n):
        for _ in range(50):
            s = _random_unique_spectrum(n, rng)
            g = _gaps(s)
            ours = sorted(tuple(x.values) for x in reconstruct_spectrum(g))
            ref = sorted(tuple(x) for x in brute_force(g))
            assert len(ours) == len(ref)
            assert np.allclose(ours, ref, atol=1e-9)

    def test_floating_point_gaps(self, rng):
        s = _random_unique_spectrum(5, rng)
        g = _gaps(s) * (1 + 1e-13 * rng.standard_normal(10))
        sols = reconstruct_spectrum(g)
        assert len(sols) == 2
        assert any(np.allclose(x.values, s, atol=1e-8) for x in sols)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.integers(1, 40), min_size=1, max_size=6, unique=True))
    def test_solutions_reproduce_gaps(self, pts):
        pts = [0, *pts]
        g = _gaps(pts)
        sols = reconstruct_spectrum(g)
        assert sols
        for s in sols:
            assert np.allclose(_gaps(s.values), g)


class TestUniqueGap:
    def test_examples(self):
        assert is_unique_gap(Spectrum((0.0, 1.0, 3.0)))
        assert not is_unique_gap(Spectrum((0.0, 1.0, 2.0)))
        assert not is_unique_gap(Spectrum((0.0, 1.0, 2.0, 4.0)))

    def test_degenerate_inputs(self):
        assert is_unique_gap([0.0])
        assert not is_unique_gap([0.0, 0.0, 1.0])


class TestReflect:
    def test_example(self):
        assert reflect(Spectrum((0.0, 1.0, 3.0))).values == (0.0, 2.0, 3.0)

    @given(st.lists(st.integers(0, 50), min_size=1, max_size=7))
    def test_involution_and_gaps(self, pts):
        s = Spectrum(tuple(float(x) for x in np.sort(np.array(pts) - min(pts))))
        assert reflect(reflect(s)).values == s.values
        assert np.array_equal(np.sort(_gaps(reflect(s).values)), np.sort(_gaps(s.values)))

    def test_gap_multiset_of_reflection(self):
        s = Spectrum((0.0, 0.3, 1.1, 2.0))
        assert gap_multiset(reflect(s)).values == pytest.approx(gap_multiset(s).values)
