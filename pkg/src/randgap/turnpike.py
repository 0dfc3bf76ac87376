"""Spectrum reconstruction from an unlabeled multiset of gaps.

This is the turnpike problem: recover a point set on a line, up to
translation and reflection, from its pairwise distances.  The solver is the
classic backtracking search that repeatedly places the largest unexplained
distance against one end of the line.
"""

import bisect
from dataclasses import dataclass
from math import isqrt

import numpy as np

from .errors import DomainError, SearchBudgetExceeded
from .qcore import Spectrum, normalize_spectrum

__all__ = ["GapMultiset", "reconstruct_spectrum", "is_unique_gap", "reflect", "gap_multiset"]


def _levels_for(m):
    n = (1 + isqrt(1 + 8 * m)) // 2
    return n if n * (n - 1) // 2 == m and n >= 2 else None


@dataclass(frozen=True)
class GapMultiset:
    """Positive pairwise gaps ``|l_i - l_j|``, ``i > j``, in any order."""

    values: tuple
    tolerance: float = None

    def __post_init__(self):
        v = tuple(sorted(float(x) for x in self.values))
        if _levels_for(len(v)) is None:
            raise DomainError(f"{len(v)} gaps is not N(N-1)/2 for any N >= 2")
        if v[0] <= 0:
            raise DomainError("gaps must be strictly positive")
        tol = 1e-9 * v[-1] if self.tolerance is None else float(self.tolerance)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "tolerance", tol)

    @property
    def levels(self):
        return _levels_for(len(self.values))


def gap_multiset(spectrum, tolerance=None):
    v = np.asarray(spectrum.values if isinstance(spectrum, Spectrum) else spectrum, dtype=float)
    i, j = np.tril_indices(v.size, -1)
    return GapMultiset(tuple(np.abs(v[i] - v[j])), tolerance)


class _TolerantMultiset:
    def __init__(self, values, tol):
        self.items = sorted(values)
        self.tol = tol

    def __len__(self):
        return len(self.items)

    def max(self):
        return self.items[-1]

    def take(self, x):
        """Remove the element closest to ``x`` if one lies within tolerance."""
        lo = bisect.bisect_left(self.items, x - self.tol)
        hi = bisect.bisect_right(self.items, x + self.tol)
        if lo == hi:
            return None
        k = min(range(lo, hi), key=lambda i: abs(self.items[i] - x))
        return self.items.pop(k)

    def put(self, x):
        bisect.insort(self.items, x)


def reconstruct_spectrum(gaps, tolerance=None, node_budget=1_000_000):
    """All spectra (lowest level at 0) whose gap multiset matches ``gaps``.

    Parameters
    ----------
    gaps : GapMultiset or iterable of float
    tolerance : float, optional
        Absolute matching tolerance; defaults to ``1e-9 * max(gaps)``.
    node_budget : int
        Abort with :class:`SearchBudgetExceeded` after this many placements.

    Returns
    -------
    list of Spectrum
        Distinct solutions, mirror images included.  Empty when the gaps
        are inconsistent with any spectrum.
    """
    if not isinstance(gaps, GapMultiset):
        gaps = GapMultiset(tuple(gaps), tolerance)
    elif tolerance is not None:
        gaps = GapMultiset(gaps.values, tolerance)
    tol = gaps.tolerance
    pool = _TolerantMultiset(gaps.values, tol)
    width = pool.items.pop()
    points = [0.0, width]
    found = []
    nodes = 0

    def place():
        nonlocal nodes
        if not len(pool):
            found.append(sorted(points))
            return
        y = pool.max()
        candidates = [y] if abs(width - 2 * y) <= tol else [y, width - y]
        for p in candidates:
            nodes += 1
            if nodes > node_budget:
                raise SearchBudgetExceeded(f"turnpike search exceeded {node_budget} nodes")
            taken = []
            for x in points:
                got = pool.take(abs(p - x))
                if got is None:
                    break
                taken.append(got)
            else:
                points.append(p)
                place()
                points.pop()
            for g in taken:
                pool.put(g)

    if len(pool):
        place()
    else:
        found.append(points[:])

    unique = []
    for sol in found:
        arr = np.asarray(sol)
        if not any(np.max(np.abs(arr - u)) < tol * max(1, arr.size) for u in unique):
            unique.append(arr)
    return [normalize_spectrum(u) for u in unique]


def is_unique_gap(spectrum, tolerance=1e-9):
    """True when no two pairwise gaps coincide within ``tolerance``."""
    v = np.asarray(spectrum.values if isinstance(spectrum, Spectrum) else spectrum, dtype=float)
    i, j = np.tril_indices(v.size, -1)
    g = np.sort(np.abs(v[i] - v[j]))
    return bool(np.all(np.diff(g) > tolerance))


def reflect(spectrum):
    """Mirror a spectrum about its midpoint."""
    v = np.asarray(spectrum.values if isinstance(spectrum, Spectrum) else spectrum, dtype=float)
    return normalize_spectrum(v.max() - v)
