"""Dense linear algebra for small quantum systems.

Hamiltonians and unitaries are stored as dense ``(dim, dim)`` complex
arrays with ``dim <= 16``.  Exponentials go through an exact Hermitian
eigendecomposition, which at these sizes is both cheap and accurate to
machine precision.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError

__all__ = [
    "MAX_DIM",
    "HermitianOperator",
    "UnitaryMatrix",
    "Spectrum",
    "GapMatrix",
    "AdiabaticSchedule",
    "PAULI_I",
    "PAULI_X",
    "PAULI_Y",
    "PAULI_Z",
    "gue_sample",
    "eig_decompose",
    "evolve",
    "timeordered_evolve",
    "normalize_spectrum",
    "spectrum_to_gaps",
]

MAX_DIM = 16
UNITARITY_TOL = 1e-10

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def _frozen(a):
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """A dense Hermitian matrix of dimension at most :data:`MAX_DIM`."""

    entries: np.ndarray

    def __post_init__(self):
        a = _frozen(self.entries)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise DomainError(f"expected a square matrix, got shape {a.shape}")
        if a.shape[0] > MAX_DIM:
            raise DomainError(f"dim {a.shape[0]} exceeds {MAX_DIM}")
        if not np.array_equal(a, a.conj().T):
            raise DomainError("matrix is not Hermitian")
        object.__setattr__(self, "entries", a)

    @property
    def dim(self):
        return self.entries.shape[0]

    @classmethod
    def symmetrized(cls, a):
        """Build from ``(a + a^dagger) / 2``, absorbing rounding asymmetry."""
        a = np.asarray(a, dtype=complex)
        return cls((a + a.conj().T) / 2)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


@dataclass(frozen=True, eq=False)
class UnitaryMatrix:
    """A dense unitary, validated to ``max|U^dagger U - I| <= 1e-10``."""

    entries: np.ndarray

    def __post_init__(self):
        a = _frozen(self.entries)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DomainError(f"expected a square matrix, got shape {a.shape}")
        dev = np.max(np.abs(a.conj().T @ a - np.eye(a.shape[0])))
        if dev > UNITARITY_TOL:
            raise DomainError(f"matrix is not unitary (deviation {dev:.3g})")
        object.__setattr__(self, "entries", a)

    @property
    def dim(self):
        return self.entries.shape[0]

    @property
    def dagger(self):
        return UnitaryMatrix(self.entries.conj().T)

    def __matmul__(self, other):
        if isinstance(other, UnitaryMatrix):
            return UnitaryMatrix(self.entries @ other.entries)
        return self.entries @ np.asarray(other)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


@dataclass(frozen=True)
class Spectrum:
    """Ascending eigenvalues shifted so the lowest one is exactly zero."""

    values: tuple

    def __post_init__(self):
        v = tuple(float(x) for x in self.values)
        if not v:
            raise DomainError("spectrum must be non-empty")
        if v[0] != 0.0:
            raise DomainError("spectrum must be normalized so values[0] == 0")
        if any(b < a for a, b in zip(v, v[1:])):
            raise DomainError("spectrum values must be ascending")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype or float)


@dataclass(frozen=True, eq=False)
class GapMatrix:
    """``gaps[i, j] = lambda_i - lambda_j``."""

    gaps: np.ndarray

    def __post_init__(self):
        g = np.array(self.gaps, dtype=float, copy=True)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise DomainError(f"expected a square matrix, got shape {g.shape}")
        if not np.array_equal(g, -g.T):
            raise DomainError("gap matrix must be antisymmetric")
        g.setflags(write=False)
        object.__setattr__(self, "gaps", g)

    @property
    def dim(self):
        return self.gaps.shape[0]

    def lower(self):
        """The ``N(N-1)/2`` entries ``gaps[i, j]`` with ``i > j``."""
        i, j = np.tril_indices(self.dim, -1)
        return self.gaps[i, j]


def linear_interpolation(s):
    return s


@dataclass(frozen=True, eq=False)
class AdiabaticSchedule:
    """Interpolation ``H(s) = (1 - f(s)) h0 + f(s) hp`` over time ``anneal_time``.

    ``h0`` must be diagonal in the computational basis.  ``steps`` sets the
    number of midpoint slices used by :func:`timeordered_evolve`; when left
    as ``None`` it defaults to 256 per unit of ``T * ||hp - h0||``.
    """

    h0: HermitianOperator
    hp: HermitianOperator
    anneal_time: float
    steps: int = None
    interpolation: Callable = field(default=linear_interpolation)

    def __post_init__(self):
        h0 = self.h0 if isinstance(self.h0, HermitianOperator) else HermitianOperator(self.h0)
        hp = self.hp if isinstance(self.hp, HermitianOperator) else HermitianOperator(self.hp)
        if h0.dim != hp.dim:
            raise DomainError("h0 and hp dimensions differ")
        off = h0.entries - np.diag(np.diag(h0.entries))
        if np.any(off != 0):
            raise DomainError("h0 must be diagonal")
        if not np.isfinite(self.anneal_time) or self.anneal_time < 0:
            raise DomainError("anneal_time must be finite and non-negative")
        steps = self.steps
        if steps is None:
            scale = self.anneal_time * np.linalg.norm(hp.entries - h0.entries, 2)
            steps = max(1, int(np.ceil(256 * scale)))
        if int(steps) < 1:
            raise DomainError("steps must be >= 1")
        object.__setattr__(self, "h0", h0)
        object.__setattr__(self, "hp", hp)
        object.__setattr__(self, "steps", int(steps))

    @property
    def dim(self):
        return self.h0.dim

    def hamiltonian(self, s):
        f = self.interpolation(s)
        return (1 - f) * self.h0.entries + f * self.hp.entries


def _as_matrix(h):
    return h.entries if isinstance(h, (HermitianOperator, UnitaryMatrix)) else np.asarray(h)


def gue_sample(dim, rng):
    """Draw a GUE Hamiltonian ``(A + A^dagger) / 2``.

    ``A`` has independent entries whose real and imaginary parts are
    standard normal, so diagonal entries of the result have variance 1 and
    each real component of an off-diagonal entry has variance 1/2.
    """
    if not 2 <= dim <= MAX_DIM:
        raise DomainError(f"dim must lie in [2, {MAX_DIM}], got {dim}")
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return HermitianOperator((a + a.conj().T) / 2)


def eig_decompose(h):
    """Eigenvalues (ascending) and an eigenvector matrix of ``h``."""
    vals, vecs = np.linalg.eigh(_as_matrix(h))
    return vals, UnitaryMatrix(vecs)


def _expm_hermitian(h, t):
    vals, vecs = np.linalg.eigh(h)
    return (vecs * np.exp(-1j * vals * t)) @ vecs.conj().T


def evolve(h, t):
    """Return ``exp(-i h t)``."""
    if not np.isfinite(t):
        raise DomainError("t must be finite")
    return UnitaryMatrix(_expm_hermitian(_as_matrix(h), t))


def timeordered_evolve(sched):
    """Midpoint product approximation of the time-ordered propagator.

    Slice ``k`` (1-based) uses ``H(s)`` at ``s = (k - 1/2) / steps`` for a
    duration ``T / steps``; later slices multiply from the left.  The error
    relative to the exact time-ordered exponential is second order in
    ``1 / steps``.
    """
    n = sched.steps
    dt = sched.anneal_time / n
    w = np.eye(sched.dim, dtype=complex)
    if dt == 0:
        return UnitaryMatrix(w)
    for k in range(1, n + 1):
        w = _expm_hermitian(sched.hamiltonian((k - 0.5) / n), dt) @ w
    return UnitaryMatrix(w)


def normalize_spectrum(eigs):
    """Sort ascending and shift so the lowest value is zero."""
    v = np.sort(np.asarray(eigs, dtype=float).ravel())
    if v.size == 0:
        raise DomainError("cannot normalize an empty spectrum")
    return Spectrum(tuple(v - v[0]))


def spectrum_to_gaps(s):
    v = np.asarray(s.values if isinstance(s, Spectrum) else s, dtype=float)
    return GapMatrix(v[:, None] - v[None, :])
