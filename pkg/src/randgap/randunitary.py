"""Random and pseudo-random unitaries.

Exact Haar sampling uses the Ginibre-QR construction with the phase fix
that makes ``diag(R)`` positive.  The single-qubit Clifford group is
enumerated once by closing ``{H, S}`` under multiplication and serves as an
exact unitary 2-design.
"""

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .errors import DomainError
from .qcore import MAX_DIM, PAULI_X, PAULI_Y, PAULI_Z, UnitaryMatrix

__all__ = [
    "SamplerKind",
    "UnitarySampler",
    "haar_sample",
    "haar_samples",
    "euler_qubit",
    "euler_qubit_sample",
    "clifford_table",
    "clifford_qubit_sample",
    "subspace_haar",
    "MONOMIALS",
    "haar_moment",
    "design_check",
]


def haar_samples(dim, n, rng):
    """Stack of ``n`` Haar-random ``dim x dim`` unitaries, shape ``(n, dim, dim)``."""
    if not 1 <= dim <= MAX_DIM:
        raise DomainError(f"dim must lie in [1, {MAX_DIM}], got {dim}")
    z = rng.standard_normal((n, dim, dim)) + 1j * rng.standard_normal((n, dim, dim))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=1, axis2=2)
    return q * (d / np.abs(d))[:, None, :]


def haar_sample(dim, rng):
    return UnitaryMatrix(haar_samples(dim, 1, rng)[0])


def _rot(pauli, angle):
    return np.cos(angle / 2) * np.eye(2) - 1j * np.sin(angle / 2) * pauli


def euler_qubit(phi, theta, psi):
    """``Rz(phi) Rx(theta) Rz(psi)`` with ``Ra(x) = exp(-i x Pa / 2)``."""
    return UnitaryMatrix(_rot(PAULI_Z, phi) @ _rot(PAULI_X, theta) @ _rot(PAULI_Z, psi))


def euler_qubit_sample(rng):
    """Haar-distributed qubit unitary (up to global phase) from Euler angles."""
    phi, psi = rng.uniform(0, 2 * np.pi, size=2)
    theta = np.arccos(rng.uniform(-1, 1))
    return euler_qubit(phi, theta, psi)


def _canonical_phase(u):
    flat = u.ravel()
    k = np.flatnonzero(np.abs(flat) > 1e-9)[0]
    return u * (np.abs(flat[k]) / flat[k])


@lru_cache(maxsize=None)
def _clifford_tuple():
    h = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    s = np.array([[1, 0], [0, 1j]], dtype=complex)
    found = [_canonical_phase(np.eye(2, dtype=complex))]
    frontier = list(found)
    while frontier:
        nxt = []
        for u in frontier:
            for g in (h, s):
                v = _canonical_phase(g @ u)
                if not any(np.allclose(v, w, atol=1e-9) for w in found):
                    found.append(v)
                    nxt.append(v)
        frontier = nxt
    for u in found:
        u.setflags(write=False)
    return tuple(found)


def clifford_table():
    """The 24 single-qubit Clifford unitaries, one per global-phase class."""
    return [UnitaryMatrix(u) for u in _clifford_tuple()]


def clifford_qubit_sample(rng):
    table = _clifford_tuple()
    return UnitaryMatrix(table[rng.integers(len(table))])


def _check_indices(dim, indices):
    idx = [int(i) for i in indices]
    if not idx:
        raise DomainError("subspace must contain at least one index")
    if len(set(idx)) != len(idx):
        raise DomainError(f"duplicate subspace indices {idx}")
    if any(i < 0 or i >= dim for i in idx):
        raise DomainError(f"subspace indices {idx} out of range for dim {dim}")
    return idx


def subspace_haar(dim, indices, rng):
    """Haar unitary on the listed basis states, identity on the rest."""
    idx = _check_indices(dim, indices)
    u = np.eye(dim, dtype=complex)
    u[np.ix_(idx, idx)] = haar_samples(len(idx), 1, rng)[0]
    return UnitaryMatrix(u)


class SamplerKind(Enum):
    HAAR = "haar"
    EULER_QUBIT = "euler"
    CLIFFORD_QUBIT = "clifford"
    SUBSPACE_HAAR = "subspace"
    FIXED = "fixed"


@dataclass(frozen=True)
class UnitarySampler:
    """Stateless description of where random unitaries come from.

    ``FIXED`` always returns ``fixed`` (identity when omitted); it exists so
    deterministic protocols and non-designs can go through the same code.
    """

    kind: SamplerKind
    dim: int
    subspace_indices: tuple = None
    fixed: UnitaryMatrix = None

    def __post_init__(self):
        kind = SamplerKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind in (SamplerKind.EULER_QUBIT, SamplerKind.CLIFFORD_QUBIT) and self.dim != 2:
            raise DomainError(f"{kind.value} sampler requires dim=2")
        if kind is SamplerKind.SUBSPACE_HAAR:
            if self.subspace_indices is None:
                raise DomainError("subspace sampler requires subspace_indices")
            object.__setattr__(
                self, "subspace_indices", tuple(_check_indices(self.dim, self.subspace_indices))
            )
        if kind is SamplerKind.FIXED and self.fixed is None:
            object.__setattr__(self, "fixed", UnitaryMatrix(np.eye(self.dim)))

    @classmethod
    def haar(cls, dim):
        return cls(SamplerKind.HAAR, dim)

    @classmethod
    def subspace(cls, dim, indices):
        return cls(SamplerKind.SUBSPACE_HAAR, dim, tuple(indices))

    @classmethod
    def identity(cls, dim):
        return cls(SamplerKind.FIXED, dim)

    def sample(self, rng):
        if self.kind is SamplerKind.HAAR:
            return haar_sample(self.dim, rng)
        if self.kind is SamplerKind.EULER_QUBIT:
            return euler_qubit_sample(rng)
        if self.kind is SamplerKind.CLIFFORD_QUBIT:
            return clifford_qubit_sample(rng)
        if self.kind is SamplerKind.SUBSPACE_HAAR:
            return subspace_haar(self.dim, self.subspace_indices, rng)
        return self.fixed

    def sample_many(self, n, rng):
        """``(n, dim, dim)`` array of draws."""
        if self.kind is SamplerKind.HAAR:
            return haar_samples(self.dim, n, rng)
        if self.kind is SamplerKind.SUBSPACE_HAAR:
            idx = np.array(self.subspace_indices)
            out = np.broadcast_to(np.eye(self.dim, dtype=complex), (n, self.dim, self.dim)).copy()
            out[:, idx[:, None], idx[None, :]] = haar_samples(len(idx), n, rng)
            return out
        if self.kind is SamplerKind.CLIFFORD_QUBIT:
            table = np.array(_clifford_tuple())
            return table[rng.integers(len(table), size=n)]
        if self.kind is SamplerKind.FIXED:
            return np.broadcast_to(self.fixed.entries, (n, self.dim, self.dim)).copy()
        return np.array([self.sample(rng).entries for _ in range(n)])

    def exact_members(self):
        """Finite ensembles only: every member with equal weight, else ``None``."""
        if self.kind is SamplerKind.CLIFFORD_QUBIT:
            return np.array(_clifford_tuple())
        if self.kind is SamplerKind.FIXED:
            return self.fixed.entries[None]
        return None


# Degree-(2,2) monomials in U and conj(U).  Each entry lists the index pairs
# of the two U factors and of the two conj(U) factors.
MONOMIALS = {
    # |U_00|^4
    "abs4_00": (((0, 0), (0, 0)), ((0, 0), (0, 0))),
    # |U_00|^2 |U_10|^2: two entries of the first column
    "abs2_00_abs2_10": (((0, 0), (1, 0)), ((0, 0), (1, 0))),
    # |U_00|^2 |U_11|^2
    "abs2_00_abs2_11": (((0, 0), (1, 1)), ((0, 0), (1, 1))),
    # |U_00|^2 |U_01|^2: two entries of the first row
    "abs2_00_abs2_01": (((0, 0), (0, 1)), ((0, 0), (0, 1))),
    # U_00 U_11 conj(U_01) conj(U_10)
    "cross_00_11_01_10": (((0, 0), (1, 1)), ((0, 1), (1, 0))),
}


def _weingarten2(n):
    """Weingarten function on S_2 for U(n): (identity, transposition)."""
    return 1.0 / (n * n - 1), -1.0 / (n * (n * n - 1))


def haar_moment(monomial, dim):
    """Exact Haar average of a cataloged monomial for ``2 <= dim <= 4``.

    Uses ``E[U_i1j1 U_i2j2 conj(U_i'1j'1) conj(U_i'2j'2)] =
    sum_{s,t in S2} d(i, i'_s) d(j, j'_t) Wg(s t^-1, n)``.
    """
    if monomial not in MONOMIALS:
        raise DomainError(f"unknown monomial {monomial!r}; choose from {sorted(MONOMIALS)}")
    if not 2 <= dim <= 4:
        raise DomainError("closed-form Haar moments are tabulated for dim 2..4")
    (a, b), (c, d) = MONOMIALS[monomial]
    rows, cols = (a[0], b[0]), (a[1], b[1])
    crows, ccols = (c[0], d[0]), (c[1], d[1])
    perms = ((0, 1), (1, 0))
    wg_id, wg_tr = _weingarten2(dim)
    total = 0.0
    for s in perms:
        if not all(rows[k] == crows[s[k]] for k in range(2)):
            continue
        for t in perms:
            if not all(cols[k] == ccols[t[k]] for k in range(2)):
                continue
            total += wg_id if s == t else wg_tr
    return total


def _monomial_values(monomial, us):
    (a, b), (c, d) = MONOMIALS[monomial]
    return us[:, a[0], a[1]] * us[:, b[0], b[1]] * np.conj(us[:, c[0], c[1]] * us[:, d[0], d[1]])


def design_check(sampler, monomial, n_samples, rng):
    """``|sampler average - Haar average|`` for one cataloged monomial.

    Finite ensembles (the Clifford table, a fixed unitary) are averaged
    exactly and ``n_samples`` is ignored for them.
    """
    target = haar_moment(monomial, sampler.dim)
    members = sampler.exact_members()
    if members is not None:
        avg = np.mean(_monomial_values(monomial, members))
    else:
        total, done = 0.0, 0
        while done < n_samples:
            n = min(n_samples - done, 100_000)
            total += np.sum(_monomial_values(monomial, sampler.sample_many(n, rng)))
            done += n
        avg = total / n_samples
    return float(abs(avg - target))
