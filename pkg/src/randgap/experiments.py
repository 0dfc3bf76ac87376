"""Measurement simulators and their likelihood functions.

Every protocol ends in a computational-basis measurement collapsed to a
bit: 0 if the system is found in ``|0>``, 1 otherwise.
"""

import warnings
from dataclasses import dataclass
from enum import Enum
from math import comb

import numpy as np

from .errors import ConsistencyError, DomainError
from .qcore import (
    AdiabaticSchedule,
    GapMatrix,
    HermitianOperator,
    UnitaryMatrix,
    _as_matrix,
    _expm_hermitian,
    spectrum_to_gaps,
    timeordered_evolve,
)
from .randunitary import UnitarySampler

__all__ = [
    "ExperimentKind",
    "ExperimentRecord",
    "AmplitudeInstance",
    "DegeneratePathWarning",
    "prob_zero_exact",
    "prob_zero_batch",
    "likelihood_haar",
    "likelihood_haar_gaps",
    "likelihood_signed",
    "run_gap_experiment",
    "run_adiabatic_experiment",
    "adiabatic_prob_zero",
    "adiabatic_expected_prob",
    "adiabatic_target_projector",
    "adiabatic_leakage",
    "min_path_gap",
    "subspace_likelihood_haar",
    "grover_operator",
    "run_amplitude_experiment",
    "likelihood_amplitude_evenT",
    "likelihood_iterative_pe",
    "run_sampling_experiment",
    "likelihood_amplitude_sampling",
    "marginal_likelihood_amplitude",
]

CLAMP_TOL = 1e-12


class ExperimentKind(Enum):
    GAP = "gap"
    ADIABATIC = "adiabatic"
    AMPLITUDE = "amplitude"
    AMPLITUDE_SAMPLING = "amplitude_sampling"


@dataclass(frozen=True)
class ExperimentRecord:
    outcome: int
    time: float
    kind: ExperimentKind
    seed: int

    def __post_init__(self):
        if self.outcome not in (0, 1):
            raise DomainError("outcome must be 0 or 1")
        if self.kind is ExperimentKind.AMPLITUDE:
            if int(self.time) != self.time or int(self.time) % 2:
                raise DomainError("amplitude experiments need an even integer time")


def _clamp(p):
    p = np.asarray(p, dtype=float)
    if np.any(p > 1 + CLAMP_TOL) or np.any(p < -CLAMP_TOL):
        raise ConsistencyError(f"probability outside [0, 1] beyond rounding: {p}")
    return np.clip(p, 0.0, 1.0)


def _bernoulli(p, rng):
    """Outcome 0 with probability ``p``."""
    return 0 if rng.random() < p else 1


def prob_zero_batch(m, us):
    """``|<0| U^dagger M U |0>|^2`` for a stack of unitaries ``us``.

    ``m`` is any fixed operator, typically ``exp(-iHt)``.
    """
    m = np.asarray(m)
    us = np.asarray(us)
    if us.shape[-1] != m.shape[0]:
        raise DomainError(f"dimension mismatch: operator {m.shape}, unitary {us.shape}")
    v = us[..., :, 0]
    amp = np.einsum("...i,ij,...j->...", v.conj(), m, v)
    return _clamp(np.abs(amp) ** 2)


def prob_zero_exact(h, t, u):
    h, u = _as_matrix(h), _as_matrix(u)
    if h.shape != u.shape:
        raise DomainError(f"dimension mismatch: H {h.shape}, U {u.shape}")
    return float(prob_zero_batch(_expm_hermitian(h, t), u))


def likelihood_haar_gaps(lower_gaps, t, dim):
    """Haar-averaged ``P(0)`` from the strictly-lower gaps ``Delta_ij, i > j``.

    ``lower_gaps`` may carry leading batch axes; the last axis holds the
    ``N(N-1)/2`` gaps.
    """
    lower_gaps = np.asarray(lower_gaps, dtype=float)
    s = np.cos(lower_gaps * np.asarray(t)[..., None]).sum(axis=-1)
    return 2.0 / (dim + 1) * (1.0 + s / dim)


def likelihood_haar(gaps, t):
    """``2/(N+1) (1 + (1/N) sum_{i>j} cos(Delta_ij t))``."""
    if not isinstance(gaps, GapMatrix):
        gaps = spectrum_to_gaps(gaps)
    return float(likelihood_haar_gaps(gaps.lower(), t, gaps.dim))


def likelihood_signed(eigs, t, truncate=True):
    """Sign-weighted Haar likelihood over hypothesis eigenvalue vectors.

    Each pair ``i > j`` contributes ``sign(l_i - l_j) cos((l_i - l_j) t)``
    with ``sign(0) = -1``, so hypotheses out of ascending order are
    penalized.  ``eigs`` has shape ``(..., N)``.  The raw value can leave
    ``[0, 1]``; with ``truncate`` it is clipped back.
    """
    eigs = np.asarray(eigs, dtype=float)
    n = eigs.shape[-1]
    i, j = np.tril_indices(n, -1)
    d = eigs[..., i] - eigs[..., j]
    signed = np.where(d > 0, 1.0, -1.0) * np.cos(d * np.asarray(t)[..., None])
    raw = 2.0 / (n + 1) * (1.0 + signed.sum(axis=-1) / n)
    return np.clip(raw, 0.0, 1.0) if truncate else raw


def _child_rng(rng):
    seed = int(rng.integers(2**63))
    return seed, np.random.default_rng(seed)


def run_gap_experiment(h, t, sampler, rng):
    """One round of randomized gap estimation: ``U^dagger e^{-iHt} U |0>``."""
    h = _as_matrix(h)
    if sampler.dim != h.shape[0]:
        raise DomainError("sampler and Hamiltonian dimensions differ")
    seed, child = _child_rng(rng)
    u = sampler.sample(child)
    p = prob_zero_exact(h, t, u)
    return ExperimentRecord(_bernoulli(p, child), float(t), ExperimentKind.GAP, seed)


def adiabatic_prob_zero(w, hp, t, us):
    """``|<0|U^dagger W^dagger e^{-i hp t} W U|0>|^2`` for a stack ``us``."""
    w = _as_matrix(w)
    m = w.conj().T @ _expm_hermitian(_as_matrix(hp), t) @ w
    return prob_zero_batch(m, us)


def run_adiabatic_experiment(sched, t, sampler, rng, propagator=None):
    """Randomize inside a computational subspace, then transport adiabatically.

    ``propagator`` may carry a precomputed ``timeordered_evolve(sched)``;
    repeated experiments on one schedule should pass it.
    """
    if sampler.dim != sched.dim:
        raise DomainError("sampler and schedule dimensions differ")
    w = timeordered_evolve(sched) if propagator is None else propagator
    seed, child = _child_rng(rng)
    u = sampler.sample(child).entries
    p = float(adiabatic_prob_zero(w, sched.hp, t, u))
    return ExperimentRecord(_bernoulli(p, child), float(t), ExperimentKind.ADIABATIC, seed)


def adiabatic_expected_prob(sched, t, indices, propagator=None):
    """Exact average of the adiabatic ``P(0)`` over Haar unitaries on ``indices``.

    For ``v`` uniform on the unit sphere of an ``m``-dimensional subspace,
    ``E|v^dagger M v|^2 = (|tr M_S|^2 + tr(M_S M_S^dagger)) / (m (m + 1))``.
    """
    w = _as_matrix(timeordered_evolve(sched) if propagator is None else propagator)
    m = w.conj().T @ _expm_hermitian(sched.hp.entries, t) @ w
    idx = list(indices)
    if 0 not in idx:
        return float(_clamp(abs(m[0, 0]) ** 2))
    ms = m[np.ix_(idx, idx)]
    k = len(idx)
    val = (abs(np.trace(ms)) ** 2 + np.sum(np.abs(ms) ** 2)) / (k * (k + 1))
    return float(_clamp(val))


def _target_positions(sched, indices):
    order = np.argsort(np.real(np.diag(sched.h0.entries)), kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return sorted(int(rank[i]) for i in indices)


def adiabatic_target_projector(sched, indices):
    """Projector onto the ``hp`` eigenvectors the listed basis states flow to."""
    pos = _target_positions(sched, indices)
    _, vecs = np.linalg.eigh(sched.hp.entries)
    v = vecs[:, pos]
    return v @ v.conj().T


def subspace_likelihood_haar(sched, t, indices):
    """Haar likelihood over the ``hp`` eigenvalues targeted by ``indices``."""
    pos = _target_positions(sched, indices)
    vals = np.linalg.eigvalsh(sched.hp.entries)[pos]
    return likelihood_haar(spectrum_to_gaps(vals - vals[0]), t)


class DegeneratePathWarning(UserWarning):
    """The interpolation closes the gap around the target subspace."""


def min_path_gap(sched, indices, n_points=201):
    """Smallest gap between targeted and untargeted levels along ``H(s)``."""
    pos = _target_positions(sched, indices)
    rest = [k for k in range(sched.dim) if k not in pos]
    if not rest:
        return np.inf
    gaps = []
    for s in np.linspace(0.0, 1.0, n_points):
        e = np.linalg.eigvalsh(sched.hamiltonian(s))
        gaps.append(np.min(np.abs(e[pos][:, None] - e[rest][None, :])))
    return float(min(gaps))


def adiabatic_leakage(sched, indices, propagator=None, gap_floor=1e-6):
    """Worst-case norm of the transported state outside the target eigenspace.

    For each basis state ``|b>`` in ``indices`` this is
    ``||(1 - P) W |b>||`` with ``P`` the target projector; the maximum over
    ``b`` is returned.  The quantity shrinks as ``O(1/T)`` along gapped
    paths.  A :class:`DegeneratePathWarning` is emitted when the gap along
    the path drops below ``gap_floor``, in which case no decay is expected.
    """
    if min_path_gap(sched, indices) < gap_floor:
        warnings.warn(
            "interpolation path closes the gap around the target subspace; "
            "leakage will not decay with anneal time",
            DegeneratePathWarning,
            stacklevel=2,
        )
    w = _as_matrix(timeordered_evolve(sched) if propagator is None else propagator)
    out = np.eye(sched.dim) - adiabatic_target_projector(sched, indices)
    return float(max(np.linalg.norm(out @ w[:, b]) for b in indices))


@dataclass(frozen=True, eq=False)
class AmplitudeInstance:
    """A state preparation ``A`` with ``|<marked|A|0>| = a = sin(theta_a)``."""

    prep: UnitaryMatrix
    marked_index: int = 1

    def __post_init__(self):
        prep = self.prep if isinstance(self.prep, UnitaryMatrix) else UnitaryMatrix(self.prep)
        object.__setattr__(self, "prep", prep)
        if not 0 <= self.marked_index < prep.dim:
            raise DomainError("marked_index out of range")
        if not 0 < self.a < 1:
            raise DomainError(f"amplitude must lie in (0, 1), got {self.a}")

    @property
    def dim(self):
        return self.prep.dim

    @property
    def a(self):
        return float(abs(self.prep.entries[self.marked_index, 0]))

    @property
    def theta_a(self):
        return float(np.arcsin(self.a))

    @classmethod
    def from_theta(cls, theta_a, dim=2, marked_index=1, rng=None):
        """Build an instance whose first column is ``sin|marked> + cos|rest>``.

        ``|rest>`` is a fixed unmarked basis state, or a random unit vector
        orthogonal to ``|marked>`` when ``rng`` is given.
        """
        v = np.zeros(dim, dtype=complex)
        others = [k for k in range(dim) if k != marked_index]
        if rng is None:
            rest = np.zeros(dim, dtype=complex)
            rest[others[0]] = 1.0
        else:
            rest = np.zeros(dim, dtype=complex)
            rest[others] = rng.standard_normal(len(others)) + 1j * rng.standard_normal(len(others))
            rest /= np.linalg.norm(rest)
        v = np.sin(theta_a) * np.eye(dim)[marked_index] + np.cos(theta_a) * rest
        # Complete v to an orthonormal basis; Householder reflection maps e0 to v.
        e0 = np.eye(dim, dtype=complex)[0]
        phase = v[0] / abs(v[0]) if abs(v[0]) > 1e-14 else 1.0
        u = v / phase - e0
        if np.linalg.norm(u) < 1e-14:
            a = np.eye(dim, dtype=complex)
        else:
            u /= np.linalg.norm(u)
            a = np.eye(dim, dtype=complex) - 2 * np.outer(u, u.conj())
        a = a * phase
        return cls(UnitaryMatrix(a), marked_index)


def grover_operator(inst):
    """``Q = -A chi_0 A^dagger chi`` for the instance's marked state."""
    a = inst.prep.entries
    n = inst.dim
    chi = np.eye(n, dtype=complex)
    chi[inst.marked_index, inst.marked_index] = -1
    chi0 = np.eye(n, dtype=complex)
    chi0[0, 0] = -1
    return UnitaryMatrix(-a @ chi0 @ a.conj().T @ chi)


def _check_even(t):
    if int(t) != t or t < 0 or int(t) % 2:
        raise DomainError(f"Grover power must be a non-negative even integer, got {t}")
    return int(t)


def run_amplitude_experiment(inst, t, sampler, rng, grover=None):
    """Randomized gap experiment with ``Q^t`` in place of ``e^{-iHt}``."""
    t = _check_even(t)
    q = grover_operator(inst) if grover is None else grover
    seed, child = _child_rng(rng)
    u = sampler.sample(child).entries
    p = float(prob_zero_batch(np.linalg.matrix_power(_as_matrix(q), t), u))
    return ExperimentRecord(_bernoulli(p, child), float(t), ExperimentKind.AMPLITUDE, seed)


def likelihood_amplitude_evenT(theta_a, t, dim):
    """Haar likelihood of ``Q^t`` for even ``t``, as a function of ``theta_a``."""
    t = _check_even(t)
    n = dim
    theta_a = np.asarray(theta_a, dtype=float)
    inner = comb(n - 2, 2) + 2 * (n - 2) * np.cos(2 * theta_a * t) + np.cos(4 * theta_a * t)
    return 2.0 / (n + 1) * (1.0 + inner / n)


def likelihood_iterative_pe(theta_a, t):
    """Ancilla-assisted iterative phase estimation baseline, ``cos^2(2 theta t)``."""
    return np.cos(2 * np.asarray(theta_a, dtype=float) * t) ** 2


def run_sampling_experiment(h, t, rng):
    """Evolve ``|0>`` under ``h`` for time ``t`` and test for ``|0>``."""
    seed, child = _child_rng(rng)
    m = _expm_hermitian(_as_matrix(h), t)
    p = float(_clamp(abs(m[0, 0]) ** 2))
    return ExperimentRecord(_bernoulli(p, child), float(t), ExperimentKind.AMPLITUDE_SAMPLING, seed)


def likelihood_amplitude_sampling(energy, a, t):
    """``cos^2(E t) + sin^2(E t) a^2``."""
    a = np.asarray(a, dtype=float)
    if np.any(a < 0) or np.any(a > 1):
        raise DomainError("amplitude must lie in [0, 1]")
    x = np.asarray(energy, dtype=float) * t
    return np.cos(x) ** 2 + np.sin(x) ** 2 * a**2


def marginal_likelihood_amplitude(a):
    """``P(0)`` averaged over a uniformly random phase ``E t``: ``(a^2 + 1) / 2``."""
    a = np.asarray(a, dtype=float)
    if np.any(a < 0) or np.any(a > 1):
        raise DomainError("amplitude must lie in [0, 1]")
    return (a**2 + 1) / 2
