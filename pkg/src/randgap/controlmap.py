"""Learning linear control maps of a single qubit from energies and amplitudes.

A control vector ``c`` sets the Hamiltonian coefficients ``x = G c``; for
``d = 3`` the Hamiltonian is ``x0 X + x1 Y + x2 Z`` and for ``d = 2`` it is
``x0 X + x1 Z``.  Its eigenvalues are ``+-||G c||``, so gap estimation
measures column inner products of ``G`` and nothing more: ``G^T G`` is
identifiable, ``G`` only up to a left orthogonal factor.  Structural
constraints (diagonal, upper triangular with positive diagonal) or extra
amplitude data pin that factor down.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError, InconsistentAmplitudes, InfeasibleEnergies
from .experiments import likelihood_haar_gaps
from .inference import GaussianPosterior, InferenceConfig, pgh_time, rejection_filter_update
from .qcore import PAULI_X, PAULI_Y, PAULI_Z, HermitianOperator, _expm_hermitian
from .randunitary import haar_samples

__all__ = [
    "Structure",
    "ControlMap",
    "DIAGONAL_SETTINGS",
    "TRIANGULAR_SETTINGS",
    "TWO_BY_TWO_SETTINGS",
    "hamiltonian_from_controls",
    "energy_magnitude",
    "forward_energies",
    "gram",
    "recover_diagonal",
    "recover_upper_triangular",
    "amplitude_operator",
    "forward_amplitudes",
    "recover_2x2",
    "MiscalibrationTrace",
    "miscalibration_instance",
    "miscalibration_study",
    "decays_then_flattens",
]


class Structure(Enum):
    DIAGONAL = "diagonal"
    UPPER_TRIANGULAR = "upper_triangular"
    FULL = "full"


@dataclass(frozen=True, eq=False)
class ControlMap:
    entries: np.ndarray
    structure: Structure = Structure.FULL

    def __post_init__(self):
        g = np.array(self.entries, dtype=float, copy=True)
        structure = Structure(self.structure)
        if g.shape not in ((2, 2), (3, 3)):
            raise DomainError(f"control maps are 2x2 or 3x3, got {g.shape}")
        if structure is not Structure.FULL and np.any(np.tril(g, -1) != 0):
            raise DomainError(f"{structure.value} map has nonzero entries below the diagonal")
        if structure is Structure.DIAGONAL and np.any(np.triu(g, 1) != 0):
            raise DomainError("diagonal map has nonzero off-diagonal entries")
        if structure is Structure.UPPER_TRIANGULAR and np.any(np.diag(g) < 0):
            raise DomainError("upper-triangular map needs a non-negative diagonal")
        g.setflags(write=False)
        object.__setattr__(self, "entries", g)
        object.__setattr__(self, "structure", structure)

    @property
    def dim(self):
        return self.entries.shape[0]


def _unit(d, k):
    return tuple(int(i == k) for i in range(d))


DIAGONAL_SETTINGS = {d: [_unit(d, k) for k in range(d)] for d in (2, 3)}
TRIANGULAR_SETTINGS = [(1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 0), (1, 0, 1), (0, 1, 1)]
TWO_BY_TWO_SETTINGS = [(1, 0), (0, 1), (1, 1)]

_PAULIS = {3: (PAULI_X, PAULI_Y, PAULI_Z), 2: (PAULI_X, PAULI_Z)}


def _matrix(g):
    return g.entries if isinstance(g, ControlMap) else np.asarray(g, dtype=float)


def _coefficients(g, c):
    g = _matrix(g)
    c = np.asarray(c, dtype=float)
    if c.shape != (g.shape[1],):
        raise DomainError(f"control vector of length {c.size} does not fit a {g.shape} map")
    if not np.all(np.isfinite(c)):
        raise DomainError("control vector must be finite")
    return g @ c


def hamiltonian_from_controls(g, c):
    x = _coefficients(g, c)
    paulis = _PAULIS[x.size]
    return HermitianOperator.symmetrized(sum(xi * p for xi, p in zip(x, paulis)))


def energy_magnitude(g, c):
    """Positive eigenvalue ``||G c||`` of the controlled Hamiltonian."""
    return float(np.linalg.norm(_coefficients(g, c)))


def forward_energies(g, settings):
    return {tuple(c): energy_magnitude(g, c) for c in settings}


def gram(g):
    g = _matrix(g)
    return g.T @ g


def _lookup(energies, setting):
    try:
        return float(energies[tuple(setting)])
    except KeyError:
        raise DomainError(f"missing energy for control setting {tuple(setting)}") from None


def _root(x, what, tol):
    if x < -tol:
        raise InfeasibleEnergies(f"negative value {x:.3g} under the square root for {what}")
    return float(np.sqrt(max(x, 0.0)))


def recover_diagonal(energies, dim=None):
    """``|G_kk| = E(e_k)``; signs are taken positive."""
    if dim is None:
        dim = len(next(iter(energies)))
    return ControlMap(
        np.diag([_lookup(energies, _unit(dim, k)) for k in range(dim)]), Structure.DIAGONAL
    )


def recover_upper_triangular(energies, tol=1e-12):
    """Solve an upper-triangular 3x3 map with non-negative diagonal column by column."""
    e = {c: _lookup(energies, c) ** 2 for c in TRIANGULAR_SETTINGS}
    scale = tol * max(1.0, max(e.values()))
    g00 = np.sqrt(e[(1, 0, 0)])
    if g00 <= 0:
        raise InfeasibleEnergies("G00 = 0 leaves the remaining entries undetermined")
    g01 = (e[(1, 1, 0)] - e[(0, 1, 0)] - g00**2) / (2 * g00)
    g11 = _root(e[(0, 1, 0)] - g01**2, "G11", scale)
    if g11 <= 0:
        raise InfeasibleEnergies("G11 = 0 leaves G12 undetermined")
    g02 = (e[(1, 0, 1)] - e[(0, 0, 1)] - g00**2) / (2 * g00)
    g12 = (e[(0, 1, 1)] - e[(0, 0, 1)] - g01**2 - 2 * g01 * g02 - g11**2) / (2 * g11)
    g22 = _root(e[(0, 0, 1)] - g02**2 - g12**2, "G22", scale)
    g = np.array([[g00, g01, g02], [0.0, g11, g12], [0.0, 0.0, g22]])
    return ControlMap(g, Structure.UPPER_TRIANGULAR)


def amplitude_operator(g, c):
    """Free evolution for a quarter period, ``exp(-i H(Gc) pi / (2 E))``."""
    h = hamiltonian_from_controls(g, c)
    e = energy_magnitude(g, c)
    if e == 0:
        raise DomainError(f"setting {tuple(c)} gives a zero Hamiltonian")
    return _expm_hermitian(h.entries, np.pi / (2 * e))


def forward_amplitudes(g, settings=TWO_BY_TWO_SETTINGS):
    """``|<0|A(c)|0>|`` for each setting."""
    return {tuple(c): float(abs(amplitude_operator(g, c)[0, 0])) for c in settings}


def recover_2x2(energies, amplitudes, g11_sign=None, g10_sign=None, tol=1e-9,
                return_residual=False):
    """Recover a 2x2 map ``[[G00, G01], [G10, G11]]`` for ``H = aX + gZ``.

    The ``Z`` row follows from amplitudes, ``|G1k| = |a(e_k)| E(e_k)``, with
    the relative sign chosen so ``|G10 + G11| = |a(1,1)| E(1,1)`` and the
    overall sign from exactly one of ``g11_sign`` / ``g10_sign``.  The ``X``
    row then follows from the energies.  Energies cannot see the sign of
    the ``X`` row as a whole, so ``G00 >= 0`` is imposed (``G01 >= 0`` when
    ``G00 = 0``).

    Returns the map, or ``(map, residual)`` with the largest mismatch of the
    input energies and amplitudes when ``return_residual`` is set.
    """
    if (g11_sign is None) == (g10_sign is None):
        raise DomainError("supply exactly one of g11_sign, g10_sign")
    e10, e01, e11 = (_lookup(energies, c) for c in TWO_BY_TWO_SETTINGS)
    a10, a01, a11 = (_lookup(amplitudes, c) for c in TWO_BY_TWO_SETTINGS)
    if min(e10, e01, e11) <= 0:
        raise DomainError("energies must be positive")
    if not all(0 <= a <= 1 + tol for a in (a10, a01, a11)):
        raise DomainError("amplitudes must lie in [0, 1]")
    m10, m11 = a10 * e10, a01 * e01
    target = a11 * e11
    scale = tol * max(1.0, e10, e01, e11)

    anchor = np.sign(g11_sign if g11_sign is not None else g10_sign) or 1.0
    fits = []
    for rel in (1.0, -1.0):
        if g11_sign is not None:
            g11, g10 = anchor * m11, rel * anchor * m10
        else:
            g10, g11 = anchor * m10, rel * anchor * m11
        fits.append((abs(abs(g10 + g11) - target), g10, g11))
    miss, g10, g11 = min(fits, key=lambda f: f[0])
    if miss > max(scale, 1e-6 * target):
        raise InconsistentAmplitudes(
            f"|G10 + G11| cannot match |a(1,1)| E(1,1) = {target:.6g} (closest miss {miss:.3g})"
        )

    g00 = _root(e10**2 - g10**2, "G00", scale)
    g01 = _root(e01**2 - g11**2, "G01", scale)
    cross = e11**2 - (g10 + g11) ** 2 - g00**2 - g01**2
    if g00 > 0 and cross < 0:
        g01 = -g01
    g = np.array([[g00, g01], [g10, g11]])
    if not return_residual:
        return ControlMap(g)
    e_fit = forward_energies(g, TWO_BY_TWO_SETTINGS)
    residual = max(
        abs(e_fit[(1, 0)] - e10), abs(e_fit[(0, 1)] - e01), abs(e_fit[(1, 1)] - e11),
        abs(abs(g10) - m10), abs(abs(g11) - m11), abs(abs(g10 + g11) - target),
    )
    return ControlMap(g), float(residual)


@dataclass(frozen=True)
class MiscalibrationTrace:
    delta: float
    experiments: np.ndarray
    median_error: np.ndarray
    errors: np.ndarray

    @classmethod
    def from_errors(cls, delta, errors):
        errors = np.atleast_2d(np.asarray(errors, dtype=float))
        return cls(float(delta), np.arange(1, errors.shape[1] + 1),
                   np.median(errors, axis=0), errors)

    def floor(self, tail=0.2):
        """Median error averaged geometrically over the last ``tail`` fraction."""
        k = max(1, int(round(tail * self.median_error.size)))
        return float(np.exp(np.mean(np.log(self.median_error[-k:]))))


def _gap_model(k, offset):
    """Hypothesis ``g`` -> Haar likelihood with energy ``||(diag(g) + D) e_k||``."""
    diag_k = offset[k, k]
    off_sq = float(np.sum(offset[:, k] ** 2) - diag_k**2)

    def model(t):
        def lik(x):
            energy = np.sqrt((x[:, 0] + diag_k) ** 2 + off_sq)
            return likelihood_haar_gaps((2 * energy)[:, None], t, 2)
        return lik
    return model


def miscalibration_instance(delta, n_experiments, rng, cfg=None, prior_sd=0.3):
    """One instance of the miscalibration study; returns the error trace.

    A diagonal 3x3 device map with entries in ``[0.5, 1.5]`` is probed with
    randomized gap experiments.  The learner explains the data with
    energies ``||(diag(g) + D) e_k||`` where the reference offset ``D`` has
    i.i.d. zero-mean Gaussian entries of variance ``delta``, so it
    converges to a map that mimics the reference rather than the device.
    Settings ``e_1, e_2, e_3`` are probed round robin, each with its own
    one-dimensional rejection filter and particle-guess time.  The error
    after each experiment is ``max_k |g_k - G_kk|``.
    """
    if not 0 <= delta:
        raise DomainError("delta must be non-negative")
    cfg = InferenceConfig() if cfg is None else cfg
    truth = rng.uniform(0.5, 1.5, size=3)
    offset = rng.normal(0.0, np.sqrt(delta), size=(3, 3)) if delta > 0 else np.zeros((3, 3))
    posts = [
        GaussianPosterior([truth[k] + rng.normal(0, prior_sd)], [[prior_sd**2]]) for k in range(3)
    ]
    models = [_gap_model(k, offset) for k in range(3)]
    errors = np.empty(n_experiments)
    for j in range(n_experiments):
        k = j % 3
        t = pgh_time(posts[k], cfg.pgh_prefactor, cfg.t_max)
        v = haar_samples(2, 1, rng)[0][:, 0]
        # Diagonal map: H = G_kk * Pauli_k, eigenvalues +-|G_kk|.
        amp = v.conj() @ _expm_hermitian(truth[k] * _PAULIS[3][k], t) @ v
        outcome = 0 if rng.random() < abs(amp) ** 2 else 1
        posts[k] = rejection_filter_update(posts[k], outcome, models[k](t), cfg, rng, j + 1)
        errors[j] = max(abs(posts[m].mean[0] - truth[m]) for m in range(3))
    return errors


def miscalibration_study(delta, n_instances=50, n_experiments=600, rng=None, cfg=None,
                         prior_sd=0.3):
    """Median learning curve of :func:`miscalibration_instance` over instances.

    Each instance runs on its own generator seeded from ``rng``.

    Returns
    -------
    MiscalibrationTrace
    """
    rng = np.random.default_rng() if rng is None else rng
    seeds = rng.integers(2**63, size=n_instances)
    errors = np.array([
        miscalibration_instance(delta, n_experiments, np.random.default_rng(s), cfg, prior_sd)
        for s in seeds
    ])
    return MiscalibrationTrace.from_errors(delta, errors)


def decays_then_flattens(curve, min_drop=np.log(2.0), flat_ratio=0.25, margin=0.02):
    """Two-phase shape test for a positive learning curve.

    Fits a straight line to ``log(curve)`` on each side of every candidate
    changepoint and keeps the split with the smallest residual.  The curve
    passes when the curve falls by at least ``min_drop`` (in log units)
    from its first value to the start of the fitted second segment, and
    the second segment's total change is below ``flat_ratio`` times that
    fall.

    Returns
    -------
    ok : bool
    split : int
        Index of the fitted changepoint.
    """
    y = np.log(np.asarray(curve, dtype=float))
    n = y.size
    x = np.arange(n, dtype=float)
    lo, hi = max(3, int(margin * n)), min(n - 3, int((1 - margin) * n))
    if lo >= hi:
        raise DomainError("curve too short for a changepoint fit")

    def seg(a, b):
        coef = np.polyfit(x[a:b], y[a:b], 1)
        return coef, float(np.sum((np.polyval(coef, x[a:b]) - y[a:b]) ** 2))

    best = None
    for b in range(lo, hi):
        (c1, r1), (c2, r2) = seg(0, b), seg(b, n)
        if best is None or r1 + r2 < best[0]:
            best = (r1 + r2, b, c1, c2)
    _, b, _, c2 = best
    drop = y[0] - np.polyval(c2, x[b])
    change = abs(c2[0]) * (n - b)
    return bool(drop >= min_drop and change < flat_ratio * drop), int(b)
