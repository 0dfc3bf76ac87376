"""Rejection-filter Bayesian inference with a unimodal Gaussian model.

Each update draws hypotheses from the current Gaussian, keeps each one with
probability equal to the likelihood of the observed outcome, and refits the
Gaussian to the kept samples.  Moments are accumulated batch by batch, so
memory does not grow with the number of accepted samples.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateOutcome, DomainError, PosteriorCollapse
from .experiments import (
    _target_positions,
    likelihood_signed,
    run_adiabatic_experiment,
    run_gap_experiment,
)
from .qcore import (
    HermitianOperator,
    Spectrum,
    _as_matrix,
    normalize_spectrum,
    timeordered_evolve,
)
from .randunitary import UnitarySampler

__all__ = [
    "GaussianPosterior",
    "InferenceConfig",
    "TraceStep",
    "rejection_filter_update",
    "pgh_time",
    "uncertainty",
    "error_metric",
    "gue_prior",
    "fisher_information",
    "GapOracle",
    "AdiabaticOracle",
    "sequential_inference",
    "infer_spectrum",
]


@dataclass(frozen=True, eq=False)
class GaussianPosterior:
    """Mean vector and covariance matrix of the current belief."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.array(self.mean, dtype=float))
        cov = np.atleast_2d(np.array(self.cov, dtype=float))
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise DomainError(f"shape mismatch: mean {mean.shape}, cov {cov.shape}")
        if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(cov))):
            raise DomainError("covariance is not symmetric")
        if np.min(np.linalg.eigvalsh(cov)) < -1e-10:
            raise DomainError("covariance is not positive semidefinite")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def size(self):
        return self.mean.size

    def sample(self, n, rng):
        w, v = np.linalg.eigh(self.cov)
        factor = v * np.sqrt(np.clip(w, 0.0, None))
        return self.mean + rng.standard_normal((n, self.size)) @ factor.T


@dataclass
class InferenceConfig:
    accept_threshold: int = 10_000
    max_attempts_factor: int = 1000
    pgh_prefactor: float = 0.5
    max_experiments: int = 200
    rng_seed: int = 0
    t_max: float = 1e6

    def __post_init__(self):
        for name in ("accept_threshold", "max_attempts_factor", "max_experiments"):
            if int(getattr(self, name)) < 1:
                raise DomainError(f"{name} must be positive")
        if not self.pgh_prefactor > 0 or not self.t_max > 0:
            raise DomainError("pgh_prefactor and t_max must be positive")


class _Moments:
    """Chan-style merge of batch means and scatter matrices."""

    def __init__(self, k):
        self.n = 0
        self.mean = np.zeros(k)
        self.m2 = np.zeros((k, k))

    def add(self, x):
        nb = x.shape[0]
        if nb == 0:
            return
        mb = x.mean(axis=0)
        d = x - mb
        m2b = d.T @ d
        n = self.n + nb
        delta = mb - self.mean
        self.mean = self.mean + delta * (nb / n)
        self.m2 = self.m2 + m2b + np.outer(delta, delta) * (self.n * nb / n)
        self.n = n

    def cov(self):
        c = self.m2 / max(self.n - 1, 1)
        return (c + c.T) / 2


def rejection_filter_update(prior, outcome, likelihood, cfg, rng, experiment=None):
    """Bayes update of ``prior`` on a binary ``outcome`` by rejection sampling.

    Parameters
    ----------
    prior : GaussianPosterior
    outcome : int
        0 or 1.
    likelihood : callable
        Maps an ``(n, k)`` array of hypotheses to ``P(0 | hypothesis)``;
        ``P(1 | .)`` is taken as ``1 - P(0 | .)``.
    cfg : InferenceConfig
    rng : numpy.random.Generator
    experiment : int, optional
        Reported in :class:`PosteriorCollapse` if the update fails.

    Returns
    -------
    GaussianPosterior
        Gaussian fitted to exactly ``cfg.accept_threshold`` accepted samples.
    """
    need = int(cfg.accept_threshold)
    budget = need * int(cfg.max_attempts_factor)
    acc = _Moments(prior.size)
    draws = 0
    rate = 0.5
    while acc.n < need:
        remaining = need - acc.n
        batch = int(min(budget - draws, max(1024, 1.2 * remaining / max(rate, 1e-3))))
        if batch <= 0:
            raise PosteriorCollapse(acc.n / max(draws, 1), acc.n, draws, experiment)
        x = prior.sample(batch, rng)
        p0 = np.asarray(likelihood(x), dtype=float)
        p = p0 if outcome == 0 else 1.0 - p0
        keep = x[rng.random(batch) < p]
        draws += batch
        rate = max(keep.shape[0], 1) / batch
        acc.add(keep[:remaining])
    return GaussianPosterior(acc.mean, acc.cov())


def uncertainty(posterior):
    """``sqrt(tr(Sigma))``."""
    return float(np.sqrt(max(np.trace(posterior.cov), 0.0)))


def pgh_time(posterior, prefactor=0.5, t_max=1e6):
    """Particle guess heuristic: ``t = prefactor / sigma``, capped at ``t_max``."""
    sigma = uncertainty(posterior)
    if sigma == 0 or prefactor / sigma > t_max:
        return float(t_max)
    return float(prefactor / sigma)


def error_metric(estimate, truth):
    """Spectral error that does not penalize the mirror-image estimate.

    ``min(sum_i |l_i - m_i|, sum_i |l_i - r_i|)`` where ``m`` is the
    estimate shifted so its smallest entry is zero and ``r`` is its
    reflection ``max(m) - m`` sorted ascending.  Both spectra share the same
    gap multiset, so neither is preferred.
    """
    lam = np.asarray(truth.values if isinstance(truth, Spectrum) else truth, dtype=float)
    mu = np.asarray(estimate, dtype=float)
    if lam.shape != mu.shape:
        raise DomainError(f"length mismatch: estimate {mu.shape}, truth {lam.shape}")
    mu = mu - mu.min()
    direct = np.sum(np.abs(lam - mu))
    mirrored = np.sum(np.abs(lam - np.sort(mu.max() - mu)))
    return float(min(direct, mirrored))


def gue_prior(dim, n_draws=10_000, rng=None):
    """Diagonal Gaussian over eigenvalues 2..N of normalized GUE spectra."""
    if dim < 2:
        raise DomainError("dim must be >= 2")
    rng = np.random.default_rng() if rng is None else rng
    a = rng.standard_normal((n_draws, dim, dim)) + 1j * rng.standard_normal((n_draws, dim, dim))
    h = (a + np.conj(np.swapaxes(a, 1, 2))) / 2
    ev = np.linalg.eigvalsh(h)
    ev = ev[:, 1:] - ev[:, :1]
    return GaussianPosterior(ev.mean(axis=0), np.diag(ev.var(axis=0, ddof=1)))


def fisher_information(likelihood, params, t, h=1e-5):
    """Single-shot Fisher matrix of a binary experiment by central differences.

    ``likelihood(params, t)`` returns ``P(0)``; the matrix is
    ``sum_d dP(d)/dk dP(d)/dl / P(d)`` over ``d in {0, 1}``.
    """
    params = np.atleast_1d(np.asarray(params, dtype=float))
    p = float(likelihood(params, t))
    if p < 1e-8 or 1 - p < 1e-8:
        raise DegenerateOutcome(f"P(0) = {p} is on the boundary")
    grad = np.empty(params.size)
    for k in range(params.size):
        e = np.zeros(params.size)
        e[k] = h
        grad[k] = (likelihood(params + e, t) - likelihood(params - e, t)) / (2 * h)
    return np.outer(grad, grad) * (1.0 / p + 1.0 / (1.0 - p))


class GapOracle:
    """Hidden Hamiltonian probed by randomized gap experiments."""

    def __init__(self, h, sampler=None):
        self.h = h if isinstance(h, HermitianOperator) else HermitianOperator(h)
        self.dim = self.h.dim
        self.sampler = UnitarySampler.haar(self.dim) if sampler is None else sampler
        self.spectrum = normalize_spectrum(np.linalg.eigvalsh(self.h.entries))

    def run(self, t, rng):
        return run_gap_experiment(self.h, t, self.sampler, rng).outcome


class AdiabaticOracle:
    """Hidden ``hp`` probed through an adiabatic path from a diagonal ``h0``.

    Randomization acts on ``indices``; the model dimension is their count
    and the reference spectrum is that of the ``hp`` levels they flow to.
    """

    def __init__(self, sched, indices):
        self.sched = sched
        self.indices = tuple(indices)
        self.dim = len(self.indices)
        self.sampler = UnitarySampler.subspace(sched.dim, self.indices)
        self.propagator = timeordered_evolve(sched)
        vals = np.linalg.eigvalsh(sched.hp.entries)[_target_positions(sched, self.indices)]
        self.spectrum = normalize_spectrum(vals)

    def run(self, t, rng):
        return run_adiabatic_experiment(
            self.sched, t, self.sampler, rng, propagator=self.propagator
        ).outcome


@dataclass(frozen=True)
class TraceStep:
    index: int
    error: float
    uncertainty: float
    t: float
    outcome: int


def sequential_inference(prior, model, run, cfg, rng, error, choose_time=None):
    """Adaptive experiment loop shared by every estimation task.

    Parameters
    ----------
    prior : GaussianPosterior
    model : callable
        ``model(t)`` returns the hypothesis likelihood ``P(0 | x; t)``
        as a vectorized callable.
    run : callable
        ``run(t, rng)`` performs one experiment and returns its bit.
    error : callable
        Maps a posterior mean to the error recorded in the trace.
    choose_time : callable, optional
        Maps the posterior to the next experiment time; defaults to the
        particle guess heuristic.

    Returns
    -------
    posterior, trace
        On :class:`PosteriorCollapse` the exception carries the partial
        trace as ``exc.trace``.
    """
    if choose_time is None:
        def choose_time(post):
            return pgh_time(post, cfg.pgh_prefactor, cfg.t_max)

    post = prior
    trace = []
    for k in range(1, cfg.max_experiments + 1):
        t = choose_time(post)
        outcome = run(t, rng)
        try:
            post = rejection_filter_update(post, outcome, model(t), cfg, rng, experiment=k)
        except PosteriorCollapse as exc:
            exc.trace = trace
            raise
        trace.append(TraceStep(k, error(post.mean), uncertainty(post), t, outcome))
    return post, trace


def infer_spectrum(truth, cfg, rng, prior=None):
    """Learn the spectrum of a hidden Hamiltonian from randomized experiments.

    ``truth`` is a :class:`HermitianOperator` (full-space randomization) or
    an oracle such as :class:`AdiabaticOracle`.  Hypotheses are the ``N-1``
    eigenvalues above ``lambda_1 = 0`` and are scored with
    :func:`likelihood_signed`.
    """
    if isinstance(truth, (HermitianOperator, np.ndarray)):
        truth = GapOracle(_as_matrix(truth))
    if prior is None:
        prior = gue_prior(truth.dim, 10_000, rng)

    def model(t):
        def lik(x):
            full = np.concatenate([np.zeros((x.shape[0], 1)), x], axis=1)
            return likelihood_signed(full, t)
        return lik

    def err(mean):
        return error_metric(np.concatenate([[0.0], mean]), truth.spectrum)

    return sequential_inference(prior, model, truth.run, cfg, rng, err)
