"""Seeded multi-instance campaigns and their CSV output.

Every instance draws from its own generator ``default_rng([seed, *stream,
instance])``, so any subset of instances can be rerun on its own and the
output does not depend on ``jobs``.  Rows are gathered in instance order.

The CSV header always starts with
``suite,instance,step,t,outcome_count,error,uncertainty,flag`` and
suite-specific columns follow.  ``outcome_count`` is the running number of
``0`` outcomes.  Each suite ends with a ``median`` block whose ``flag``
column reports how many collapsed instances were left out.
"""

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import spearmanr

from . import controlmap as cm
from .config import CampaignConfig, ConfigError, Suite
from .errors import PosteriorCollapse
from .experiments import (
    AmplitudeInstance,
    grover_operator,
    likelihood_amplitude_evenT,
    likelihood_iterative_pe,
    run_amplitude_experiment,
)
from .inference import (
    AdiabaticOracle,
    GaussianPosterior,
    error_metric,
    gue_prior,
    infer_spectrum,
    sequential_inference,
    uncertainty,
)
from .qcore import AdiabaticSchedule, HermitianOperator, gue_sample, normalize_spectrum
from .randunitary import MONOMIALS, SamplerKind, UnitarySampler, design_check
from .turnpike import reconstruct_spectrum

__all__ = [
    "HEADER",
    "CampaignResult",
    "instance_rng",
    "run_campaign",
    "run_gaps_campaign",
    "run_amplitude_campaign",
    "run_controlmap_campaign",
    "run_designcheck_campaign",
    "run_turnpike",
    "write_csv",
    "even_grover_power",
    "scaling_slope",
    "median_trend",
]

HEADER = ("suite", "instance", "step", "t", "outcome_count", "error", "uncertainty", "flag")


@dataclass
class CampaignResult:
    suite: str
    extra_columns: tuple
    rows: list
    summary: dict = field(default_factory=dict)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HEADER + tuple(self.extra_columns))
        for row in self.rows:
            w.writerow([_fmt(x) for x in row])
        return buf.getvalue()


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(result, path):
    """Write ``result`` to ``path``; OS errors are re-raised with the path."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(result.to_csv())
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from None


def instance_rng(seed, instance, *stream):
    return np.random.default_rng([int(seed), *map(int, stream), int(instance)])


def _map(fn, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks), os.cpu_count() or 1)) as pool:
        return list(pool.map(fn, tasks))


def median_trend(curve):
    """Spearman correlation of a curve against its index."""
    curve = np.asarray(curve, dtype=float)
    return float(spearmanr(np.arange(curve.size), curve)[0])


def _median_rows(suite, per_instance, columns, n_excluded):
    """Median over instances of each column, step by step."""
    kept = [np.asarray(p, dtype=float) for p in per_instance]
    if not kept:
        return [], np.array([])
    stack = np.stack(kept)
    med = np.median(stack, axis=0)
    rows = [(suite, "median", k, *med[k, :columns], f"excluded={n_excluded}", *med[k, columns:])
            for k in range(med.shape[0])]
    return rows, med


# --- gaps ------------------------------------------------------------------

def _gaps_instance(args):
    cfg, i = args
    rng = instance_rng(cfg.seed, i)
    h = gue_sample(cfg.dim, rng)
    if cfg.anneal_time is None:
        truth = h
        model_dim = cfg.dim
        spectrum = normalize_spectrum(np.linalg.eigvalsh(h.entries))
    else:
        h0 = HermitianOperator(np.diag(np.arange(cfg.dim, dtype=complex)))
        sched = AdiabaticSchedule(h0, h, cfg.anneal_time)
        truth = AdiabaticOracle(sched, cfg.adiabatic_indices or tuple(range(cfg.dim)))
        model_dim = truth.dim
        spectrum = truth.spectrum
    prior = gue_prior(model_dim, cfg.prior_draws, rng)
    e0 = error_metric(np.concatenate([[0.0], prior.mean]), spectrum)
    steps = [(0, None, 0, e0, uncertainty(prior))]
    collapsed = None
    try:
        _, trace = infer_spectrum(truth, cfg.inference, rng, prior=prior)
    except PosteriorCollapse as exc:
        trace = exc.trace
        collapsed = exc.experiment
    zeros = 0
    for s in trace:
        zeros += s.outcome == 0
        steps.append((s.index, s.t, zeros, s.error, s.uncertainty))
    return steps, collapsed


def run_gaps_campaign(cfg):
    """Spectrum learning on GUE instances; one trace per instance."""
    results = _map(_gaps_instance, [(cfg, i) for i in range(cfg.instances)], cfg.jobs)
    rows, kept = [], []
    for i, (steps, collapsed) in enumerate(results):
        flag = "ok" if collapsed is None else f"collapsed@{collapsed}"
        rows += [("gaps", i, k, t, n0, e, u, flag) for k, t, n0, e, u in steps]
        if collapsed is None:
            kept.append([(np.nan if t is None else t, n0, e, u) for _, t, n0, e, u in steps])
    n_excluded = len(results) - len(kept)
    med_rows, med = _median_rows("gaps", kept, 4, n_excluded)
    med_rows = [r[:3] + ((None,) if k == 0 else (r[3],)) + r[4:] for k, r in enumerate(med_rows)]
    rows += med_rows
    summary = {"collapsed": n_excluded}
    if med.size:
        err, unc = med[:, 2], med[:, 3]
        summary.update(
            median_error=err, median_uncertainty=unc,
            error_ratio=float(err[-1] / err[0]), error_trend=median_trend(err),
            uncertainty_trend=median_trend(unc),
            final_errors=np.array([k[-1][2] for k in kept]),
            initial_errors=np.array([k[0][2] for k in kept]),
        )
    return CampaignResult("gaps", (), rows, summary)


# --- amplitude estimation -------------------------------------------------

def even_grover_power(sigma_theta, prefactor=0.5, t_max=1e6):
    """Particle-guess Grover power for an amplitude angle posterior.

    The even-power likelihood oscillates in ``4 theta t``, so ``4 theta``
    plays the role of the gap: ``t = prefactor / (4 sigma)``, rounded to the
    nearest even integer and at least 2.
    """
    t = t_max if sigma_theta <= 0 else min(prefactor / (4 * sigma_theta), t_max)
    return max(2, 2 * int(round(t / 2)))


def _grover_power(sigma_theta, prefactor=0.5, t_max=1e6):
    t = t_max if sigma_theta <= 0 else min(prefactor / (4 * sigma_theta), t_max)
    return max(1, int(round(t)))


def _amplitude_instance(args):
    cfg, i = args
    rng = instance_rng(cfg.seed, i)
    theta = float(rng.uniform(cfg.theta_min, cfg.theta_max))
    inst = AmplitudeInstance.from_theta(theta, 2)
    q = grover_operator(inst)
    sampler = UnitarySampler.haar(2)
    mid, width = (cfg.theta_min + cfg.theta_max) / 2, cfg.theta_max - cfg.theta_min
    prior = GaussianPosterior([mid], [[(width / 4) ** 2]])
    icfg = cfg.inference

    def err(mean):
        return abs(mean[0] - theta)

    def model(t):
        return lambda x: likelihood_amplitude_evenT(x[:, 0], t, 2)

    def run(t, r):
        return run_amplitude_experiment(inst, t, sampler, r, grover=q).outcome

    def choose(post):
        return even_grover_power(uncertainty(post), icfg.pgh_prefactor, icfg.t_max)

    out = {"theta": theta, "e0": err(prior.mean), "u0": uncertainty(prior)}
    for name, mdl, runner, chooser, r in (
        ("main", model, run, choose, rng),
        ("baseline",
         lambda t: (lambda x: likelihood_iterative_pe(x[:, 0], t)),
         lambda t, r: int(r.random() >= likelihood_iterative_pe(theta, t)),
         lambda post: _grover_power(uncertainty(post), icfg.pgh_prefactor, icfg.t_max),
         instance_rng(cfg.seed, i, 1)),
    ):
        try:
            _, trace = sequential_inference(prior, mdl, runner, icfg, r, err, chooser)
            out[name + "_collapsed"] = None
        except PosteriorCollapse as exc:
            trace = exc.trace
            out[name + "_collapsed"] = exc.experiment
        out[name] = trace
    return out


def scaling_slope(total_times, errors, decades=2.0, points=25):
    """Log-log slope of the median error against total evolution time.

    Each instance contributes, at every grid time ``T``, the error after its
    last experiment whose cumulative time is at most ``T``.  The grid spans
    ``decades`` decades ending at the smallest final total time, so every
    instance contributes at every point.

    Returns
    -------
    slope, grid, median
    """
    t_hi = min(float(t[-1]) for t in total_times)
    grid = np.logspace(np.log10(t_hi) - decades, np.log10(t_hi), points)
    med = np.empty(points)
    for g_idx, g in enumerate(grid):
        vals = []
        for t, e in zip(total_times, errors):
            k = np.searchsorted(t, g, side="right") - 1
            vals.append(e[k] if k >= 0 else np.nan)
        med[g_idx] = np.median(vals)
    if np.any(~np.isfinite(med)):
        raise ConfigError(f"too few experiments to span {decades} decades of total time")
    slope = float(np.polyfit(np.log(grid), np.log(med), 1)[0])
    return slope, grid, med


def run_amplitude_campaign(cfg):
    """Amplitude-angle learning with even Grover powers plus the ancilla baseline."""
    results = _map(_amplitude_instance, [(cfg, i) for i in range(cfg.instances)], cfg.jobs)
    extras = ("theta", "total_time", "baseline_t", "baseline_total_time", "baseline_error")
    rows, kept = [], []
    for i, res in enumerate(results):
        flags = [f"{n}_collapsed@{res[n + '_collapsed']}" for n in ("main", "baseline")
                 if res[n + "_collapsed"] is not None]
        flag = ";".join(flags) or "ok"
        main, base = res["main"], res["baseline"]
        zeros, total, btotal = 0, 0.0, 0.0
        table = [(None, 0, res["e0"], res["u0"], 0.0, None, 0.0, res["e0"])]
        for k in range(max(len(main), len(base))):
            m = main[k] if k < len(main) else None
            b = base[k] if k < len(base) else None
            if m is not None:
                zeros += m.outcome == 0
                total += m.t
            if b is not None:
                btotal += b.t
            table.append((
                m.t if m else None, zeros, m.error if m else None, m.uncertainty if m else None,
                total, b.t if b else None, btotal, b.error if b else None,
            ))
        for k, (t, n0, e, u, tt, bt, btt, be) in enumerate(table):
            rows.append(("amplitude", i, k, t, n0, e, u, flag, res["theta"], tt, bt, btt, be))
        if flag == "ok":
            kept.append(table)
    n_excluded = len(results) - len(kept)
    summary = {"collapsed": n_excluded}
    if kept:
        numeric = [[[np.nan if v is None else v for v in r] for r in tab] for tab in kept]
        med = np.median(np.array(numeric, dtype=float), axis=0)
        for k, r in enumerate(med):
            rows.append(("amplitude", "median", k, None if k == 0 else r[0], r[1], r[2], r[3],
                         f"excluded={n_excluded}", None, r[4], None if k == 0 else r[5],
                         r[6], r[7]))
        times = [np.array([r[4] for r in tab[1:]]) for tab in kept]
        errs = [np.array([r[2] for r in tab[1:]]) for tab in kept]
        btimes = [np.array([r[6] for r in tab[1:]]) for tab in kept]
        berrs = [np.array([r[7] for r in tab[1:]]) for tab in kept]
        summary.update(total_times=times, errors=errs,
                       baseline_total_times=btimes, baseline_errors=berrs)
    return CampaignResult("amplitude", extras, rows, summary)


# --- control maps ---------------------------------------------------------

def _random_orthogonal(d, rng):
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def _controlmap_instance(args):
    cfg, i = args
    rng = instance_rng(cfg.seed, i)
    mode = cfg.mode
    if mode == "diagonal":
        d = cfg.dim or 3
        g = np.diag(rng.uniform(0.5, 1.5, d) * rng.choice([-1.0, 1.0], d))
        rec = cm.recover_diagonal(cm.forward_energies(g, cm.DIAGONAL_SETTINGS[d]), d).entries
        err = np.max(np.abs(rec - np.abs(g)))
    elif mode == "triangular":
        g = np.triu(rng.standard_normal((3, 3)))
        g[np.diag_indices(3)] = np.abs(np.diag(g)) + 0.1
        rec = cm.recover_upper_triangular(cm.forward_energies(g, cm.TRIANGULAR_SETTINGS)).entries
        err = np.max(np.abs(rec - g))
    else:
        g = rng.standard_normal((2, 2))
        g[0] *= np.sign(g[0, 0])
        rec = cm.recover_2x2(
            cm.forward_energies(g, cm.TWO_BY_TWO_SETTINGS), cm.forward_amplitudes(g),
            g11_sign=np.sign(g[1, 1]),
        ).entries
        err = np.max(np.abs(rec - g))
    q = _random_orthogonal(g.shape[0], rng)
    gram_err = np.max(np.abs(cm.gram(q @ g) - cm.gram(g)))
    return float(err), float(gram_err)


def _miscalibration_instance(args):
    cfg, i, delta = args
    rng = instance_rng(cfg.seed, i)
    try:
        return cm.miscalibration_instance(delta, cfg.experiments, rng, cfg.inference,
                                          cfg.prior_sd), None
    except PosteriorCollapse as exc:
        return None, exc.experiment


def run_controlmap_campaign(cfg):
    """Round-trip recovery, or the miscalibration sweep over ``cfg.deltas``."""
    if cfg.mode != "miscalibration":
        results = _map(_controlmap_instance, [(cfg, i) for i in range(cfg.instances)], cfg.jobs)
        rows = [("controlmap", i, 0, None, None, e, None, cfg.mode, g)
                for i, (e, g) in enumerate(results)]
        errs = np.array([r[0] for r in results])
        grams = np.array([r[1] for r in results])
        rows.append(("controlmap", "median", 0, None, None, float(np.median(errs)), None,
                     "excluded=0", float(np.median(grams))))
        return CampaignResult("controlmap", ("gram_error",), rows,
                              {"max_error": float(errs.max()), "max_gram_error": float(grams.max())})

    tasks = [(cfg, i, d) for d in cfg.deltas for i in range(cfg.instances)]
    results = _map(_miscalibration_instance, tasks, cfg.jobs)
    rows, traces = [], {}
    for j, delta in enumerate(cfg.deltas):
        chunk = results[j * cfg.instances:(j + 1) * cfg.instances]
        kept = [e for e, c in chunk if c is None]
        for i, (e, c) in enumerate(chunk):
            flag = "ok" if c is None else f"collapsed@{c}"
            last = None if e is None else float(e[-1])
            rows.append(("controlmap", i, cfg.experiments if c is None else c, None, None,
                         last, None, flag, delta, None))
        if not kept:
            continue
        trace = cm.MiscalibrationTrace.from_errors(delta, kept)
        traces[delta] = trace
        floor = trace.floor()
        for k, e in enumerate(trace.median_error, 1):
            rows.append(("controlmap", "median", k, None, None, float(e), None,
                         f"excluded={len(chunk) - len(kept)}", delta, floor))
    return CampaignResult("controlmap", ("delta", "floor"), rows,
                          {"traces": traces,
                           "floors": {d: t.floor() for d, t in traces.items()}})


# --- design checks and turnpike -------------------------------------------

_SAMPLERS = {
    "haar": SamplerKind.HAAR,
    "euler": SamplerKind.EULER_QUBIT,
    "clifford": SamplerKind.CLIFFORD_QUBIT,
}


def run_designcheck_campaign(cfg):
    """Deviation of each cataloged second-moment monomial from its Haar value."""
    dim = cfg.dim or 2
    if cfg.sampler == "identity":
        sampler = UnitarySampler.identity(dim)
    else:
        sampler = UnitarySampler(_SAMPLERS[cfg.sampler], dim)
    rows, devs = [], {}
    names = [m for m in MONOMIALS if _monomial_fits(m, dim)]
    for i, name in enumerate(names):
        dev = design_check(sampler, name, cfg.samples, instance_rng(cfg.seed, i))
        devs[name] = dev
        rows.append(("designcheck", i, 0, None, None, dev, None, cfg.sampler, name))
    return CampaignResult("designcheck", ("monomial",), rows, {"deviations": devs})


def _monomial_fits(name, dim):
    idx = [k for pair in MONOMIALS[name] for ij in pair for k in ij]
    return max(idx) < dim


def run_turnpike(gaps, tolerance=None):
    """All spectra consistent with ``gaps``; one result row per solution."""
    sols = reconstruct_spectrum(list(gaps), tolerance)
    rows = [("turnpike", k, 0, None, None, None, None, "ok", " ".join(repr(v) for v in s.values))
            for k, s in enumerate(sols)]
    return CampaignResult("turnpike", ("spectrum",), rows, {"solutions": sols})


_RUNNERS = {
    Suite.GAPS: run_gaps_campaign,
    Suite.AMPLITUDE: run_amplitude_campaign,
    Suite.CONTROLMAP: run_controlmap_campaign,
    Suite.DESIGNCHECK: run_designcheck_campaign,
}


def run_campaign(cfg: CampaignConfig) -> CampaignResult:
    if cfg.suite not in _RUNNERS:
        raise ConfigError(f"suite {cfg.suite.value} is not a campaign")
    return _RUNNERS[cfg.suite](cfg)
