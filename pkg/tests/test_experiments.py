import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from randgap.errors import ConsistencyError, DomainError
from randgap.experiments import (
    AmplitudeInstance,
    DegeneratePathWarning,
    ExperimentKind,
    ExperimentRecord,
    adiabatic_expected_prob,
    adiabatic_leakage,
    adiabatic_prob_zero,
    grover_operator,
    likelihood_amplitude_evenT,
    likelihood_amplitude_sampling,
    likelihood_haar,
    likelihood_haar_gaps,
    likelihood_iterative_pe,
    likelihood_signed,
    marginal_likelihood_amplitude,
    prob_zero_batch,
    prob_zero_exact,
    run_adiabatic_experiment,
    run_amplitude_experiment,
    run_gap_experiment,
    run_sampling_experiment,
    subspace_likelihood_haar,
)
from randgap.qcore import (
    PAULI_X,
    PAULI_Z,
    AdiabaticSchedule,
    HermitianOperator,
    Spectrum,
    _expm_hermitian,
    gue_sample,
    spectrum_to_gaps,
    timeordered_evolve,
)
from randgap.randunitary import UnitarySampler, haar_samples

from conftest import mc_within


def _gapped(T, steps=None):
    h0 = np.diag([0.0, 1.0, 4.0])
    return AdiabaticSchedule(h0, h0 + 0.3 * (np.ones((3, 3)) - np.eye(3)), T, steps)


class TestRecord:
    def test_outcome_is_bit(self):
        with pytest.raises(DomainError):
            ExperimentRecord(2, 1.0, ExperimentKind.GAP, 0)

    def test_amplitude_needs_even_time(self):
        ExperimentRecord(0, 4.0, ExperimentKind.AMPLITUDE, 0)
        for t in (3.0, 2.5):
            with pytest.raises(DomainError):
                ExperimentRecord(0, t, ExperimentKind.AMPLITUDE, 0)


class TestProbZero:
    def test_zero_time(self, rng):
        h = gue_sample(3, rng)
        for u in haar_samples(3, 10, rng):
            assert prob_zero_exact(h, 0.0, u) == pytest.approx(1.0, abs=1e-12)

    def test_eigenstate(self):
        h = np.diag([0.0, 1.3, 2.0])
        for t in np.linspace(0, 10, 7):
            assert prob_zero_exact(h, t, np.eye(3)) == pytest.approx(1.0, abs=1e-12)

    def test_dim_mismatch(self):
        with pytest.raises(DomainError):
            prob_zero_exact(np.eye(2), 1.0, np.eye(3))

    def test_clamp_only_absorbs_rounding(self):
        with pytest.raises(ConsistencyError):
            prob_zero_batch(2 * np.eye(2), np.eye(2))

    @pytest.mark.parametrize("dim", [2, 3, 4])
    def test_haar_average(self, rng, dim):
        h = gue_sample(dim, rng)
        t = 1.7
        p = prob_zero_batch(_expm_hermitian(h.entries, t), haar_samples(dim, 100_000, rng))
        gaps = spectrum_to_gaps(np.linalg.eigvalsh(h.entries))
        assert mc_within(p, likelihood_haar(gaps, t))


class TestLikelihoodHaar:
    def test_zero_time(self, rng):
        for dim in (2, 3, 5):
            assert likelihood_haar(np.sort(rng.normal(size=dim)), 0.0) == pytest.approx(1.0)

    def test_two_level_values(self):
        s = Spectrum((0.0, 2.0))
        assert likelihood_haar(s, np.pi / 2) == pytest.approx(1 / 3)
        assert likelihood_haar(s, np.pi / 4) == pytest.approx(2 / 3)

    def test_batched_form(self, rng):
        gaps = spectrum_to_gaps(Spectrum((0.0, 0.4, 1.5)))
        assert likelihood_haar_gaps(gaps.lower(), 2.0, 3) == pytest.approx(likelihood_haar(gaps, 2.0))

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-20, 20), min_size=2, max_size=6), st.floats(0, 50))
    def test_in_unit_interval(self, eigs, t):
        p = likelihood_haar(np.sort(eigs), t)
        assert -1e-12 <= p <= 1 + 1e-12


class TestLikelihoodSigned:
    def test_sorted_matches_haar(self, rng):
        eigs = np.concatenate([[0.0], np.sort(rng.uniform(0, 3, size=3))])
        assert likelihood_signed(eigs, 1.1) == pytest.approx(likelihood_haar(eigs, 1.1))

    def test_reversed_pair(self):
        assert likelihood_signed([0.0, -2.0], 0.0, truncate=False) == pytest.approx(1 / 3)

    def test_truncation_reachable(self):
        # four coincident levels: every pair has sign(0) = -1 and cos = 1
        raw = likelihood_signed([0.0, 0.0, 0.0, 0.0], 0.0, truncate=False)
        assert raw == pytest.approx(-0.2)
        assert likelihood_signed([0.0, 0.0, 0.0, 0.0], 0.0) == 0.0

    def test_vectorized(self, rng):
        x = rng.normal(size=(50, 3))
        batch = likelihood_signed(x, 0.8)
        assert np.allclose(batch, [likelihood_signed(r, 0.8) for r in x])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-20, 20), min_size=2, max_size=6), st.floats(0, 50))
    def test_truncated_in_unit_interval(self, eigs, t):
        assert 0.0 <= likelihood_signed(eigs, t) <= 1.0


class TestGapExperiment:
    def test_identity_sampler(self, rng):
        h = np.diag([0.0, 0.7, 1.9])
        s = UnitarySampler.identity(3)
        assert all(run_gap_experiment(h, 2.0, s, rng).outcome == 0 for _ in range(50))

    def test_reproducible(self):
        h = gue_sample(3, np.random.default_rng(0))
        s = UnitarySampler.haar(3)
        a = [run_gap_experiment(h, 1.0, s, np.random.default_rng(9)) for _ in range(2)]
        assert a[0] == a[1]

    def test_frequency_matches_haar_likelihood(self, rng):
        h = gue_sample(2, np.random.default_rng(5))
        s = UnitarySampler.haar(2)
        t = 2.3
        bits = [run_gap_experiment(h, t, s, rng).outcome for _ in range(20_000)]
        target = likelihood_haar(np.linalg.eigvalsh(h.entries), t)
        assert mc_within(1 - np.array(bits), target)


class TestAdiabatic:
    def test_trivial_path_matches_gap_experiment(self, rng):
        h0 = np.diag([0.0, 1.0, 2.5])
        sched = AdiabaticSchedule(h0, h0, 5.0)
        w = timeordered_evolve(sched).entries
        us = UnitarySampler.subspace(3, [0, 1]).sample_many(50, rng)
        direct = prob_zero_batch(_expm_hermitian(h0, 1.4), us)
        assert np.max(np.abs(adiabatic_prob_zero(w, sched.hp, 1.4, us) - direct)) <= 1e-9

    def test_expected_prob_matches_monte_carlo(self, rng):
        sched = _gapped(4.0)
        w = timeordered_evolve(sched)
        us = UnitarySampler.subspace(3, [0, 1]).sample_many(100_000, rng)
        p = adiabatic_prob_zero(w, sched.hp, 1.3, us)
        assert mc_within(p, adiabatic_expected_prob(sched, 1.3, [0, 1], w))

    def test_no_protection_at_zero_time(self):
        sched = _gapped(0.0)
        ts = np.linspace(0.5, 5, 10)
        dev = max(abs(adiabatic_expected_prob(sched, t, [0, 1]) - subspace_likelihood_haar(sched, t, [0, 1]))
                  for t in ts)
        assert dev > 1e-2

    def test_run_records_kind(self, rng):
        sched = _gapped(2.0)
        rec = run_adiabatic_experiment(sched, 1.0, UnitarySampler.subspace(3, [0, 1]), rng)
        assert rec.kind is ExperimentKind.ADIABATIC and rec.outcome in (0, 1)

    def test_dim_mismatch(self, rng):
        with pytest.raises(DomainError):
            run_adiabatic_experiment(_gapped(1.0), 1.0, UnitarySampler.haar(2), rng)


class TestLeakage:
    def test_trivial_path(self):
        h0 = np.diag([0.0, 1.0, 3.0])
        assert adiabatic_leakage(AdiabaticSchedule(h0, h0, 10.0), [0, 1]) <= 1e-9

    def test_inverse_time_decay(self):
        ts = np.array([8, 16, 32, 64])
        leak = [adiabatic_leakage(_gapped(T), [0, 1]) for T in ts]
        slope = np.polyfit(np.log(ts), np.log(leak), 1)[0]
        assert abs(slope + 1) <= 0.3

    def test_degenerate_path_flagged(self):
        h0 = np.diag([0.0, 1.0, 2.0])
        hp = np.diag([2.0, 1.0, 0.0])
        with pytest.warns(DegeneratePathWarning):
            short = adiabatic_leakage(AdiabaticSchedule(h0, hp, 8.0), [0])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegeneratePathWarning)
            long = adiabatic_leakage(AdiabaticSchedule(h0, hp, 64.0), [0])
        assert short == pytest.approx(1.0) and long == pytest.approx(1.0)


class TestGrover:
    def test_eigenphases(self):
        inst = AmplitudeInstance.from_theta(np.pi / 6, 2)
        ev = np.linalg.eigvals(grover_operator(inst).entries)
        assert np.allclose(np.sort(np.angle(ev)), [-np.pi / 3, np.pi / 3])

    def test_amplitude_recursion(self, rng):
        theta = 0.31
        inst = AmplitudeInstance.from_theta(theta, 4, marked_index=2, rng=rng)
        assert inst.a == pytest.approx(np.sin(theta), abs=1e-10)
        q = grover_operator(inst).entries
        psi = inst.prep.entries[:, 0]
        for k in range(6):
            amp = (np.linalg.matrix_power(q, k) @ psi)[2]
            assert abs(amp) == pytest.approx(abs(np.sin((2 * k + 1) * theta)), abs=1e-10)

    def test_other_eigenvalues_are_real(self, rng):
        inst = AmplitudeInstance.from_theta(0.4, 4, rng=rng)
        ev = np.linalg.eigvals(grover_operator(inst).entries)
        rotating = np.abs(np.abs(np.angle(ev)) - 0.8) < 1e-8
        assert rotating.sum() == 2
        assert np.allclose(np.abs(np.imag(ev[~rotating])), 0, atol=1e-9)

    def test_instance_bounds(self):
        with pytest.raises(DomainError):
            AmplitudeInstance(np.eye(2), marked_index=1)

    def test_odd_power_rejected(self, rng):
        inst = AmplitudeInstance.from_theta(0.3)
        with pytest.raises(DomainError):
            run_amplitude_experiment(inst, 3, UnitarySampler.haar(2), rng)
        with pytest.raises(DomainError):
            likelihood_amplitude_evenT(0.3, 5, 2)

    def test_frequency_matches_even_likelihood(self, rng):
        theta, t = 0.37, 4
        inst = AmplitudeInstance.from_theta(theta, 2)
        qt = np.linalg.matrix_power(grover_operator(inst).entries, t)
        p = prob_zero_batch(qt, haar_samples(2, 100_000, rng))
        bits = rng.random(p.size) < p
        assert mc_within(bits.astype(float), likelihood_amplitude_evenT(theta, t, 2))
        runs = [run_amplitude_experiment(inst, t, UnitarySampler.haar(2), rng).outcome
                for _ in range(3000)]
        assert mc_within(1 - np.array(runs), likelihood_amplitude_evenT(theta, t, 2))

    def test_higher_dim_likelihood(self, rng):
        theta, t = 0.21, 2
        inst = AmplitudeInstance.from_theta(theta, 3, marked_index=1)
        qt = np.linalg.matrix_power(grover_operator(inst).entries, t)
        p = prob_zero_batch(qt, haar_samples(3, 100_000, rng))
        assert mc_within(p, likelihood_amplitude_evenT(theta, t, 3))


class TestAmplitudeLikelihoods:
    def test_even_zero_time(self):
        for n in (2, 3, 5, 8):
            assert likelihood_amplitude_evenT(0.4, 0, n) == pytest.approx(1.0)

    def test_two_level_closed_form(self, rng):
        theta = rng.uniform(0, np.pi / 2, 200)
        t = 2 * rng.integers(0, 50, 200)
        closed = (2 / 3) * (0.5 + np.cos(2 * theta * t) ** 2)
        for th, tt, c in zip(theta, t, closed):
            assert likelihood_amplitude_evenT(th, int(tt), 2) == pytest.approx(c, abs=1e-12)

    def test_two_level_quarter_point(self):
        t = 2
        assert likelihood_amplitude_evenT(np.pi / 4 / t, t, 2) == pytest.approx(1 / 3)

    def test_pi_over_four_edge(self):
        p = likelihood_amplitude_evenT(np.pi / 4, 2, 2)
        assert 0 <= p <= 1 and np.isfinite(p)
        inst = AmplitudeInstance.from_theta(np.pi / 4 - 1e-9)
        assert inst.a == pytest.approx(np.sqrt(0.5), abs=1e-8)

    def test_iterative_pe(self):
        assert likelihood_iterative_pe(0.0, 3) == 1.0
        assert likelihood_iterative_pe(np.pi / 8, 2) == pytest.approx(0.0, abs=1e-15)

    def test_derivative_ratio_bounded(self):
        theta = np.linspace(0.01, np.pi / 4 - 0.01, 200)
        t, h = 4, 1e-6
        d_pe = (likelihood_iterative_pe(theta + h, t) - likelihood_iterative_pe(theta - h, t)) / (2 * h)
        d_even = (likelihood_amplitude_evenT(theta + h, t, 2) - likelihood_amplitude_evenT(theta - h, t, 2)) / (2 * h)
        mask = np.abs(d_pe) > 1e-3
        ratio = np.abs(d_pe[mask] / d_even[mask])
        assert np.allclose(ratio, 1.5, rtol=1e-5)

    def test_sampling_likelihood(self):
        assert likelihood_amplitude_sampling(1.3, 0.4, 0.0) == pytest.approx(1.0)
        assert likelihood_amplitude_sampling(2.0, 0.4, np.pi / 4) == pytest.approx(0.16)
        assert np.allclose(likelihood_amplitude_sampling(0.7, 1.0, np.linspace(0, 9, 20)), 1.0)
        with pytest.raises(DomainError):
            likelihood_amplitude_sampling(1.0, 1.5, 1.0)

    def test_sampling_experiment_frequency(self, rng):
        x, z = 0.6, 0.8
        h = x * PAULI_X + z * PAULI_Z
        e = np.hypot(x, z)
        bits = [run_sampling_experiment(h, 0.9, rng).outcome for _ in range(20_000)]
        assert mc_within(1 - np.array(bits), likelihood_amplitude_sampling(e, z / e, 0.9))

    def test_marginal(self):
        assert marginal_likelihood_amplitude(0.0) == 0.5
        assert marginal_likelihood_amplitude(1.0) == 1.0
        for a in (0.1, 0.5, 0.93):
            avg = quad(lambda phi: likelihood_amplitude_sampling(1.0, a, phi), 0, 2 * np.pi,
                       epsabs=1e-12)[0] / (2 * np.pi)
            assert avg == pytest.approx(marginal_likelihood_amplitude(a), abs=1e-6)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, np.pi / 2), st.integers(0, 100), st.integers(2, 10))
    def test_even_likelihood_in_unit_interval(self, theta, half_t, n):
        p = likelihood_amplitude_evenT(theta, 2 * half_t, n)
        assert -1e-12 <= p <= 1 + 1e-12

    @given(st.floats(-5, 5), st.floats(0, 1), st.floats(-5, 5))
    def test_sampling_in_unit_interval(self, e, a, t):
        assert 0 <= likelihood_amplitude_sampling(e, a, t) <= 1 + 1e-12
