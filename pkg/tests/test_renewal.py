"""Renewal analysis: closed forms, intensity tables, escape times."""

import math

import numpy as np
import pytest

from qjumps.engine import InitialState, RunConfig, run_ensemble
from qjumps.errors import BadFit, NotEscaping
from qjumps.lattice import DetectorLattice, overlap_magnitude
from qjumps.renewal import (approx_fT1, click_statistics, compute_intensities,
                            escape_time, first_click_density, renewal_mean_position,
                            retardation_fit, step_profile, two_detector_rates,
                            two_detector_timescale)
from qjumps.stats import bin_observable


def fig4_lattice(gamma=1.0):
    return DetectorLattice(dx_spacing=5.0, dp_spacing=5.0, gamma0=gamma,
                           m_range=(-3, 12), n_range=(-2, 4))


class TestTwoDetectorRates:
    def test_t0_value(self):
        # D=5, gamma=50: |c| = e^{-25/4}, t0 = 2/(gamma |c|) ~ 20.7
        t0 = two_detector_timescale(50.0, 5.0)
        assert t0 == pytest.approx(2.0 / (50.0 * math.exp(-25 / 4)), rel=1e-12)
        assert t0 == pytest.approx(20.72, abs=0.01)

    def test_initial_values(self):
        c = 0.1
        la, lb = two_detector_rates(4.0, c, np.array([0.0]))
        assert la[0] == pytest.approx(4.0)
        assert lb[0] == pytest.approx(4.0 * c**2)

    def test_long_time_equality(self):
        gamma, c = 50.0, overlap_magnitude(5.0, 0.0)
        t0 = two_detector_timescale(gamma, 5.0)
        la, lb = two_detector_rates(gamma, c, np.array([50 * t0]))
        assert la[0] == pytest.approx(gamma * (1 - c) / 2, rel=1e-6)
        assert lb[0] == pytest.approx(la[0], rel=1e-6)

    def test_equality_time_scale(self):
        # |la-lb|/la < 0.1 happens at O(t0)
        gamma, c = 50.0, overlap_magnitude(5.0, 0.0)
        t0 = two_detector_timescale(gamma, 5.0)
        t = np.linspace(0, 4 * t0, 4000)
        la, lb = two_detector_rates(gamma, c, t)
        cross = t[np.argmax(np.abs(la - lb) / la < 0.1)]
        assert 0.5 * t0 < cross < 3.0 * t0

    def test_rejects_bad_overlap(self):
        with pytest.raises(ValueError):
            two_detector_rates(1.0, 1.5, np.array([0.0]))


class TestClickStatistics:
    def test_zero_intensity(self):
        p, pmf, mean = click_statistics(0.0)
        assert p == 1.0 and mean == 0.0
        assert pmf(0) == 1.0

    def test_ln2_case(self):
        p, pmf, mean = click_statistics(math.log(2.0))
        assert p == pytest.approx(0.5)
        assert mean == pytest.approx(1.0)
        for n in range(4):
            assert pmf(n) == pytest.approx(2.0 ** -(n + 1))

    def test_geometric_against_mcwf(self):
        # single detector, moving particle: click counts to the horizon are
        # geometric with p = exp(-Lambda(T))
        lat = DetectorLattice(dx_spacing=5.0, dp_spacing=2.0, gamma0=15.0,
                              m_range=(0, 0), n_range=(1, 1))
        cfg = RunConfig(lattice=lat, initial_state=InitialState(m=0, n=1),
                        t_max=4.0, dt_cap=0.002, master_seed=31, grid_span=45.0)
        table = compute_intensities(cfg, 4.0)
        p, pmf, mean = click_statistics(float(table.Lambda[-1]))
        recs = run_ensemble(cfg, 400, workers=2)
        counts = np.array([sum(1 for e in r.events if e[0] > 0) for r in recs])
        assert counts.mean() == pytest.approx(mean, rel=0.2)
        from scipy import stats as sstats
        kmax = 8
        obs = np.bincount(np.minimum(counts, kmax), minlength=kmax + 1)
        probs = np.array([pmf(n) for n in range(kmax)])
        probs = np.append(probs, 1 - probs.sum())
        chi2 = ((obs - probs * len(counts)) ** 2 / (probs * len(counts))).sum()
        assert 1 - sstats.chi2.cdf(chi2, kmax) > 0.01


class TestIntensityTable:
    def test_initial_rate_is_gamma(self):
        lat = DetectorLattice(dx_spacing=5.0, dp_spacing=5.0, gamma0=3.0,
                              m_range=(0, 0), n_range=(0, 0))
        cfg = RunConfig(lattice=lat, initial_state=InitialState(m=0, n=0), t_max=1.0)
        table = compute_intensities(cfg, 1.0)
        assert table.lam_total[0] == pytest.approx(3.0, rel=1e-6)
        assert table.Lambda[0] == 0.0
        assert np.all(np.diff(table.Lambda) >= 0)
        assert np.all(table.lam >= 0)

    def test_peaks_at_classical_arrivals(self):
        cfg = RunConfig(lattice=fig4_lattice(), initial_state=InitialState(m=0, n=1),
                        t_max=2.5, master_seed=0)
        table = compute_intensities(cfg, 2.5)
        # detector i peaks when the packet passes: t ~ i D / v = i for v=D=5
        for i in (1, 2):
            lam_i = table.lam[:, [lab.m[0] for lab in table.labels].index(i)]
            t_pk = table.t[np.argmax(lam_i)]
            assert t_pk == pytest.approx(i * 1.0, abs=0.1)

    def test_first_click_density_mass(self):
        # trapezoid quadrature: the 1e-6 mass closure needs the fine step
        cfg = RunConfig(lattice=fig4_lattice(), initial_state=InitialState(m=0, n=1),
                        t_max=2.5, master_seed=0)
        table = compute_intensities(cfg, 2.5, dt=4e-4)
        f, escaped = first_click_density(table)
        assert np.all(f >= 0)
        assert np.trapezoid(f, table.t) + escaped == pytest.approx(1.0, abs=1e-6)

    def test_grid_refinement_stability(self):
        lat = DetectorLattice(dx_spacing=5.0, dp_spacing=2.0, gamma0=10.0,
                              m_range=(0, 0), n_range=(1, 1))
        cfg = RunConfig(lattice=lat, initial_state=InitialState(m=0, n=1), t_max=3.0)
        t1 = escape_time(compute_intensities(cfg, 3.0))
        t2 = escape_time(compute_intensities(cfg, 3.0, dt=1e-3))
        assert abs(t1 - t2) / t1 < 0.01


class TestApproxDensity:
    def test_leading_term(self):
        assert approx_fT1(1.0, 5.0, 5.0, np.array([0.0]))[0] == pytest.approx(1.0, abs=1e-6)

    def test_peak_positions_and_envelope(self):
        t = np.linspace(0, 2.5, 2501)
        f = approx_fT1(1.0, 5.0, 5.0, t)
        from scipy.signal import argrelmax
        peaks = t[argrelmax(f, order=50)[0]]
        assert np.allclose(peaks, [1.0, 2.0], atol=0.05)
        assert f[np.searchsorted(t, 1.0)] == pytest.approx(math.exp(-1.0), rel=1e-2)

    def test_against_numeric_density(self):
        # crude approximation: peaks align, but the sup deviation is ~26% of
        # the peak (no wavepacket spreading, no dissipative reshaping)
        cfg = RunConfig(lattice=fig4_lattice(), initial_state=InitialState(m=0, n=1),
                        t_max=1.0, master_seed=0)
        table = compute_intensities(cfg, 1.0)
        f, _ = first_click_density(table)
        fa = approx_fT1(1.0, 5.0, 5.0, table.t)
        assert np.max(np.abs(fa - f)) / f.max() < 0.35


class TestEscapeTime:
    def test_not_escaping_raises(self):
        lat = DetectorLattice(dx_spacing=5.0, dp_spacing=5.0, gamma0=3.0,
                              m_range=(0, 0), n_range=(0, 0))
        cfg = RunConfig(lattice=lat, initial_state=InitialState(m=0, n=0), t_max=0.3)
        table = compute_intensities(cfg, 0.3)
        with pytest.raises(NotEscaping):
            escape_time(table)

    def test_values_for_retardation_gammas(self):
        # T_esc ~ 0.23, 0.47, 1.12 for gamma = 10, 20, 50 at v = 5 (within the
        # 15% band around the reference retardations 0.24/0.51/1.26)
        expected = {10.0: 0.24, 20.0: 0.51, 50.0: 1.26}
        for gam, ref in expected.items():
            lat = DetectorLattice(dx_spacing=5.0, dp_spacing=5.0, gamma0=gam,
                                  m_range=(0, 0), n_range=(1, 1))
            cfg = RunConfig(lattice=lat, initial_state=InitialState(m=0, n=1), t_max=3.0)
            tesc = escape_time(compute_intensities(cfg, 3.0))
            assert abs(tesc - ref) / ref < 0.15


class TestStepProfile:
    def test_starts_at_zero(self):
        cfg = RunConfig(lattice=fig4_lattice(), initial_state=InitialState(m=0, n=1),
                        t_max=1.4, master_seed=0)
        table = compute_intensities(cfg, 1.4, m_values=np.array([0, 1]))
        prof = step_profile(table, 5.0)
        # lambda_1(0) = gamma |c|^2 ~ 4e-6 is not exactly zero
        assert prof[0] == pytest.approx(0.0, abs=1e-4)
        # plateau near 0 early, transition around 0.5, approach 5 near t=1
        assert prof[np.searchsorted(table.t, 0.2)] < 0.5
        assert 1.0 < prof[np.searchsorted(table.t, 0.55)] < 4.5
        assert prof[np.searchsorted(table.t, 1.0)] > 4.0


class TestRetardationFit:
    def test_exact_line(self):
        t = np.linspace(0, 5, 100)
        tr, v, rms = retardation_fit(t, 3.0 * t, (1.0, 5.0), rms_tol=0.01)
        assert abs(tr) < 1e-10
        assert v == pytest.approx(3.0)

    def test_delayed_line(self):
        t = np.linspace(0, 6, 200)
        x = np.where(t > 1.2, 5.0 * (t - 1.2), 0.0)
        tr, v, _ = retardation_fit(t, x, (3.0, 6.0), rms_tol=0.05)
        assert tr == pytest.approx(1.2, abs=1e-9)
        assert v == pytest.approx(5.0)

    def test_bad_fit_raises(self):
        t = np.linspace(0, 5, 100)
        rng = np.random.default_rng(0)
        with pytest.raises(BadFit):
            retardation_fit(t, np.sin(3 * t) * 5, (0.0, 5.0), rms_tol=0.05)


@pytest.mark.slow
class TestRenewalPipeline:
    def test_small_gamma_recovers_classical_line(self):
        # gamma = 0.5: negligible retardation, asymptotic slope = v
        lat = DetectorLattice(dx_spacing=5.0, dp_spacing=5.0, gamma0=0.5,
                              m_range=(-5, 100), n_range=(1, 1))
        cfg = RunConfig(lattice=lat, initial_state=InitialState(m=0, n=1), t_max=6.0)
        curve = renewal_mean_position(cfg, 6.0)
        tr, vfit, _ = retardation_fit(curve.t, curve.mean_x, (3.0, 6.0), rms_tol=0.5)
        assert vfit == pytest.approx(5.0, rel=0.05)
        assert abs(tr) < 0.12  # within the profile's bin-scale resolution

    def test_mean_position_matches_mcwf(self):
        # two-detector window: deterministic step profile vs a small MCWF
        # ensemble, within 10% of the spacing over the first step
        lat = DetectorLattice(dx_spacing=5.0, dp_spacing=5.0, gamma0=1.0,
                              m_range=(0, 1), n_range=(1, 1))
        cfg = RunConfig(lattice=lat, initial_state=InitialState(m=0, n=1),
                        t_max=1.4, dt_cap=0.004, master_seed=17)
        table = compute_intensities(cfg, 1.4, m_values=np.array([0, 1]))
        prof = step_profile(table, 5.0)
        recs = run_ensemble(cfg, 1500, workers=2)
        series = bin_observable(recs, "x", lat, 1.4, 0.05)
        good = series.count >= 20
        theory = np.interp(series.centers[good], table.t, prof)
        assert np.max(np.abs(series.mean[good] - theory)) < 0.1 * 5.0
