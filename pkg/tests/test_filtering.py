"""Spatial-filtering model: rates, post-measurement states, inference."""

import math

import numpy as np
import pytest

from qjumps.engine import InitialState, RunConfig, run_trajectory
from qjumps.errors import DegenerateInterval, ZeroOverlap
from qjumps.filtering import (FilterBank, apply_filter, filter_jump_rates,
                              infer_velocity)
from qjumps.grid import gaussian_state, make_grid
from qjumps.lattice import DetectorLattice

SIG = math.sqrt(0.5)


def bank(D=5.0, gamma=1.0):
    return FilterBank(spacing=D, gamma=gamma, m_range=(-100, 100))


class TestRates:
    def test_narrow_packet_at_center(self):
        b = bank()
        g = make_grid(1, SIG, span=30.0)
        psi = gaussian_state(g, 0.0, 0.0, 0.05)  # delta-like at x_0 = 0
        rates = dict(filter_jump_rates(psi, b))
        peak_f2 = (2 * math.pi * SIG**2) ** -0.5
        assert rates[0] == pytest.approx(b.gamma * peak_f2, rel=0.01)
        if 1 in rates:
            assert rates[1] < rates[0] * math.exp(-20.0)

    def test_uniform_state_sees_equal_interior_rates(self):
        b = bank(D=2.0)
        g = make_grid(1, SIG, span=40.0)
        psi_arr = np.ones(g.points, dtype=complex)
        from qjumps.grid import WaveFunction
        psi = WaveFunction(psi_arr, g)
        rates = dict(filter_jump_rates(psi, b))
        interior = [r for m, r in rates.items() if abs(m * 2.0) < 10.0]
        assert max(interior) / min(interior) - 1 < 0.01

    def test_dense_total_rate_position_independent(self):
        b = bank(D=0.73)
        g = make_grid(1, SIG, span=30.0)
        totals = []
        for x0 in np.linspace(0.0, 0.73, 7):
            psi = gaussian_state(g, x0, 0.0, SIG)
            totals.append(sum(r for _m, r in filter_jump_rates(psi, b)))
        assert max(totals) / min(totals) - 1 < 0.02
        assert np.mean(totals) == pytest.approx(1.0 / 0.73, rel=0.02)


class TestApplyFilter:
    def test_norm_and_narrowing(self):
        b = bank()
        g = make_grid(1, SIG, span=30.0)
        psi = gaussian_state(g, 0.0, 0.0, SIG)
        once = apply_filter(psi, 0, b)
        assert abs(once.norm_sq() - 1.0) < 1e-12
        twice = apply_filter(once, 0, b)
        _, w1 = once.position_moments()
        _, w2 = twice.position_moments()
        assert w2[0] < w1[0] < SIG

    def test_local_phase_preserved(self):
        # plane-wave-modulated packet keeps its local wavenumber at the centre
        b = bank()
        g = make_grid(1, SIG, span=30.0)
        k0 = 4.0
        psi = gaussian_state(g, 0.0, k0, 2.0)
        out = apply_filter(psi, 0, b)
        x = g.axis(0)
        j = np.searchsorted(x, 0.0)
        phase = np.angle(out.psi)
        k_local = (phase[j + 1] - phase[j - 1]) / (2 * g.dx)
        assert k_local == pytest.approx(k0, rel=0.01)

    def test_momentum_centroid_not_collapsed(self):
        # filtering measures position only: the output momentum centroid stays
        # at the packet's value, never snaps to a lattice row
        b = bank(D=5.0)
        g = make_grid(1, SIG, span=30.0)
        k0 = 2.3  # far from any multiple of anything relevant
        psi = gaussian_state(g, 0.0, k0, SIG)
        out = apply_filter(psi, 0, b)
        km, _ = out.momentum_moments()
        assert km[0] == pytest.approx(k0, abs=0.02)

    def test_memory_of_momentum_survives(self):
        # after a filter click the packet keeps moving at its old velocity
        b = bank()
        lat = DetectorLattice(dx_spacing=5.0, dp_spacing=5.0, gamma0=1.0,
                              m_range=(-20, 20), n_range=(-5, 5))
        g = make_grid(1, SIG, span=40.0)
        v = 3.0
        psi = gaussian_state(g, 0.0, v, SIG)
        out = apply_filter(psi, 0, b)
        from qjumps.propagator import Potential, Propagator
        prop = Propagator(out, None, Potential("free"))
        for _ in range(50):
            prop.step(0.01, renormalize=False)
        xm, _ = prop.psi.position_moments()
        assert xm[0] == pytest.approx(v * 0.5, rel=0.1)

    def test_zero_overlap_raises(self):
        b = bank()
        g = make_grid(1, SIG, span=40.0)
        psi = gaussian_state(g, -15.0, 0.0, 0.3)
        with pytest.raises(ZeroOverlap):
            apply_filter(psi, 15, b)


class TestInferVelocity:
    def test_exact_line(self):
        events = [(0.5, 2.5), (1.0, 5.0), (1.5, 7.5)]
        ks = infer_velocity(events, x0=0.0)
        assert np.allclose(ks, 5.0)

    def test_single_pair(self):
        assert infer_velocity([(0.5, 2.5)], x0=0.0)[0] == pytest.approx(5.0)

    def test_degenerate_interval(self):
        with pytest.raises(DegenerateInterval):
            infer_velocity([(0.5, 1.0), (0.5, 2.0)], x0=0.0)


class TestTrajectorySchema:
    def test_filtering_events_have_no_momentum_index(self):
        lat = DetectorLattice(dx_spacing=0.73, dp_spacing=0.73, gamma0=1.0,
                              m_range=(-60, 60), n_range=(-40, 40))
        cfg = RunConfig(lattice=lat, model="filtering",
                        initial_state=InitialState(kind="gaussian", x0=0.0, k0=5.0),
                        first_click_mode="husimi-sampled", t_max=1.0,
                        dt_cap=0.01, master_seed=8)
        rec = run_trajectory(cfg, 0)
        assert len(rec.events) >= 1
        assert all(n is None for _t, _m, n in rec.events)
        assert all(isinstance(m, int) for _t, m, _n in rec.events)
        assert rec.terminated_reason == "reached-t_max"

    def test_mean_inferred_velocity_near_k0(self):
        lat = DetectorLattice(dx_spacing=0.73, dp_spacing=0.73, gamma0=1.0,
                              m_range=(-100, 150), n_range=(-40, 40))
        cfg = RunConfig(lattice=lat, model="filtering",
                        initial_state=InitialState(kind="gaussian", x0=0.0, k0=5.0),
                        first_click_mode="husimi-sampled", t_max=3.0,
                        dt_cap=0.02, grid_span=60.0, master_seed=8)
        from qjumps.engine import run_ensemble
        from qjumps.stats import bin_observable
        recs = run_ensemble(cfg, 150, workers=2)
        sk = bin_observable(recs, "k", lat, 3.0, 0.25, min_interval=1.0)
        good = sk.count >= 30
        assert np.nanmean(sk.mean[good]) == pytest.approx(5.0, abs=0.3)
