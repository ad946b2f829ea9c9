"""Density-matrix oracle: GKSL structure and RK4 integration."""

import math

import numpy as np
import pytest

from qjumps.errors import InvariantViolation
from qjumps.grid import SpatialGrid, gaussian_state, lattice_state
from qjumps.lattice import DetectorIndex, DetectorLattice
from qjumps.lindblad import (DensityMatrix, LindbladSystem, integrate, lindblad_rhs,
                             trace_distance)
from qjumps.propagator import Potential

SIG = math.sqrt(0.5)


def small_system(gamma=1.0, n_det=5, D=0.5, potential="free"):
    half = n_det // 2
    lat = DetectorLattice(dx_spacing=D, dp_spacing=D, gamma0=gamma,
                          m_range=(-half, half), n_range=(0, 0))
    grid = SpatialGrid(dim=1, points=128, dx=SIG / 4, origin=(0.0,))
    dets = [DetectorIndex.make(m, 0) for m in range(-half, half + 1)]
    return lat, grid, dets, LindbladSystem(grid, lat, Potential(potential), dets)


class TestRhs:
    def test_trace_free(self):
        lat, grid, dets, system = small_system()
        psi = lattice_state(grid, DetectorIndex.make(0, 0), lat)
        rho = DensityMatrix.from_state(psi)
        r = system.rhs(rho.rho)
        assert abs(np.trace(r)) * grid.dx < 1e-10

    def test_trace_free_for_mixed_state(self):
        lat, grid, dets, system = small_system(gamma=3.0)
        a = lattice_state(grid, DetectorIndex.make(-1, 0), lat).psi
        b = lattice_state(grid, DetectorIndex.make(2, 0), lat).psi
        rho = 0.6 * np.outer(a, a.conj()) + 0.4 * np.outer(b, b.conj())
        r = system.rhs(rho)
        assert abs(np.trace(r)) * grid.dx < 1e-10

    def test_detector_state_stationary_without_kinetic_term(self):
        lat, grid, dets, _ = small_system()
        psi = lattice_state(grid, DetectorIndex.make(0, 0), lat)
        rho = DensityMatrix.from_state(psi)
        r = lindblad_rhs(rho, lat, Potential("none"), [DetectorIndex.make(0, 0)])
        assert np.abs(r).max() < 1e-12

    def test_pure_commutator_when_detectorless(self):
        lat, grid, _, _ = small_system()
        system = LindbladSystem(grid, lat, Potential("free"), [])
        psi = gaussian_state(grid, 0.0, 1.0, SIG)
        rho = DensityMatrix.from_state(psi)
        r = system.rhs(rho.rho)
        assert abs(np.trace(r)) * grid.dx < 1e-12
        # hermiticity of the derivative
        assert np.abs(r - r.conj().T).max() < 1e-10


class TestIntegrate:
    def test_free_dispersion_of_variance(self):
        lat, grid, _, _ = small_system()
        system = LindbladSystem(grid, lat, Potential("free"), [])
        psi = gaussian_state(grid, 0.0, 0.0, SIG)
        rho = integrate(DensityMatrix.from_state(psi), 0.5, 1e-3, system)
        p = np.real(np.diag(rho.rho)) * grid.dx
        x = grid.axis(0)
        var = float(p @ x**2 - (p @ x) ** 2)
        sig2 = SIG**2
        assert var == pytest.approx(sig2 * (1 + (0.5 / (2 * sig2)) ** 2), abs=1e-6)

    def test_invariants_after_integration(self):
        lat, grid, dets, system = small_system(gamma=2.0)
        psi = lattice_state(grid, DetectorIndex.make(0, 0), lat)
        rho = integrate(DensityMatrix.from_state(psi), 1.0, 1e-3, system)
        assert rho.hermiticity_defect() < 1e-10
        assert abs(rho.trace() - 1.0) < 1e-8
        assert rho.min_eigenvalue() > -1e-8

    def test_invariant_violation_raises(self):
        lat, grid, dets, system = small_system(gamma=2.0)
        psi = lattice_state(grid, DetectorIndex.make(0, 0), lat)
        bad = DensityMatrix(rho=psi.psi[:, None] * psi.psi[None, :].conj() * 1.5,
                            grid=grid)
        with pytest.raises(InvariantViolation):
            integrate(bad, 0.01, 1e-3, system)

    def test_halving_dt_converged(self):
        lat, grid, dets, system = small_system(gamma=2.0)
        psi = lattice_state(grid, DetectorIndex.make(1, 0), lat)
        rho1 = integrate(DensityMatrix.from_state(psi), 0.3, 2e-3, system)
        rho2 = integrate(DensityMatrix.from_state(psi), 0.3, 1e-3, system)
        assert np.abs(rho1.rho - rho2.rho).max() < 1e-6


class TestTraceDistance:
    def test_identical_states(self):
        lat, grid, _, _ = small_system()
        psi = gaussian_state(grid, 0.0, 0.0, SIG)
        rho = np.outer(psi.psi, psi.psi.conj())
        assert trace_distance(rho, rho, grid.dx) == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal_pure_states(self):
        lat, grid, _, _ = small_system()
        a = gaussian_state(grid, -2.0, 0.0, 0.4).psi
        b = gaussian_state(grid, 2.0, 0.0, 0.4).psi
        d = trace_distance(np.outer(a, a.conj()), np.outer(b, b.conj()), grid.dx)
        assert d == pytest.approx(1.0, abs=1e-4)
