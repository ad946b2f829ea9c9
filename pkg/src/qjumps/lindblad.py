"""Dense density-matrix integration of the GKSL equation (validation oracle).

Position-basis kernels rho(x_j, x_k) on a 1D grid, N <= 256.  The jump
operators C_a = sqrt(gamma_a) |a><a| are rank one, so the dissipator costs
O(N^2) per detector; the commutator with H_S uses a dense spectral kinetic
matrix.  Classic fixed-step RK4 in time with hermiticity/trace/positivity
checks at the end.

Solving this equation gives the exact ensemble average the trajectory engine
must reproduce: trace distance to the averaged projector kernel scales as
1/sqrt(n_traj).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolation
from .grid import SpatialGrid, WaveFunction
from .lattice import DetectorIndex, DetectorLattice, coherent_amplitude, detector_gamma
from .propagator import Potential

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-8
EIGENVALUE_TOL = 1e-8


@dataclass
class DensityMatrix:
    """rho[j, k] = rho(x_j, x_k); trace = sum_j rho[j, j] dx = 1."""

    rho: np.ndarray
    grid: SpatialGrid

    def trace(self) -> float:
        return float(np.trace(self.rho).real * self.grid.dx)

    def hermiticity_defect(self) -> float:
        return float(np.abs(self.rho - self.rho.conj().T).max())

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.rho + self.rho.conj().T)
        return float(np.linalg.eigvalsh(herm).min() * self.grid.dx)

    def check(self) -> None:
        if self.hermiticity_defect() > HERMITICITY_TOL:
            raise InvariantViolation(f"hermiticity defect {self.hermiticity_defect():.2e}")
        if abs(self.trace() - 1.0) > TRACE_TOL:
            raise InvariantViolation(f"trace drift {self.trace() - 1.0:.2e}")
        if self.min_eigenvalue() < -EIGENVALUE_TOL:
            raise InvariantViolation(f"negative eigenvalue {self.min_eigenvalue():.2e}")

    @staticmethod
    def from_state(psi: WaveFunction) -> "DensityMatrix":
        return DensityMatrix(rho=np.outer(psi.psi, psi.psi.conj()), grid=psi.grid)


class LindbladSystem:
    """Precomputed pieces of the GKSL right-hand side for one detector set."""

    def __init__(self, grid: SpatialGrid, lattice: DetectorLattice,
                 potential: Potential, detectors: list[DetectorIndex]):
        if grid.dim != 1:
            raise ValueError("density-matrix oracle is 1D only")
        self.grid = grid
        self.lattice = lattice
        self.detectors = detectors
        n = grid.points
        x = grid.axis(0)
        if potential.kind == "none":
            self.h = np.zeros((n, n), dtype=np.complex128)
        else:
            k2 = 0.5 * grid.k_axis() ** 2
            kin = np.fft.ifft(k2[:, None] * np.fft.fft(np.eye(n), axis=0), axis=0)
            self.h = 0.5 * (kin + kin.conj().T)  # symmetrize roundoff
            v = potential.values(grid)
            if v is not None:
                self.h[np.diag_indices(n)] += v
        self.amps = [coherent_amplitude(x, d, lattice) for d in detectors]
        self.gammas = [detector_gamma(d.n[0], lattice) for d in detectors]
        self.dx = grid.dx

    def rhs(self, rho: np.ndarray) -> np.ndarray:
        """i [rho, H] - (1/2) sum {C+C, rho} + sum C rho C+ on the kernel."""
        out = 1j * (rho @ self.h - self.h @ rho)
        dx = self.dx
        for a, g in zip(self.amps, self.gammas):
            rho_a = (rho @ a) * dx               # column rho|a>
            a_rho = (a.conj() @ rho) * dx        # row <a|rho
            a_rho_a = complex(a.conj() @ rho_a) * dx
            out += g * (a_rho_a * np.outer(a, a.conj())
                        - 0.5 * np.outer(a, a_rho)
                        - 0.5 * np.outer(rho_a, a.conj()))
        return out


def lindblad_rhs(rho: DensityMatrix, lattice: DetectorLattice, pot: Potential,
                 detectors: list[DetectorIndex]) -> np.ndarray:
    """One-off evaluation of the GKSL right-hand side (kernel array)."""
    return LindbladSystem(rho.grid, lattice, pot, detectors).rhs(rho.rho)


def integrate(rho0: DensityMatrix, t: float, dt: float, system: LindbladSystem,
              check: bool = True) -> DensityMatrix:
    """Classic RK4 march to time t; invariants re-checked at the end."""
    rho = rho0.rho.copy()
    n_steps = int(round(t / dt))
    for _ in range(n_steps):
        k1 = system.rhs(rho)
        k2 = system.rhs(rho + 0.5 * dt * k1)
        k3 = system.rhs(rho + 0.5 * dt * k2)
        k4 = system.rhs(rho + dt * k3)
        rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    out = DensityMatrix(rho=rho, grid=rho0.grid)
    if check:
        out.check()
    return out


def trace_distance(rho_a: np.ndarray, rho_b: np.ndarray, dx: float) -> float:
    """(1/2) ||rho_a - rho_b||_1 for two position-basis kernels."""
    diff = rho_a - rho_b
    diff = 0.5 * (diff + diff.conj().T)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(diff)).sum() * dx)


def detector_population(rho: np.ndarray, amp: np.ndarray, dx: float) -> float:
    """<a|rho|a> for a grid-sampled detector amplitude."""
    return float((amp.conj() @ rho @ amp).real * dx * dx)
