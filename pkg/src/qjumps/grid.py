"""Uniform spatial grids and wavefunctions sampled on them.

The window is periodic (spectral propagation); a boundary-mass guard keeps
wrap-around artifacts from silently corrupting a run.  Coordinates are always
absolute: re-centring a window moves ``origin`` and resamples/rolls the
amplitudes, never rephases them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BoundaryBreach
from .lattice import DetectorIndex, DetectorLattice, coherent_amplitude

BOUNDARY_FRACTION = 0.05  # outermost fraction of the window watched by the guard
BOUNDARY_MASS_TOL = 1e-6


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform periodic grid: ``points`` samples spaced ``dx`` per axis,
    window centred at ``origin`` (scalar per axis)."""

    dim: int
    points: int
    dx: float
    origin: tuple

    def __post_init__(self):
        if self.points & (self.points - 1):
            raise ValueError("points per axis must be a power of two")
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")

    @property
    def length(self) -> float:
        return self.points * self.dx

    def axis(self, axis: int = 0) -> np.ndarray:
        j = np.arange(self.points)
        return self.origin[axis] + (j - self.points // 2) * self.dx

    def k_axis(self) -> np.ndarray:
        return 2.0 * math.pi * np.fft.fftfreq(self.points, d=self.dx)

    @property
    def cell(self) -> float:
        """Integration weight of one grid cell (dx in 1D, dx^2 in 2D)."""
        return self.dx**self.dim

    def recentered(self, new_origin) -> "SpatialGrid":
        new_origin = (float(new_origin),) if np.isscalar(new_origin) else tuple(
            float(v) for v in new_origin
        )
        return SpatialGrid(dim=self.dim, points=self.points, dx=self.dx, origin=new_origin)


def make_grid(
    dim: int,
    sigma: float,
    span: float,
    center=0.0,
    dx_factor: float = 8.0,
) -> SpatialGrid:
    """Grid with dx = sigma/dx_factor covering at least ``span`` per axis
    (never less than 16 sigma), rounded up to a power of two."""
    dx = sigma / dx_factor
    need = max(span, 16.0 * sigma)
    points = 1 << max(7, math.ceil(math.log2(need / dx)))
    origin = (center,) * dim if np.isscalar(center) else tuple(float(c) for c in center)
    return SpatialGrid(dim=dim, points=points, dx=dx, origin=origin)


class WaveFunction:
    """Complex amplitudes on a SpatialGrid with norm bookkeeping.

    ``psi`` has shape (points,) in 1D and (points, points) in 2D.
    """

    def __init__(self, psi: np.ndarray, grid: SpatialGrid, normalize: bool = True):
        self.grid = grid
        self.psi = np.asarray(psi, dtype=np.complex128)
        if normalize:
            self.normalize()

    def norm_sq(self) -> float:
        flat = self.psi.reshape(-1)
        return float(np.vdot(flat, flat).real * self.grid.cell)

    @property
    def current_norm(self) -> float:
        return math.sqrt(self.norm_sq())

    def normalize(self) -> None:
        n = self.current_norm
        if n == 0.0:
            raise ValueError("cannot normalize a zero state")
        self.psi /= n

    def density(self) -> np.ndarray:
        return np.abs(self.psi) ** 2

    def copy(self) -> "WaveFunction":
        return WaveFunction(self.psi.copy(), self.grid, normalize=False)

    def boundary_mass(self) -> float:
        """|psi|^2 mass in the outermost BOUNDARY_FRACTION of the window."""
        n = self.grid.points
        w = max(1, int(round(n * BOUNDARY_FRACTION / 2)))
        if self.grid.dim == 1:
            a, b = self.psi[:w], self.psi[-w:]
            mass = np.vdot(a, a).real + np.vdot(b, b).real
        else:
            dens = self.density()
            mass = dens.sum() - dens[w:-w, w:-w].sum()
        return float(mass * self.grid.cell)

    def check_boundary(self) -> None:
        m = self.boundary_mass()
        if m > BOUNDARY_MASS_TOL:
            raise BoundaryBreach(f"boundary mass {m:.3e} exceeds {BOUNDARY_MASS_TOL:.0e}")

    def position_moments(self):
        """Centroid and std per axis from |psi|^2 (assumes normalized)."""
        dens = self.density() * self.grid.cell
        means, stds = [], []
        for axis in range(self.grid.dim):
            x = self.grid.axis(axis)
            marg = dens if self.grid.dim == 1 else dens.sum(axis=1 - axis)
            mu = float(np.dot(marg, x))
            var = float(np.dot(marg, (x - mu) ** 2))
            means.append(mu)
            stds.append(math.sqrt(max(var, 0.0)))
        return np.array(means), np.array(stds)

    def momentum_moments(self):
        """Centroid and std per axis of |psi~(k)|^2."""
        psik = np.fft.fftn(self.psi)
        dens = np.abs(psik) ** 2
        dens /= dens.sum()
        k = self.grid.k_axis()
        means, stds = [], []
        for axis in range(self.grid.dim):
            marg = dens if self.grid.dim == 1 else dens.sum(axis=1 - axis)
            mu = float(np.dot(marg, k))
            var = float(np.dot(marg, (k - mu) ** 2))
            means.append(mu)
            stds.append(math.sqrt(max(var, 0.0)))
        return np.array(means), np.array(stds)

    @staticmethod
    def _support(marginal: np.ndarray, coords: np.ndarray, eps: float):
        cum = np.cumsum(marginal)
        cum /= cum[-1]
        lo = int(np.searchsorted(cum, eps))
        hi = int(np.searchsorted(cum, 1.0 - eps))
        return float(coords[lo]), float(coords[min(hi, len(coords) - 1)])

    def position_support(self, eps: float = 1e-5):
        """Per-axis (lo, hi) interval holding all but ~eps of |psi|^2 mass.

        Quantile-based, so long low-mass tails of reshaped conditional
        states do not inflate it the way a second moment would.
        """
        dens = self.density()
        out = []
        for axis in range(self.grid.dim):
            marg = dens if self.grid.dim == 1 else dens.sum(axis=1 - axis)
            out.append(self._support(marg, self.grid.axis(axis), eps))
        return out

    def momentum_support(self, eps: float = 1e-5):
        """Per-axis (lo, hi) interval of |psi~(k)|^2 mass."""
        psik = np.fft.fftn(self.psi)
        dens = np.abs(psik) ** 2
        k = np.fft.fftshift(self.grid.k_axis())
        out = []
        for axis in range(self.grid.dim):
            marg = dens if self.grid.dim == 1 else dens.sum(axis=1 - axis)
            out.append(self._support(np.fft.fftshift(marg), k, eps))
        return out


def gaussian_state(grid: SpatialGrid, x0, k0, width: float) -> WaveFunction:
    """Minimum-uncertainty Gaussian packet centred at (x0, k0)."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    k0 = np.atleast_1d(np.asarray(k0, dtype=float))
    if grid.dim == 1:
        x = grid.axis(0)
        psi = np.exp(-((x - x0[0]) ** 2) / (4.0 * width**2) + 1j * k0[0] * x)
    else:
        x = grid.axis(0)[:, None]
        y = grid.axis(1)[None, :]
        psi = np.exp(
            -((x - x0[0]) ** 2 + (y - x0[1]) ** 2) / (4.0 * width**2)
            + 1j * (k0[0] * x + k0[1] * y)
        )
    return WaveFunction(psi, grid)


def lattice_state(grid: SpatialGrid, idx: DetectorIndex, lattice: DetectorLattice) -> WaveFunction:
    """Detector state |alpha_idx> sampled on the grid and renormalized."""
    if grid.dim == 1:
        amp = coherent_amplitude(grid.axis(0), idx, lattice)
    else:
        amp = coherent_amplitude((grid.axis(0), grid.axis(1)), idx, lattice)
    return WaveFunction(amp, grid)


def angular_momentum_state(grid: SpatialGrid, l_z: int, omega: float) -> WaveFunction:
    """2D circular trap eigenstate ~ exp(-omega r^2 / 2) (sqrt(omega) r e^{i phi})^{l_z}.

    Stationary in an isotropic harmonic trap of frequency omega; detection
    breaks the rotational symmetry and starts the circular motion.
    """
    if grid.dim != 2:
        raise ValueError("angular-momentum state is 2D only")
    x = grid.axis(0)[:, None]
    y = grid.axis(1)[None, :]
    w = x + 1j * y
    r2 = x**2 + y**2
    psi = np.exp(-omega * r2 / 2.0) * (math.sqrt(omega) * w) ** l_z
    return WaveFunction(psi, grid)
