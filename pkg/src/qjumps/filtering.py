"""Spatial-filtering measurement model (the comparison scheme).

A filter click at centre x_m multiplies the wavefunction by the Gaussian
envelope f(x_m - x) = (2 pi sigma^2)^(-1/4) exp(-(x_m - x)^2 / 4 sigma^2)
and renormalizes: position is measured, momentum is not, and the local phase
of the state survives.  The no-jump Hamiltonian term sum_m K_m^dag K_m =
gamma sum_m f_m(x)^2 is a multiplication operator in position space and is
applied exactly inside the same splitting used for the projector model.

Filter centres live on the same spatial grid (spacing D) as the detector
lattice; there is no momentum index, so trajectory events carry n = None.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInterval, ZeroOverlap
from .grid import SpatialGrid, WaveFunction
from .lattice import DEFAULT_SIGMA, DetectorLattice
from .propagator import WINDOW_SIGMA_PAD, _span_window


@dataclass(frozen=True)
class FilterBank:
    """Gaussian spatial filters of width sigma on centres m * spacing."""

    spacing: float
    gamma: float
    sigma: float = DEFAULT_SIGMA
    m_range: tuple = (-1000, 1000)

    @staticmethod
    def from_lattice(lattice: DetectorLattice) -> "FilterBank":
        return FilterBank(spacing=lattice.dx_spacing, gamma=lattice.gamma0,
                          sigma=lattice.sigma, m_range=lattice.m_range)

    def envelope(self, x: np.ndarray, m: int) -> np.ndarray:
        norm = (2.0 * math.pi * self.sigma**2) ** -0.25
        return norm * np.exp(-((x - m * self.spacing) ** 2) / (4.0 * self.sigma**2))


class FilterWindow:
    """Active filter centres with the envelope bank precomputed."""

    def __init__(self, bank: FilterBank, grid: SpatialGrid, m_values):
        self.bank = bank
        self.grid = grid
        self.m_values = np.asarray(m_values, dtype=int)
        x = grid.axis(0)
        self.envelopes = np.stack([bank.envelope(x, m) for m in self.m_values])
        self.env_sq = self.envelopes**2
        self.w_total = bank.gamma * self.env_sq.sum(axis=0)

    def rates(self, psi: np.ndarray) -> np.ndarray:
        dens = np.abs(psi) ** 2
        return self.bank.gamma * (self.env_sq @ dens) * self.grid.dx


class FilterModel:
    """Measurement-model hooks used by the split-step propagator."""

    def __init__(self, bank: FilterBank, recenter: bool = True, fixed_window=None):
        self.bank = bank
        self.recenter = recenter
        self.fixed_window = fixed_window
        self.window = None
        self._exp_cache = {}
        self._last_rates = None

    def rate_estimate(self) -> float:
        peak = (2.0 * math.pi * self.bank.sigma**2) ** -0.5
        return self.bank.gamma * (1.0 / self.bank.spacing + peak)

    def build_window(self, psi: WaveFunction):
        if self.fixed_window is not None:
            mv = self.fixed_window
        else:
            (xlo, xhi), = psi.position_support()
            pad = WINDOW_SIGMA_PAD * self.bank.sigma
            mv = _span_window(xlo - pad, xhi + pad, self.bank.spacing, *self.bank.m_range)
        if self.window is not None and np.array_equal(mv, self.window.m_values) \
                and psi.grid is self.window.grid:
            return
        self.window = FilterWindow(self.bank, psi.grid, mv)
        self._exp_cache = {}

    def dissipate(self, psi_array: np.ndarray, dt: float):
        from .propagator import Measurement
        rates = self.window.rates(psi_array)
        decay = self._exp_cache.get(dt)
        if decay is None:
            decay = np.exp(-0.5 * dt * self.window.w_total)
            self._exp_cache[dt] = decay
        psi_array *= decay
        return Measurement(window=self.window, overlaps=rates, rates=rates)

    def collapse(self, measurement, flat_index: int, grid: SpatialGrid,
                 psi_array: np.ndarray):
        """Filter the evolved state at the sampled centre and re-centre the
        window on the result (integer-cell roll, exact to the boundary mass)."""
        window = measurement.window
        m = int(window.m_values[flat_index])
        psi = apply_filter_array(window.envelopes[flat_index], psi_array, grid)
        if self.recenter:
            psi = recenter_by_roll(psi)
        return psi, m


def apply_filter_array(envelope: np.ndarray, psi_array: np.ndarray,
                       grid: SpatialGrid) -> WaveFunction:
    out = envelope * psi_array
    nsq = float(np.sum(np.abs(out) ** 2) * grid.cell)
    if nsq < 1e-24:
        raise ZeroOverlap("filter annihilated the state")
    return WaveFunction(out / math.sqrt(nsq), grid, normalize=False)


def filter_jump_rates(psi: WaveFunction, bank: FilterBank):
    """rate_m = gamma * integral |f(x_m - x)|^2 |psi(x)|^2 dx for the active
    window; returns a list of (m, rate)."""
    model = FilterModel(bank)
    model.build_window(psi)
    rates = model.window.rates(psi.psi)
    return list(zip((int(m) for m in model.window.m_values), rates))


def apply_filter(psi: WaveFunction, m: int, bank: FilterBank) -> WaveFunction:
    """Post-measurement state ~ f(x_m - x) psi(x), renormalized.

    Unlike a projection, the local phase structure of psi is preserved.
    """
    env = bank.envelope(psi.grid.axis(0), m)
    return apply_filter_array(env, psi.psi, psi.grid)


def recenter_by_roll(psi: WaveFunction) -> WaveFunction:
    """Shift the window by an integer number of cells so the state's median
    position sits at the centre; entering cells are zero-filled.  Exact up to
    the boundary mass (guarded < 1e-6).

    The median is used instead of the centroid: conditional states carry
    low-mass far tails that would otherwise drag the window off the bulk.
    """
    grid = psi.grid
    dens = psi.density()
    cum = np.cumsum(dens)
    xc = grid.axis(0)[int(np.searchsorted(cum, 0.5 * cum[-1]))]
    s = int(round((xc - grid.origin[0]) / grid.dx))
    if s == 0:
        return psi
    arr = np.roll(psi.psi, -s)
    if s > 0:
        arr[-s:] = 0.0
    else:
        arr[:-s] = 0.0
    new_grid = grid.recentered(grid.origin[0] + s * grid.dx)
    return WaveFunction(arr, new_grid, normalize=True)


def sample_first_filter(psi0: WaveFunction, bank: FilterBank, rng, recenter: bool = True):
    """Position-only analogue of the Husimi first click: sample a centre with
    probability ~ rate_m, apply the filter, re-centre the window."""
    model = FilterModel(bank)
    model.build_window(psi0)
    rates = model.window.rates(psi0.psi)
    if rates.max() <= 0:
        raise ZeroOverlap("initial state sees no filter")
    cum = np.cumsum(rates)
    flat = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    flat = min(flat, rates.size - 1)
    m = int(model.window.m_values[flat])
    psi = apply_filter_array(model.window.envelopes[flat], psi0.psi, psi0.grid)
    return (recenter_by_roll(psi) if recenter else psi), m


def infer_velocity(events, x0: float, t0: float = 0.0) -> np.ndarray:
    """Finite-difference velocities k_i = (x_i - x_{i-1})/(t_i - t_{i-1})
    from ordered (t_i, x_i) pairs, anchored at (t0, x0)."""
    ts = np.array([e[0] for e in events], dtype=float)
    xs = np.array([e[1] for e in events], dtype=float)
    prev_t = np.concatenate(([t0], ts[:-1]))
    prev_x = np.concatenate(([x0], xs[:-1]))
    dt = ts - prev_t
    if np.any(dt < 1e-9):
        raise DegenerateInterval("event interval below 1e-9")
    return (xs - prev_x) / dt
