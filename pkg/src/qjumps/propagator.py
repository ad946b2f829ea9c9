"""Deterministic no-jump evolution under the non-hermitian Hamiltonian.

One step of H = H_S - (i/2) sum_a gamma_a |a><a| is split as

    kinetic half-step (spectral)  ->  potential full step
    ->  dissipative projector-sum update  ->  kinetic half-step

The dissipative update is first-order Euler by default,
d psi = -(dt/2) sum_a gamma_a <a|psi> |a>, restricted to an active window of
detectors around the state's phase-space centroid (Gaussian tails make the
excluded jump rate < 1e-10).  For small windows an exact low-rank exponential
of the projector sum is available ("exact" mode); it removes the O(gamma^2 dt)
per-step bias, which matters in long deterministic intensity runs at large
gamma while leaving the stochastic contract unchanged.

The detector overlaps computed mid-step double as the jump probabilities
delta_p_a = gamma_a dt |<a|psi>|^2 of the trajectory engine, which keeps the
norm-loss bookkeeping consistent with the sampled probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as spfft

from .errors import StepTooLarge
from .grid import SpatialGrid, WaveFunction, lattice_state
from .lattice import DetectorIndex, DetectorLattice

WINDOW_SIGMA_PAD = 8.0  # window half-width: 8 sigma + 4 state widths
WINDOW_STATE_PAD = 4.0
EXACT_MODE_MAX_DETECTORS = 128


@dataclass(frozen=True)
class Potential:
    """External potential: 'free' (V=0), 'harmonic1d'/'harmonic2d'
    (V = omega^2 x^2 / 2 per axis), or 'none' (H_S = 0 entirely; used to
    validate measurement-only closed forms)."""

    kind: str = "free"
    omega: float = 0.0

    def __post_init__(self):
        if self.kind not in ("free", "harmonic1d", "harmonic2d", "none"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.omega < 0:
            raise ValueError("omega must be >= 0")

    @property
    def dim(self) -> int:
        return 2 if self.kind == "harmonic2d" else 1

    def values(self, grid: SpatialGrid) -> np.ndarray | None:
        if self.kind in ("free", "none"):
            return None
        if self.kind == "harmonic1d":
            x = grid.axis(0)
            return 0.5 * self.omega**2 * x**2
        x = grid.axis(0)[:, None]
        y = grid.axis(1)[None, :]
        return 0.5 * self.omega**2 * (x**2 + y**2)


def _index_window(center, width, spacing, lo, hi):
    """Lattice indices j with |j*spacing - center| <= width, clamped to [lo, hi]."""
    return _span_window(center - width, center + width, spacing, lo, hi)


def recenter_origin(grid: SpatialGrid, idx: DetectorIndex, lattice: DetectorLattice,
                    forward_bias: bool = False):
    """Window origin for a state collapsed onto detector ``idx``.

    With ``forward_bias`` (free flight) the origin sits a quarter window
    ahead of the detector along the clicked momentum, so long no-click
    stretches have headroom before the boundary guard trips; the bias keeps
    at least 10 sigma of window behind the state."""
    pos = lattice.position(idx)
    if not forward_bias:
        return tuple(pos) if lattice.dim == 2 else float(pos[0])
    mom = lattice.momentum(idx)
    half = 0.5 * grid.length
    bias = max(0.0, min(0.25 * grid.length, half - 10.0 * lattice.sigma))
    center = [p + math.copysign(bias, k) if k != 0 else p for p, k in zip(pos, mom)]
    return tuple(center) if lattice.dim == 2 else float(center[0])


def _span_window(xlo, xhi, spacing, lo, hi):
    """Lattice indices j with xlo <= j*spacing <= xhi, clamped to [lo, hi]."""
    jlo = max(lo, math.ceil(xlo / spacing))
    jhi = min(hi, math.floor(xhi / spacing))
    if jhi < jlo:
        j = int(round(0.5 * (xlo + xhi) / spacing))
        j = min(max(j, lo), hi)
        return np.array([j])
    return np.arange(jlo, jhi + 1)


class DetectorWindow:
    """Active detectors of a 1D phase-space lattice with precomputed banks.

    envelopes[m, j] = (2 pi sigma^2)^(-1/4) exp(-(x_j - x_m)^2 / 4 sigma^2)
    phases[n, j]    = exp(-i k_n x_j)

    so overlaps come from one small matrix product per step and the row-major
    (m, then n) flattening fixes the deterministic jump tie-break order.
    """

    # envelope tail kept around the detector row, in sigma; at 12 sigma the
    # cut amplitude e^{-36} sits at the float roundoff floor, so slicing does
    # not seed spurious undamped components (those grow like e^{gamma t / 2}
    # in renormalized no-click evolution)
    SUPPORT_PAD = 12.0

    def __init__(self, lattice: DetectorLattice, grid: SpatialGrid, m_values, n_values):
        self.lattice = lattice
        self.grid = grid
        self.m_values = np.asarray(m_values, dtype=int)
        self.n_values = np.asarray(n_values, dtype=int)
        sig2 = lattice.sigma**2
        norm = (2.0 * math.pi * sig2) ** -0.25
        # all envelopes vanish outside the detector span + tails; banks live
        # on that slice only
        x_full = grid.axis(0)
        pad = self.SUPPORT_PAD * lattice.sigma
        lo = self.m_values[0] * lattice.dx_spacing - pad
        hi = self.m_values[-1] * lattice.dx_spacing + pad
        self.j0 = max(0, int(np.searchsorted(x_full, lo)))
        self.j1 = min(len(x_full), int(np.searchsorted(x_full, hi)) + 1)
        x = x_full[self.j0:self.j1]
        xm = self.m_values[:, None] * lattice.dx_spacing
        self.envelopes = norm * np.exp(-((x[None, :] - xm) ** 2) / (4.0 * sig2))
        # e^{-i k_n x} rows built recursively (one complex exp, then multiplies)
        n_n = len(self.n_values)
        phases = np.empty((n_n, len(x)), dtype=np.complex128)
        base = np.exp(-1j * lattice.dp_spacing * x)
        row = np.exp(-1j * (self.n_values[0] * lattice.dp_spacing) * x)
        for i in range(n_n):
            phases[i] = row
            if i + 1 < n_n:
                step = self.n_values[i + 1] - self.n_values[i]
                row = row * (base if step == 1 else base**step)
        self.phases = phases
        self.phases_t = np.ascontiguousarray(phases.T)
        self.phases_conj = np.ascontiguousarray(np.conj(phases))
        if lattice.k_cut is None:
            self.gamma_n = np.full(n_n, lattice.gamma0)
        else:
            kk = self.n_values * lattice.dp_spacing
            self.gamma_n = lattice.gamma0 * np.exp(-(kk**2) / lattice.k_cut**2)
        self._gram_cache = None

    @property
    def n_detectors(self) -> int:
        return len(self.m_values) * len(self.n_values)

    def same_window(self, m_values, n_values, grid) -> bool:
        return (grid is self.grid
                and len(m_values) == len(self.m_values)
                and len(n_values) == len(self.n_values)
                and m_values[0] == self.m_values[0] and m_values[-1] == self.m_values[-1]
                and n_values[0] == self.n_values[0] and n_values[-1] == self.n_values[-1])

    def overlaps(self, psi: np.ndarray) -> np.ndarray:
        """<alpha_mn|psi> for the window; shape (n_m, n_n)."""
        g = self.envelopes * psi[None, self.j0:self.j1]
        return (g @ self.phases_t) * self.grid.dx

    def rates(self, overlaps: np.ndarray) -> np.ndarray:
        """Jump rates gamma_n |<a|psi>|^2, same shape as overlaps."""
        return self.gamma_n[None, :] * np.abs(overlaps) ** 2

    def euler_dissipate(self, psi: np.ndarray, overlaps: np.ndarray, dt: float) -> None:
        """psi -= (dt/2) sum_a gamma_a <a|psi> alpha_a(x), in place."""
        b = (overlaps * self.gamma_n[None, :]) @ self.phases_conj
        b *= self.envelopes
        psi[self.j0:self.j1] -= (0.5 * dt) * b.sum(axis=0)

    def _gram(self):
        """Analytic Gram matrix of the window's detector states (flat order)."""
        if self._gram_cache is None:
            lat = self.lattice
            sig2 = lat.sigma**2
            xm = self.m_values * lat.dx_spacing
            kn = self.n_values * lat.dp_spacing
            dxv = xm[:, None] - xm[None, :]
            gx = np.exp(-(dxv**2) / (8.0 * sig2))
            dkv = kn[:, None] - kn[None, :]
            sk = kn[:, None] + kn[None, :]
            gk = np.exp(-sig2 * dkv**2 / 2.0)
            # phase exp(i dk (x_a + x_b)/2) couples the m and n factors
            nm, nn = len(self.m_values), len(self.n_values)
            sx = (xm[:, None] + xm[None, :]) / 2.0
            g = (
                gx[:, None, :, None]
                * gk[None, :, None, :]
                * np.exp(1j * (-dkv)[None, :, None, :] * sx[:, None, :, None])
            )
            self._gram_cache = g.reshape(nm * nn, nm * nn)
        return self._gram_cache

    def exact_dissipate(self, psi: np.ndarray, overlaps: np.ndarray, dt: float) -> None:
        """Apply exp(-(dt/2) sum_a gamma_a |a><a|) exactly in the detector span.

        psi' = psi + sum_a c_a alpha_a  with  c = G^(1/2-weighted) phi of the
        Gram spectrum; reduces to the Euler update as dt -> 0.
        """
        o = overlaps.reshape(-1)
        gam = np.repeat(self.gamma_n[None, :], len(self.m_values), axis=0).reshape(-1)
        sq = np.sqrt(gam)
        s = self._gram() * np.outer(sq, sq)
        lam, u = np.linalg.eigh(s)
        lam = np.clip(lam, 0.0, None)
        c = 0.5 * dt
        with np.errstate(divide="ignore", invalid="ignore"):
            phi = np.where(lam > 1e-14, np.expm1(-c * lam) / lam, -c)
        coef = sq * (u @ (phi * (u.conj().T @ (sq * o))))
        coef = coef.reshape(len(self.m_values), len(self.n_values))
        t = coef @ self.phases_conj
        t *= self.envelopes
        psi[self.j0:self.j1] += t.sum(axis=0)

    def collapse_index(self, flat: int) -> DetectorIndex:
        nm = len(self.n_values)
        return DetectorIndex.make(self.m_values[flat // nm], self.n_values[flat % nm])


class DetectorWindow2D:
    """Active window of a 2D phase-space lattice (4 index axes).

    Detector states factorize per spatial axis, so the overlap tensor is
    A_x Psi A_y^T with per-axis banks A[(m,n), j] = envelope * exp(-i k x).
    """

    def __init__(self, lattice: DetectorLattice, grid: SpatialGrid, m_values, n_values):
        self.lattice = lattice
        self.grid = grid
        self.m_values = np.asarray(m_values, dtype=int)
        self.n_values = np.asarray(n_values, dtype=int)
        sig2 = lattice.sigma**2
        norm = (2.0 * math.pi * sig2) ** -0.25
        self.axis_banks = []
        for axis in range(2):
            x = grid.axis(axis)
            a = np.empty((len(self.m_values) * len(self.n_values), len(x)), dtype=np.complex128)
            i = 0
            for m in self.m_values:
                fm = norm * np.exp(-((x - m * lattice.dx_spacing) ** 2) / (4 * sig2))
                for n in self.n_values:
                    a[i] = fm * np.exp(-1j * n * lattice.dp_spacing * x)
                    i += 1
            self.axis_banks.append(a)
        self.axis_banks_t = [np.ascontiguousarray(a.T) for a in self.axis_banks]
        self.axis_banks_h = [np.ascontiguousarray(a.conj().T) for a in self.axis_banks]
        self.axis_banks_conj = [np.ascontiguousarray(a.conj()) for a in self.axis_banks]
        if lattice.k_cut is None:
            g_axis = np.ones(len(self.n_values))
        else:
            kk = self.n_values * lattice.dp_spacing
            g_axis = np.exp(-(kk**2) / lattice.k_cut**2)
        gpair = np.repeat(g_axis[None, :], len(self.m_values), axis=0).reshape(-1)
        self.gamma_pair = lattice.gamma0 * np.outer(gpair, gpair)

    def same_window(self, m_values, n_values, grid) -> bool:
        return (grid is self.grid
                and len(m_values) == len(self.m_values)
                and len(n_values) == len(self.n_values)
                and m_values[0] == self.m_values[0] and m_values[-1] == self.m_values[-1]
                and n_values[0] == self.n_values[0] and n_values[-1] == self.n_values[-1])

    @property
    def n_detectors(self) -> int:
        return self.gamma_pair.size

    def overlaps(self, psi: np.ndarray) -> np.ndarray:
        ax = self.axis_banks[0]
        ay_t = self.axis_banks_t[1]
        return (ax @ psi @ ay_t) * self.grid.cell

    def rates(self, overlaps: np.ndarray) -> np.ndarray:
        return self.gamma_pair * np.abs(overlaps) ** 2

    def euler_dissipate(self, psi: np.ndarray, overlaps: np.ndarray, dt: float) -> None:
        ax_h = self.axis_banks_h[0]
        ay_conj = self.axis_banks_conj[1]
        w = self.gamma_pair * overlaps
        psi -= (0.5 * dt) * (ax_h @ w @ ay_conj)

    exact_dissipate = None  # 2D runs use the Euler update

    def collapse_index(self, flat: int) -> DetectorIndex:
        npair = len(self.m_values) * len(self.n_values)
        nn = len(self.n_values)
        a, b = divmod(flat, npair)
        return DetectorIndex.make(
            (self.m_values[a // nn], self.m_values[b // nn]),
            (self.n_values[a % nn], self.n_values[b % nn]),
        )


@dataclass
class Measurement:
    """Overlap data of one step, pinned to the window that produced it.

    The active window may be rebuilt right after a step (drift refresh), so
    jump sampling and collapse must use this snapshot, not the live window.
    """

    window: object
    overlaps: np.ndarray
    rates: np.ndarray | None = None

    def flat_rates(self) -> np.ndarray:
        if self.rates is not None:
            return self.rates
        return self.window.rates(self.overlaps).reshape(-1)


class JumpModel:
    """Coherent-state projector measurement on a phase-space lattice."""

    def __init__(self, lattice: DetectorLattice, dissipative_mode: str = "euler",
                 fixed_window=None, recenter: bool = True, forward_bias: bool = False):
        if dissipative_mode not in ("euler", "exact"):
            raise ValueError("dissipative_mode must be 'euler' or 'exact'")
        self.lattice = lattice
        self.dissipative_mode = dissipative_mode
        self.fixed_window = fixed_window
        self.recenter = recenter
        # free flight: shift the window ahead of the clicked momentum so long
        # no-click stretches have headroom (wrong for oscillating potentials)
        self.forward_bias = forward_bias
        self.window = None

    def rate_estimate(self) -> float:
        from .lattice import total_click_rate_estimate
        return total_click_rate_estimate(self.lattice)

    def build_window(self, psi: WaveFunction):
        """Detectors within 8 sigma (8 sigma_p) of the state's support.

        Support is the quantile interval holding all but ~1e-5 of the mass,
        which coincides with centroid +- 4.4 widths for Gaussian states but
        stays tight on heavy-tailed conditional states; Gaussian meter tails
        keep the excluded jump rate negligible.
        """
        lat = self.lattice
        if self.fixed_window is not None:
            mv, nv = self.fixed_window
        else:
            sig = lat.sigma
            sig_p = 0.5 / sig
            xsup = psi.position_support()
            ksup = psi.momentum_support()
            xlo = min(s[0] for s in xsup) - WINDOW_SIGMA_PAD * sig
            xhi = max(s[1] for s in xsup) + WINDOW_SIGMA_PAD * sig
            klo = min(s[0] for s in ksup) - WINDOW_SIGMA_PAD * sig_p
            khi = max(s[1] for s in ksup) + WINDOW_SIGMA_PAD * sig_p
            mv = _span_window(xlo, xhi, lat.dx_spacing, *lat.m_range)
            nv = _span_window(klo, khi, lat.dp_spacing, *lat.n_range)
        if self.window is not None and self.window.same_window(mv, nv, psi.grid):
            return
        cls = DetectorWindow if lat.dim == 1 else DetectorWindow2D
        self.window = cls(lat, psi.grid, mv, nv)

    def dissipate(self, psi_array: np.ndarray, dt: float) -> Measurement:
        """Apply the dissipative sub-step in place; returns the measurement."""
        o = self.window.overlaps(psi_array)
        if self.dissipative_mode == "exact" and self.window.exact_dissipate is not None \
                and self.window.n_detectors <= EXACT_MODE_MAX_DETECTORS:
            self.window.exact_dissipate(psi_array, o, dt)
        else:
            self.window.euler_dissipate(psi_array, o, dt)
        return Measurement(window=self.window, overlaps=np.asarray(o))

    def collapse(self, measurement: Measurement, flat_index: int, grid: SpatialGrid,
                 psi_array=None) -> tuple[WaveFunction, DetectorIndex]:
        """Post-jump state |alpha> on a window re-centred at the detector.

        Exact: the post-jump state is a lattice coherent state (independent
        of the pre-jump state), so it is simply resampled on the moved window.
        """
        idx = measurement.window.collapse_index(flat_index)
        lat = self.lattice
        if self.recenter:
            center = recenter_origin(grid, idx, lat, self.forward_bias)
            grid = grid.recentered(center)
        psi = lattice_state(grid, idx, lat)
        return psi, idx


class Propagator:
    """Split-step integrator owning one wavefunction.

    One instance is used by exactly one worker at a time; distinct instances
    share no mutable state.
    """

    def __init__(self, psi: WaveFunction, model, potential: Potential,
                 window_refresh_every: int = 10, boundary_check_every: int = 10,
                 max_norm_loss: float = 0.1):
        self.psi = psi
        self.model = model
        self.potential = potential
        self.window_refresh_every = window_refresh_every
        self.boundary_check_every = boundary_check_every
        self.max_norm_loss = max_norm_loss
        self._steps_since_refresh = 0
        self._steps_since_boundary = 0
        self._factor_cache = {}
        if model is not None:
            model.build_window(psi)
        self._build_phase_factors()

    def _build_phase_factors(self):
        grid = self.psi.grid
        self._k2 = None
        if self.potential.kind != "none":
            k = grid.k_axis()
            if grid.dim == 1:
                self._k2 = k**2
            else:
                self._k2 = k[:, None] ** 2 + k[None, :] ** 2
        self._v = self.potential.values(grid)
        self._factor_cache = {}

    def _factors(self, dt: float):
        cached = self._factor_cache.get(dt)
        if cached is None:
            exp_k = None if self._k2 is None else np.exp(-0.25j * dt * self._k2)
            exp_v = None if self._v is None else np.exp(-1j * dt * self._v)
            if len(self._factor_cache) > 32:
                self._factor_cache.clear()
            cached = self._factor_cache[dt] = (exp_k, exp_v)
        return cached

    def _maybe_refresh(self):
        self._steps_since_refresh += 1
        if self.model is not None and self.model.fixed_window is None \
                and self._steps_since_refresh >= self.window_refresh_every:
            self.model.build_window(self.psi)
            self._steps_since_refresh = 0

    def rebuild(self, psi: WaveFunction):
        """Adopt a new state (e.g. after a jump re-centred the window)."""
        recentered = psi.grid.origin != self.psi.grid.origin
        self.psi = psi
        if recentered and self._v is not None:
            self._build_phase_factors()  # potential values depend on absolute x
        if self.model is not None:
            self.model.build_window(psi)
        self._steps_since_refresh = 0

    def step(self, dt: float, renormalize: bool = True):
        """One split step.  Returns (overlaps, norm_loss).

        The overlaps are taken mid-step and are the ones the dissipative
        update consumed, so gamma_a dt |o_a|^2 is consistent with the norm
        loss to O(dt^2).  Raises StepTooLarge when the norm drops by > 10%.
        """
        psi = self.psi.psi
        exp_k, exp_v = self._factors(dt)
        if exp_k is not None:
            fft, ifft = (spfft.fft, spfft.ifft) if psi.ndim == 1 else (spfft.fft2, spfft.ifft2)
            psi = ifft(exp_k * fft(psi))
        if exp_v is not None:
            psi = psi * exp_v
        if psi is self.psi.psi:  # H_S == 0: nothing has copied the array yet
            psi = psi.copy()
        overlaps = self.model.dissipate(psi, dt) if self.model is not None else np.zeros((0, 0))
        if exp_k is not None:
            psi = ifft(exp_k * fft(psi))
        self.psi.psi = psi
        nsq = self.psi.norm_sq()
        loss = 1.0 - nsq
        if loss > self.max_norm_loss or loss < -1e-6:
            # negative loss means the first-order dissipative update overshot
            # (gamma dt / 2 > 1): the step is meaningless either way
            raise StepTooLarge(f"norm loss {loss:.3f} outside (-1e-6, "
                               f"{self.max_norm_loss}); reduce dt")
        if renormalize:
            self.psi.psi /= math.sqrt(nsq)
        self._steps_since_boundary += 1
        if self._steps_since_boundary >= self.boundary_check_every:
            self.psi.check_boundary()
            self._steps_since_boundary = 0
        self._maybe_refresh()
        return overlaps, loss


def evolve_nonhermitian_step(psi: WaveFunction, dt: float, lattice: DetectorLattice,
                             pot: Potential, dissipative_mode: str = "euler"):
    """Single no-jump step of a fresh propagator; returns the unnormalized
    evolved state and the per-detector overlaps used.

    Convenience wrapper for tests and one-off evaluations; long runs should
    hold a Propagator.
    """
    prop = Propagator(psi.copy(), JumpModel(lattice, dissipative_mode), pot)
    measurement, _ = prop.step(dt, renormalize=False)
    window = measurement.window
    labels = [window.collapse_index(i) for i in range(window.n_detectors)]
    return prop.psi, list(zip(labels, np.asarray(measurement.overlaps).reshape(-1)))


def active_overlaps(psi: WaveFunction, lattice: DetectorLattice):
    """Overlaps <alpha|psi> for every detector in the active window around
    the state's centroid.  Detectors outside contribute exactly 0 and are
    not listed."""
    model = JumpModel(lattice)
    model.build_window(psi)
    o = model.window.overlaps(psi.psi)
    flat = np.asarray(o).reshape(-1)
    return [(model.window.collapse_index(i), flat[i]) for i in range(flat.size)]
