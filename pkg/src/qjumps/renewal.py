"""Deterministic renewal-theory analysis of the click process.

Between clicks the detections form an inhomogeneous Poisson process with
per-detector intensities lambda_i(t) = gamma_i |<alpha_i|psi(t)>|^2 taken
along the renormalized no-jump evolution.  Each click restarts the process
from a (translated) lattice state, which makes the click sequence a renewal
process: everything below is computed from one intensity table.

Key quantities (Lambda = cumulative integral of the total intensity):

    first-click density      f_T1(t) = lambda(t) exp(-Lambda(t))
    escape probability       p = exp(-Lambda(T))
    click-count law          p(N=n) = p (1-p)^n,   <N> = exp(Lambda(T)) - 1
    escape-time estimate     T_esc = <N> * integral t f_T1(t) dt

The large-gamma mean-position pipeline solves the lattice renewal equation
h_i(t) = f_i(t) + sum_j int h_j(s) f_{i-j}(t-s) ds by Fourier transform over
the (translation-invariant) displacement index and a trapezoid Volterra
march in time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import RunConfig, build_initial_state
from .errors import BadFit, NotEscaping
from .grid import make_grid
from .lattice import DetectorIndex, overlap_magnitude
from .propagator import JumpModel, Propagator

INTENSITY_STEP_BUDGET = 0.02  # gamma * dt for deterministic intensity runs


@dataclass
class IntensityTable:
    """Per-detector intensities on a uniform time grid.

    ``labels`` lists the detectors; ``lam`` has shape (n_times, n_detectors).
    """

    t: np.ndarray
    labels: list
    lam: np.ndarray
    lam_total: np.ndarray
    Lambda: np.ndarray

    def lam_of(self, label: DetectorIndex) -> np.ndarray:
        return self.lam[:, self.labels.index(label)]


def _cumtrapz(y: np.ndarray, dt: float) -> np.ndarray:
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1])) * dt
    return out


def compute_intensities(config: RunConfig, t_max: float,
                        m_values=None, n_values=None,
                        dt: float | None = None) -> IntensityTable:
    """No-jump propagation of the configured initial state, recording
    renormalized per-detector rates on a uniform grid.

    The detector set is fixed for the whole run: by default it covers the
    initial window plus the classical flight v * t_max.
    """
    lat = config.lattice
    ini = config.initial_state
    if ini.kind != "coherent-index":
        raise ValueError("intensity tables start from a lattice coherent state")
    v = float(np.atleast_1d(np.asarray(ini.n, dtype=float))[0]) * lat.dp_spacing
    m0 = int(np.atleast_1d(np.asarray(ini.m))[0])
    n0 = int(np.atleast_1d(np.asarray(ini.n))[0])
    if m_values is None:
        x0 = m0 * lat.dx_spacing
        lo = x0 + min(0.0, v * t_max) - 10.0 * lat.sigma
        hi = x0 + max(0.0, v * t_max) + 10.0 * lat.sigma
        m_values = np.arange(max(lat.m_range[0], math.floor(lo / lat.dx_spacing)),
                             min(lat.m_range[1], math.ceil(hi / lat.dx_spacing)) + 1)
    if n_values is None:
        n_values = np.array([n0])
    m_values = np.asarray(m_values, dtype=int)
    n_values = np.asarray(n_values, dtype=int)

    # window covers the detectors and the full conditional no-click flight,
    # including the dispersive growth of the escaped packet
    x0 = m0 * lat.dx_spacing
    sig2 = lat.sigma**2
    sig_disp = math.sqrt(sig2 * (1.0 + (t_max / (2.0 * sig2)) ** 2))
    pad = 12.0 * lat.sigma + 5.0 * sig_disp
    lo = min(m_values[0] * lat.dx_spacing, x0 + min(0.0, v * t_max)) - pad
    hi = max(m_values[-1] * lat.dx_spacing, x0 + max(0.0, v * t_max)) + pad
    grid = make_grid(1, lat.sigma, span=hi - lo, center=0.5 * (lo + hi))
    psi = build_initial_state(config, grid)
    model = JumpModel(lat, dissipative_mode="exact", fixed_window=(m_values, n_values))
    prop = Propagator(psi, model, config.potential)

    if dt is None:
        dt = min(config.dt_cap, INTENSITY_STEP_BUDGET / lat.gamma0)
    n_steps = int(round(t_max / dt))
    lam = np.empty((n_steps + 1, model.window.n_detectors))
    o0 = model.window.overlaps(psi.psi)
    lam[0] = model.window.rates(o0).reshape(-1)
    for i in range(n_steps):
        prop.step(dt)
        o = model.window.overlaps(prop.psi.psi)  # renormalized end-of-step state
        lam[i + 1] = model.window.rates(o).reshape(-1)
    t = np.arange(n_steps + 1) * dt
    labels = [model.window.collapse_index(i) for i in range(model.window.n_detectors)]
    lam_total = lam.sum(axis=1)
    return IntensityTable(t=t, labels=labels, lam=lam, lam_total=lam_total,
                          Lambda=_cumtrapz(lam_total, dt))


def two_detector_rates(gamma: float, c: float, t) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form renormalized rates for two meters a distance D apart under
    the measurement-only Hamiltonian, with t0 = 2/(gamma |c|):

        lambda_a = gamma (cosh(t/t0) - |c| sinh(t/t0))^2 / B(t)
        lambda_b = gamma (|c| cosh(t/t0) - sinh(t/t0))^2 / B(t)
        B(t)     = cosh(2t/t0) - |c| sinh(2t/t0)

    B is the squared norm of the evolved state, so both rates tend to the
    common limit gamma (1 - |c|)/2 and their difference decays ~ exp(-2t/t0).
    """
    if not (0.0 < c < 1.0):
        raise ValueError("overlap magnitude c must be in (0, 1)")
    t = np.asarray(t, dtype=float)
    t0 = 2.0 / (gamma * c)
    # guard cosh overflow: for large u use the asymptotic ratio forms
    u = t / t0
    small = u < 300.0
    la = np.empty_like(t)
    lb = np.empty_like(t)
    ch, sh = np.cosh(u[small]), np.sinh(u[small])
    den = np.cosh(2 * u[small]) - c * np.sinh(2 * u[small])
    la[small] = gamma * (ch - c * sh) ** 2 / den
    lb[small] = gamma * (c * ch - sh) ** 2 / den
    la[~small] = gamma * (1.0 - c) / 2.0
    lb[~small] = gamma * (1.0 - c) / 2.0
    return la, lb


def two_detector_timescale(gamma: float, D: float, sigma: float | None = None) -> float:
    sig = sigma if sigma is not None else math.sqrt(0.5)
    return 2.0 / (gamma * overlap_magnitude(D, 0.0, sig))


def first_click_density(table: IntensityTable):
    """f_T1 on the table's grid plus the escaped mass exp(-Lambda(t_max));
    integral of f plus the escaped mass is 1 up to quadrature error."""
    f = table.lam_total * np.exp(-table.Lambda)
    return f, float(np.exp(-table.Lambda[-1]))


def approx_fT1(gamma: float, v: float, D: float, t, n_terms: int = 8) -> np.ndarray:
    """Sparse-grid short-time approximation gamma e^(-gamma t)
    sum_i exp(-[v t - i D]^2); valid for gamma <~ 1, D > 1, t <~ 1.

    A crude envelope-and-peaks model: it places the peaks at t = i D / v but
    underestimates the widths (no wavepacket spreading, no dissipative
    reshaping), so expect qualitative agreement only.
    """
    t = np.asarray(t, dtype=float)
    i = np.arange(n_terms + 1)[:, None]
    return gamma * np.exp(-gamma * t) * np.exp(-((v * t[None, :] - i * D) ** 2)).sum(axis=0)


def click_statistics(Lambda_T: float):
    """Escape probability, click-count pmf and mean number of clicks for a
    horizon with cumulative intensity Lambda_T."""
    if Lambda_T < 0:
        raise ValueError("Lambda(T) must be >= 0")
    p = math.exp(-Lambda_T)

    def pmf(n):
        n = np.asarray(n)
        return p * (1.0 - p) ** n

    mean = math.expm1(Lambda_T)
    return p, pmf, mean


def escape_time(table: IntensityTable, decay_tol: float = 1e-3) -> float:
    """T_esc = <N_click> * <T_1> = (e^Lambda(T) - 1) int t lambda e^-Lambda dt.

    Requires the intensity to have decayed at the horizon
    (lambda(t_max)/lambda(0) <= decay_tol), otherwise NotEscaping.
    """
    lam0 = table.lam_total[0]
    if lam0 <= 0:
        raise NotEscaping("zero initial intensity")
    if table.lam_total[-1] / lam0 > decay_tol:
        raise NotEscaping(
            f"lambda(t_max)/lambda(0) = {table.lam_total[-1] / lam0:.2e} > {decay_tol:.0e}")
    f = table.lam_total * np.exp(-table.Lambda)
    mean_t1 = float(np.trapezoid(table.t * f, table.t))
    return math.expm1(table.Lambda[-1]) * mean_t1


def step_profile(table: IntensityTable, D: float) -> np.ndarray:
    """Intensity-weighted mean detector position <x(t)> = sum x_m lambda_m /
    sum lambda_m with x_m = m D (detector rows sharing one x_m aggregate)."""
    xs = np.array([lab.m[0] for lab in table.labels], dtype=float) * D
    num = table.lam @ xs
    den = table.lam_total.copy()
    den[den == 0] = np.inf
    return num / den


def retardation_fit(t: np.ndarray, x: np.ndarray, fit_window: tuple,
                    rms_tol: float, v: float | None = None):
    """Least-squares line x = v_fit (t - t_r) over fit_window.

    Returns (t_r, v_fit, rms); BadFit if the residual RMS exceeds rms_tol.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    sel = (t >= fit_window[0]) & (t <= fit_window[1]) & np.isfinite(x)
    if sel.sum() < 3:
        raise BadFit("fewer than 3 points in the fit window")
    a, b = np.polyfit(t[sel], x[sel], 1)
    rms = float(np.sqrt(np.mean((x[sel] - (a * t[sel] + b)) ** 2)))
    if rms > rms_tol:
        raise BadFit(f"residual RMS {rms:.3g} exceeds {rms_tol:.3g}")
    if a == 0:
        raise BadFit("zero slope")
    return -b / a, a, rms


# ---------------------------------------------------------------------------
# Lattice renewal pipeline (sparse grid, fixed momentum row)

@dataclass
class RenewalCurve:
    t: np.ndarray
    mean_x: np.ndarray
    click_rate: np.ndarray
    kernel_mass: float  # integral of the inter-click kernel over the horizon


def renewal_kernel(config: RunConfig, t_max: float, d_back: int = 2,
                   dt: float | None = None):
    """Displacement-resolved inter-click densities f_d(tau) for one renewal
    cell on the initial state's momentum row (momentum-changing clicks are
    neglected; on sparse grids they are a < 0.5% effect)."""
    lat = config.lattice
    ini = config.initial_state
    v = float(np.atleast_1d(np.asarray(ini.n, dtype=float))[0]) * lat.dp_spacing
    m0 = int(np.atleast_1d(np.asarray(ini.m))[0])
    d_fwd = int(math.ceil(abs(v) * t_max / lat.dx_spacing)) + 3
    m_values = np.arange(m0 - d_back, m0 + d_fwd + 1)
    table = compute_intensities(config, t_max, m_values=m_values, dt=dt)
    f = table.lam * np.exp(-table.Lambda)[:, None]
    # the kernel mass has the exact value 1 - exp(-Lambda(T)) (f = -d/dt of the
    # survival); rescale away the O(dt^2) trapezoid bias, which otherwise makes
    # the renewal equation slightly super-critical
    mass_exact = -math.expm1(-table.Lambda[-1])
    mass_trap = float(np.trapezoid(f.sum(axis=1), table.t))
    if mass_trap > 0:
        f *= mass_exact / mass_trap
    displacements = m_values - m0
    return table.t, displacements, f, table


def renewal_mean_position(config: RunConfig, t_max: float, ring: int = 128,
                          dt: float | None = None,
                          volterra_dt: float | None = None) -> RenewalCurve:
    """Mean clicked position vs time for a sparse lattice by solving the
    renewal equation in Fourier space over displacements.

    The kernel is propagated at the fine intensity step and downsampled to
    ``volterra_dt`` (default ~ 0.1/gamma) for the quadratic-cost time march.
    """
    tau, disp, f, table = renewal_kernel(config, t_max, dt=dt)
    if volterra_dt is None:
        volterra_dt = min(2e-3, 0.1 / config.lattice.gamma0) * 2.0
    stride = max(1, int(round(volterra_dt / (tau[1] - tau[0]))))
    tau = tau[::stride]
    f = f[::stride]
    # re-pin the downsampled kernel mass to the exact survival drop; a mass
    # above 1 would make the renewal march super-critical
    mass_exact = -math.expm1(-table.Lambda[-1])
    mass_strided = float(np.trapezoid(f.sum(axis=1), tau))
    if mass_strided > 0:
        f *= mass_exact / mass_strided
    dt_grid = tau[1] - tau[0]
    n_t = len(tau)
    # place kernels on a displacement ring large enough to avoid wrap
    q = 2.0 * math.pi * np.fft.fftfreq(ring)
    fq = np.zeros((n_t, ring), dtype=np.complex128)
    for j, d in enumerate(disp):
        fq += f[:, j][:, None] * np.exp(-1j * q[None, :] * d)
    hq = np.empty_like(fq)
    hq[0] = fq[0]
    for k in range(1, n_t):
        conv = (hq[1:k] * fq[k - 1:0:-1]).sum(axis=0) if k > 1 else 0.0
        rhs = fq[k] + dt_grid * conv + 0.5 * dt_grid * hq[0] * fq[k]
        hq[k] = rhs / (1.0 - 0.5 * dt_grid * fq[0])
    h = np.fft.ifft(hq, axis=1).real
    idx = np.fft.fftfreq(ring, d=1.0 / ring)  # signed ring displacements
    total = h.sum(axis=1)
    mean_disp = np.where(total > 0, (h @ idx) / np.where(total > 0, total, 1.0), 0.0)
    mass = float(np.trapezoid(f.sum(axis=1), tau))
    x0 = float(np.atleast_1d(np.asarray(config.initial_state.m))[0] * config.lattice.dx_spacing)
    return RenewalCurve(t=tau, mean_x=x0 + mean_disp * config.lattice.dx_spacing,
                        click_rate=total, kernel_mass=mass)
