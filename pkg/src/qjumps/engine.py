"""Stochastic trajectory generation (Monte-Carlo wavefunction unraveling).

Between clicks the state follows the renormalized non-hermitian evolution;
at each step one uniform draw decides jump-vs-no-jump and the jump target
simultaneously against the cumulative ladder of delta_p_a = gamma_a dt
|<a|psi>|^2 in row-major (m, then n) detector order.  A jump collapses the
state exactly onto the clicked meter state and re-centres the spatial window
there.

Reproducibility: trajectory i of a run draws from a counter-based Philox
stream keyed by (master_seed, i) and consumed in step order, so results are
bit-identical for a given (master_seed, trajectory_index) regardless of how
trajectories are scheduled across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import BoundaryBreach, DegenerateState, StepTooLarge
from .grid import (SpatialGrid, WaveFunction, angular_momentum_state, gaussian_state,
                   lattice_state, make_grid)
from .lattice import DetectorIndex, DetectorLattice
from .propagator import JumpModel, Potential, Propagator, _index_window

JUMP_BUDGET = 0.1          # target bound on total jump probability per step
RETRY_BUDGET = 0.3         # redo the step with smaller dt above this
FIRST_CLICK_WINDOW_PAD = 12.0


@dataclass(frozen=True)
class InitialState:
    """Initial wavefunction: a lattice detector state ('coherent-index'),
    a free Gaussian ('gaussian'), or the 2D circular trap state
    ('angular-momentum')."""

    kind: str = "coherent-index"
    m: tuple | int = 0
    n: tuple | int = 0
    x0: tuple | float = 0.0
    k0: tuple | float = 0.0
    width: float | None = None
    l_z: int = 25
    omega: float = 1.0

    def __post_init__(self):
        if self.kind not in ("coherent-index", "gaussian", "angular-momentum"):
            raise ValueError(f"unknown initial state kind {self.kind!r}")


@dataclass(frozen=True)
class RunConfig:
    """Everything one trajectory needs; a pure value object."""

    lattice: DetectorLattice
    potential: Potential = Potential("free")
    initial_state: InitialState = InitialState()
    t_max: float = 3.0
    dt_cap: float = 0.01
    first_click_mode: str = "assume-at-origin"
    master_seed: int = 2024
    model: str = "jump"
    grid_span: float | None = None
    grid_center: tuple | float | None = None
    grid_points: int | None = None
    dx_factor: float = 8.0
    stop_after_clicks: int | None = None
    dissipative_mode: str = "euler"
    recenter_on_jump: bool = True

    def __post_init__(self):
        if self.t_max <= 0:
            raise ValueError("t_max must be positive")
        if self.first_click_mode not in ("assume-at-origin", "husimi-sampled", "none"):
            raise ValueError(f"unknown first_click_mode {self.first_click_mode!r}")
        if self.model not in ("jump", "filtering"):
            raise ValueError(f"unknown model {self.model!r}")


@dataclass
class TrajectoryRecord:
    """Ordered click events of one trajectory.

    Each event is (t, m, n): position and momentum lattice indices (ints in
    1D, tuples in 2D); n is None for filtering records, which measure
    position only.
    """

    seed: int
    events: list
    terminated_reason: str

    def times(self) -> np.ndarray:
        return np.array([e[0] for e in self.events])


def trajectory_rng(master_seed: int, trajectory_index: int) -> np.random.Generator:
    key = (int(master_seed) << 64) + int(trajectory_index)
    return np.random.Generator(np.random.Philox(key=key))


def trajectory_seed(master_seed: int, trajectory_index: int) -> int:
    return (int(master_seed) << 64) + int(trajectory_index)


def _initial_speed(config: RunConfig) -> float:
    ini = config.initial_state
    if ini.kind == "coherent-index":
        kn = np.atleast_1d(np.asarray(ini.n, dtype=float)) * config.lattice.dp_spacing
        return float(np.max(np.abs(kn)))
    if ini.kind == "gaussian":
        return float(np.max(np.abs(np.atleast_1d(np.asarray(ini.k0, dtype=float)))))
    return math.sqrt(ini.l_z * ini.omega)  # orbital speed of the circular state


def _initial_position_center(config: RunConfig) -> float:
    ini = config.initial_state
    if ini.kind == "coherent-index":
        return float(np.atleast_1d(np.asarray(ini.m, dtype=float))[0] * config.lattice.dx_spacing)
    if ini.kind == "gaussian":
        return float(np.atleast_1d(np.asarray(ini.x0, dtype=float))[0])
    return 0.0


def _initial_direction(config: RunConfig) -> float:
    ini = config.initial_state
    if ini.kind == "coherent-index":
        k = float(np.atleast_1d(np.asarray(ini.n, dtype=float))[0]) * config.lattice.dp_spacing
    elif ini.kind == "gaussian":
        k = float(np.atleast_1d(np.asarray(ini.k0, dtype=float))[0])
    else:
        return 0.0
    return 0.0 if k == 0 else math.copysign(1.0, k)


def build_grid_for(config: RunConfig) -> SpatialGrid:
    """Window sized for the configured run: 16 sigma minimum, plus the free
    flight |v| t_max when the potential is not confining."""
    lat = config.lattice
    dim = 2 if (config.potential.kind == "harmonic2d"
                or config.initial_state.kind == "angular-momentum"
                or lat.dim == 2) else 1
    if config.grid_points is not None:
        center = config.grid_center if config.grid_center is not None else 0.0
        return SpatialGrid(dim=dim, points=config.grid_points, dx=lat.sigma / config.dx_factor,
                           origin=(center,) * dim if np.isscalar(center) else tuple(center))
    v = _initial_speed(config)
    if config.potential.kind in ("harmonic1d", "harmonic2d"):
        amp = abs(_initial_position_center(config)) + v / max(config.potential.omega, 1e-9)
        if config.initial_state.kind == "angular-momentum":
            amp = math.sqrt(config.initial_state.l_z / max(config.initial_state.omega, 1e-9)) + 4.0
        span = 2.0 * amp + 16.0 * lat.sigma
        center = 0.0
    else:
        # cover the classical flight plus the dispersive spread of long
        # no-click stretches: conditional survivor states delocalize well
        # beyond the coherent width and must not touch the boundary guard
        travel = v * config.t_max
        sig2 = lat.sigma**2
        sig_disp = math.sqrt(sig2 * (1.0 + (config.t_max / (2.0 * sig2)) ** 2))
        span = travel + 24.0 * lat.sigma + 8.0 * sig_disp
        center = _initial_position_center(config) + 0.5 * travel * _initial_direction(config)
    if config.grid_span is not None:
        span = max(span, config.grid_span)
    if config.grid_center is not None:
        center = config.grid_center
    return make_grid(dim, lat.sigma, span=span,
                     center=center if np.isscalar(center) else tuple(center),
                     dx_factor=config.dx_factor)


def build_initial_state(config: RunConfig, grid: SpatialGrid) -> WaveFunction:
    ini = config.initial_state
    lat = config.lattice
    if ini.kind == "coherent-index":
        return lattice_state(grid, DetectorIndex.make(ini.m, ini.n), lat)
    if ini.kind == "gaussian":
        width = ini.width if ini.width is not None else lat.sigma
        return gaussian_state(grid, ini.x0, ini.k0, width)
    return angular_momentum_state(grid, ini.l_z, ini.omega)


def sample_first_click(psi0: WaveFunction, lattice: DetectorLattice,
                       rng: np.random.Generator) -> DetectorIndex:
    """Draw a detector from the lattice-discretized Husimi distribution
    |<alpha_i|psi0>|^2 of the initial state.

    Detectors outside a 12-sigma window around the state carry weight
    < 1e-24 each and are excluded.
    """
    xm, xs = psi0.position_moments()
    km, ks = psi0.momentum_moments()
    sig = lattice.sigma
    wx = FIRST_CLICK_WINDOW_PAD * sig + 5.0 * float(xs.max())
    wk = FIRST_CLICK_WINDOW_PAD * (0.5 / sig) + 5.0 * float(ks.max())
    if lattice.dim == 1:
        mv = _index_window(float(xm[0]), wx, lattice.dx_spacing, *lattice.m_range)
        nv = _index_window(float(km[0]), wk, lattice.dp_spacing, *lattice.n_range)
    else:
        mlo = min(_index_window(float(c), wx, lattice.dx_spacing, *lattice.m_range)[0] for c in xm)
        mhi = max(_index_window(float(c), wx, lattice.dx_spacing, *lattice.m_range)[-1] for c in xm)
        nlo = min(_index_window(float(c), wk, lattice.dp_spacing, *lattice.n_range)[0] for c in km)
        nhi = max(_index_window(float(c), wk, lattice.dp_spacing, *lattice.n_range)[-1] for c in km)
        mv, nv = np.arange(mlo, mhi + 1), np.arange(nlo, nhi + 1)
    model = JumpModel(lattice, fixed_window=(mv, nv))
    model.build_window(psi0)
    o = np.asarray(model.window.overlaps(psi0.psi)).reshape(-1)
    w = np.abs(o) ** 2
    if w.max() < 1e-24:
        raise DegenerateState("initial state has no overlap with any lattice detector")
    cum = np.cumsum(w)
    u = rng.random() * cum[-1]
    flat = int(np.searchsorted(cum, u, side="right"))
    return model.window.collapse_index(min(flat, w.size - 1))


@dataclass
class StepOutcome:
    jumped: bool
    index: object
    total_rate: float
    dt: float
    t_event: float | None = None


def mcwf_step(prop: Propagator, dt: float, rng: np.random.Generator,
              t_now: float = 0.0) -> StepOutcome:
    """One stochastic step: evolve, then keep the renormalized no-jump state
    or collapse onto a sampled detector.  Mutates ``prop``."""
    saved = prop.psi.psi
    grid = prop.psi.grid
    attempts = 0
    while True:
        prop.psi.psi = saved.copy()
        measurement, loss = prop.step(dt, renormalize=False)
        flat_rates = measurement.flat_rates()
        total = float(flat_rates.sum())
        dp = total * dt
        if dp > 1.0:
            raise StepTooLarge(f"total jump probability {dp:.2f} > 1; dt_cap too large")
        if dp <= RETRY_BUDGET or attempts >= 4:
            break
        dt = max(dt * JUMP_BUDGET / dp, dt * 0.1)
        attempts += 1
    u = rng.random()
    if u < dp:
        ladder = np.cumsum(flat_rates) * dt
        flat = int(np.searchsorted(ladder, u, side="right"))
        flat = min(flat, flat_rates.size - 1)
        t_event = t_now + rng.random() * dt  # uniform within the step at O(rate*dt)
        psi_new, idx = prop.model.collapse(measurement, flat, grid, prop.psi.psi)
        prop.rebuild(psi_new)
        return StepOutcome(True, idx, total, dt, t_event)
    prop.psi.psi /= math.sqrt(1.0 - loss)
    return StepOutcome(False, None, total, dt)


def _make_model(config: RunConfig):
    if config.model == "jump":
        return JumpModel(config.lattice, config.dissipative_mode,
                         recenter=config.recenter_on_jump,
                         forward_bias=(config.potential.kind == "free"))
    from .filtering import FilterBank, FilterModel
    return FilterModel(FilterBank.from_lattice(config.lattice),
                       recenter=config.recenter_on_jump)


def _seed_first_click(config: RunConfig, grid: SpatialGrid, psi: WaveFunction, model, rng):
    """Collapse at t=0 per first_click_mode; returns (grid, psi, event|None)."""
    if config.first_click_mode == "none":
        return grid, psi, None
    if config.model == "filtering":
        from .filtering import sample_first_filter
        psi, m0 = sample_first_filter(psi, model.bank, rng, recenter=model.recenter)
        return grid, psi, (0.0, m0, None)
    if config.first_click_mode == "husimi-sampled":
        idx0 = sample_first_click(psi, config.lattice, rng)
    else:
        if config.initial_state.kind != "coherent-index":
            raise ValueError("assume-at-origin needs a coherent-index initial state")
        idx0 = DetectorIndex.make(config.initial_state.m, config.initial_state.n)
    if config.recenter_on_jump:
        from .propagator import recenter_origin
        grid = grid.recentered(recenter_origin(grid, idx0, config.lattice,
                                               config.potential.kind == "free"))
    psi = lattice_state(grid, idx0, config.lattice)
    return grid, psi, _event(0.0, idx0)


def _run_core(config: RunConfig, trajectory_index: int, capture_final: bool = False):
    rng = trajectory_rng(config.master_seed, trajectory_index)
    grid = build_grid_for(config)
    psi = build_initial_state(config, grid)
    model = _make_model(config)
    events = []
    grid, psi, ev0 = _seed_first_click(config, grid, psi, model, rng)
    if ev0 is not None:
        events.append(ev0)
    prop = Propagator(psi, model, config.potential, max_norm_loss=0.9)
    t = 0.0
    rate_est = model.rate_estimate()
    reason = "reached-t_max"
    while t < config.t_max:
        # quantize dt to 3 significant digits so the propagator's phase-factor
        # cache stays hot while rate_est jitters
        dt = min(config.dt_cap, JUMP_BUDGET / max(rate_est, 1e-12))
        dt = float(f"{dt:.3g}")
        dt = min(dt, config.t_max - t)
        try:
            out = mcwf_step(prop, dt, rng, t_now=t)
        except BoundaryBreach:
            reason = "boundary-breach"
            break
        t += out.dt
        rate_est = max(out.total_rate, 1e-12)
        if out.jumped:
            events.append(_event(out.t_event, out.index))
            if (config.stop_after_clicks is not None
                    and _n_clicks(events, config) >= config.stop_after_clicks):
                reason = "click-limit"
                break
    record = TrajectoryRecord(seed=trajectory_seed(config.master_seed, trajectory_index),
                              events=events, terminated_reason=reason)
    return (record, prop.psi) if capture_final else (record, None)


def run_trajectory(config: RunConfig, trajectory_index: int) -> TrajectoryRecord:
    """Deterministic function of (config, trajectory_index)."""
    return _run_core(config, trajectory_index)[0]


def _event(t: float, idx) -> tuple:
    if isinstance(idx, DetectorIndex):
        m = idx.m[0] if idx.dim == 1 else idx.m
        n = idx.n[0] if idx.dim == 1 else idx.n
        return (t, m, n)
    return (t, idx, None)


def _n_clicks(events, config) -> int:
    # the t=0 seeding click does not count against the click budget
    return len(events) - (1 if config.first_click_mode != "none" else 0)


def _run_one(args) -> TrajectoryRecord:
    config, idx = args
    return run_trajectory(config, idx)


def limit_blas_threads():
    """Per-worker BLAS runs single-threaded; parallelism lives at the
    trajectory level."""
    try:
        import threadpoolctl
        threadpoolctl.threadpool_limits(1)
    except ImportError:
        pass


def run_ensemble(config: RunConfig, n_traj: int, workers: int = 1) -> list[TrajectoryRecord]:
    """Trajectories 0..n_traj-1; the result is independent of ``workers``."""
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    tasks = [(config, i) for i in range(n_traj)]
    if workers <= 1:
        return [_run_one(t) for t in tasks]
    chunk = max(1, n_traj // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers, initializer=limit_blas_threads) as pool:
        return list(pool.map(_run_one, tasks, chunksize=chunk))


def _state_at(args) -> np.ndarray:
    config, idx = args
    record, psi = _run_core(config, idx, capture_final=True)
    if record.terminated_reason == "boundary-breach":
        raise BoundaryBreach("trajectory breached the window during state capture")
    return psi.psi


def ensemble_state_average(config: RunConfig, n_traj: int, t: float,
                           workers: int = 1) -> np.ndarray:
    """Ensemble average of |psi(t)><psi(t)| over n_traj trajectories,
    accumulated in trajectory order (worker-count independent).

    1D only, and the window must not re-centre (set recenter_on_jump=False)
    so that all states share one grid.
    """
    if config.recenter_on_jump:
        raise ValueError("state averaging needs recenter_on_jump=False")
    config = replace(config, t_max=t, stop_after_clicks=None)
    tasks = [(config, i) for i in range(n_traj)]
    if workers <= 1:
        states = [_state_at(a) for a in tasks]
    else:
        chunk = max(1, n_traj // (workers * 8))
        with ProcessPoolExecutor(max_workers=workers, initializer=limit_blas_threads) as pool:
            states = list(pool.map(_state_at, tasks, chunksize=chunk))
    n = states[0].size
    rho = np.zeros((n, n), dtype=np.complex128)
    for s in states:
        rho += np.outer(s, s.conj())
    return rho / n_traj
