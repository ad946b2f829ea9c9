"""Ensemble statistics of trajectory records.

Clicked observables (position x_m, momentum k_n, or inferred velocity for
filtering records) are pooled across the ensemble and grouped into time bins;
dispersion is the sample standard deviation of the clicked values within a
bin across the ensemble.  Bins nobody clicked in are flagged, never dropped;
downstream fits skip them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sstats

from .errors import BadFit
from .lattice import DetectorLattice

DEFAULT_BIN_WIDTH = 0.02


@dataclass
class BinnedSeries:
    """Per-bin count / mean / variance / stderr for one clicked observable."""

    bin_edges: np.ndarray
    count: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    observable: str

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)

    @property
    def stderr(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.count > 0, np.sqrt(self.variance / np.maximum(self.count, 1)),
                            np.nan)

    @property
    def empty(self) -> np.ndarray:
        return self.count == 0


def _clicked_values(records, observable: str, lattice: DetectorLattice,
                    min_interval: float = 0.0):
    """(t, value) pairs pooled over the ensemble.

    For filtering records (no momentum index) the momentum observable is the
    inferred finite-difference velocity.  ``min_interval`` sets the shortest
    baseline used for the difference: the reference click is the latest one
    at least that far in the past (the t=0 position anchors the first
    estimates).  A zero baseline reproduces strict consecutive differences,
    whose noise variance ~ (spacing^2 / dt^2) diverges for close click pairs
    on a dense grid.
    """
    ts, vals = [], []
    for rec in records:
        events = rec.events
        if not events:
            continue
        if observable == "x":
            for t, m, _n in events:
                ts.append(t)
                vals.append((m[0] if isinstance(m, tuple) else m) * lattice.dx_spacing)
        elif observable == "k":
            if events[0][2] is None:  # filtering record: infer velocity
                pts = [(t, (m if not isinstance(m, tuple) else m[0]) * lattice.dx_spacing)
                       for t, m, _ in events]
                if pts and pts[0][0] == 0.0:
                    anchor_t, anchor_x = pts[0]
                    pts = pts[1:]
                else:
                    anchor_t, anchor_x = 0.0, 0.0
                past_t, past_x = [anchor_t], [anchor_x]
                for t, x in pts:
                    ref = None
                    for tt, xx in zip(reversed(past_t), reversed(past_x)):
                        if t - tt >= max(min_interval, 1e-9):
                            ref = (tt, xx)
                            break
                    if ref is None:
                        ref = (past_t[0], past_x[0])
                    if t - ref[0] >= 1e-9:
                        ts.append(t)
                        vals.append((x - ref[1]) / (t - ref[0]))
                    past_t.append(t)
                    past_x.append(x)
            else:
                for t, _m, n in events:
                    ts.append(t)
                    vals.append((n[0] if isinstance(n, tuple) else n) * lattice.dp_spacing)
        else:
            raise ValueError(f"unknown observable {observable!r}")
    return np.asarray(ts, dtype=float), np.asarray(vals, dtype=float)


def bin_observable(records, observable: str, lattice: DetectorLattice,
                   t_max: float, bin_width: float = DEFAULT_BIN_WIDTH,
                   min_interval: float = 0.0) -> BinnedSeries:
    """Sample mean/variance per time bin of the clicked observable."""
    if not records:
        raise ValueError("empty ensemble")
    ts, vals = _clicked_values(records, observable, lattice, min_interval)
    n_bins = int(math.ceil(t_max / bin_width))
    edges = np.arange(n_bins + 1) * bin_width
    idx = np.clip(np.floor(ts / bin_width).astype(int), 0, n_bins - 1)
    sel = ts <= t_max
    idx, vals = idx[sel], vals[sel]
    count = np.bincount(idx, minlength=n_bins).astype(int)
    s1 = np.bincount(idx, weights=vals, minlength=n_bins)
    s2 = np.bincount(idx, weights=vals**2, minlength=n_bins)
    with np.errstate(divide="ignore", invalid="ignore"):
        mean = np.where(count > 0, s1 / np.maximum(count, 1), np.nan)
        var = np.where(count > 1,
                       (s2 - s1**2 / np.maximum(count, 1)) / np.maximum(count - 1, 1),
                       np.nan)
    var = np.where(count > 1, np.maximum(var, 0.0), var)
    return BinnedSeries(bin_edges=edges, count=count, mean=mean, variance=var,
                        observable=observable)


def fit_power_law(series: BinnedSeries, t_range: tuple, value: str = "std",
                  min_count: int = 10):
    """Least-squares log-log fit value ~ amplitude * t^exponent over t_range.

    Returns (exponent, amplitude, r_squared); BadFit when r^2 < 0.9.
    """
    t = series.centers
    y = series.std if value == "std" else series.mean
    sel = ((t >= t_range[0]) & (t <= t_range[1]) & (series.count >= min_count)
           & np.isfinite(y) & (y > 0))
    if sel.sum() < 3:
        raise BadFit("fewer than 3 usable bins in the fit window")
    lt, ly = np.log(t[sel]), np.log(y[sel])
    slope, intercept = np.polyfit(lt, ly, 1)
    pred = slope * lt + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    if r2 < 0.9:
        raise BadFit(f"r^2 = {r2:.3f} < 0.9")
    return float(slope), float(math.exp(intercept)), r2


def first_click_times(records):
    """Time (and event) of the first click after t=0 per trajectory; the
    seeding click at t=0 is not counted."""
    out = []
    for rec in records:
        for ev in rec.events:
            if ev[0] > 0.0:
                out.append(ev)
                break
    return out


def interarrival_histogram(records, t_max: float, bin_width: float = DEFAULT_BIN_WIDTH,
                           per_detector: bool = False):
    """Histogram counts of first-click times, optionally split by the clicked
    detector's position index.  Counts are integers, so per-detector rows sum
    exactly to the total row."""
    events = first_click_times(records)
    n_bins = int(math.ceil(t_max / bin_width))
    edges = np.arange(n_bins + 1) * bin_width
    ts = np.array([e[0] for e in events])
    sel = ts <= t_max
    total, _ = np.histogram(ts[sel], bins=edges)
    result = {"total": total.astype(int)}
    if per_detector:
        ms = np.array([(e[1] if not isinstance(e[1], tuple) else e[1][0]) for e in events])
        for m in np.unique(ms[sel]):
            cnt, _ = np.histogram(ts[sel][ms[sel] == m], bins=edges)
            result[int(m)] = cnt.astype(int)
    return edges, result


def momentum_normality(records, lattice: DetectorLattice, t_max: float,
                       bin_width: float = DEFAULT_BIN_WIDTH, probe_times=None,
                       min_count: int = 50, min_interval: float = 0.0):
    """D'Agostino normality p-values of the clicked momenta at probe bins."""
    ts, ks = _clicked_values(records, "k", lattice, min_interval)
    if probe_times is None:
        probe_times = np.linspace(0.3 * t_max, 0.95 * t_max, 10)
    out = []
    for tp in probe_times:
        sel = np.abs(ts - tp) <= bin_width / 2
        if sel.sum() >= min_count:
            out.append((float(tp), float(sstats.normaltest(ks[sel]).pvalue), int(sel.sum())))
    return out


def pooled_click_slope(records, lattice: DetectorLattice):
    """OLS slope of pooled (t, x) click pairs; the ensemble-mean velocity."""
    ts, xs = _clicked_values(records, "x", lattice)
    if len(ts) < 2:
        raise BadFit("not enough clicks for a slope")
    a, _b = np.polyfit(ts, xs, 1)
    return float(a)


def mean_position_curve(records, lattice: DetectorLattice, t_max: float,
                        bin_width: float):
    series = bin_observable(records, "x", lattice, t_max, bin_width)
    return series.centers, series.mean, series.count


def spectral_peak(t_centers: np.ndarray, mean_x: np.ndarray):
    """Dominant angular frequency of a (possibly gappy) binned mean curve.

    Gaps are filled by linear interpolation before the FFT; returns
    (omega_peak, omega_resolution).
    """
    good = np.isfinite(mean_x)
    x = np.interp(t_centers, t_centers[good], mean_x[good])
    x = x - x.mean()
    spec = np.abs(np.fft.rfft(x))
    freqs = np.fft.rfftfreq(len(x), d=t_centers[1] - t_centers[0])
    peak = int(np.argmax(spec[1:])) + 1
    return 2.0 * math.pi * float(freqs[peak]), 2.0 * math.pi * float(freqs[1])


def angular_advance(records, lattice: DetectorLattice):
    """Wrapped angular increments between consecutive click positions of 2D
    records, pooled over the ensemble."""
    adv = []
    for rec in records:
        angles = []
        for t, m, _n in rec.events:
            x = m[0] * lattice.dx_spacing
            y = m[1] * lattice.dx_spacing
            if x == 0 and y == 0:
                continue
            angles.append(math.atan2(y, x))
        for a, b in zip(angles[:-1], angles[1:]):
            d = (b - a + math.pi) % (2.0 * math.pi) - math.pi
            adv.append(d)
    return np.asarray(adv)


def momentum_change_fraction(records) -> float:
    """Fraction of clicks whose momentum row differs from the previous click."""
    changed = 0
    total = 0
    for rec in records:
        prev = None
        for _t, _m, n in rec.events:
            if prev is not None:
                total += 1
                if n != prev:
                    changed += 1
            prev = n
    if total == 0:
        raise ValueError("no consecutive click pairs")
    return changed / total
