"""JSON run-configuration parsing with schema checks.

The documented file layout (all keys optional unless noted):

    {
      "lattice": {"dx_spacing": 5.0, "dp_spacing": 5.0, "gamma0": 1.0,
                   "sigma": 0.707..., "k_cut": null, "dim": 1,
                   "extents": {"m": [-10, 10], "n": [-5, 5]}},   # required
      "potential": {"kind": "free", "omega": 0.0},
      "initial_state": {"kind": "coherent-index", "m": 0, "n": 1}
                     | {"kind": "gaussian", "x0": 0, "k0": 5, "width": null}
                     | {"kind": "angular-momentum", "l_z": 25, "omega": 1.0},
      "t_max": 3.0, "dt_cap": 0.01,
      "first_click_mode": "assume-at-origin" | "husimi-sampled" | "none",
      "master_seed": 2024, "model": "jump" | "filtering",
      "n_traj": 100,
      "grid": {"span": null, "center": null, "points": null, "dx_factor": 8.0},
      "stop_after_clicks": null
    }
"""

from __future__ import annotations

import json
from pathlib import Path

from .engine import InitialState, RunConfig
from .errors import SchemaError
from .lattice import DEFAULT_SIGMA, DetectorLattice
from .propagator import Potential


def _get(d: dict, key: str, default=None, required=False, path=""):
    if key not in d:
        if required:
            raise SchemaError(f"missing required key {path}{key}")
        return default
    return d[key]


def lattice_from_dict(d: dict) -> DetectorLattice:
    ext = _get(d, "extents", {}, path="lattice.")
    try:
        return DetectorLattice(
            dx_spacing=float(_get(d, "dx_spacing", required=True, path="lattice.")),
            dp_spacing=float(_get(d, "dp_spacing", required=True, path="lattice.")),
            gamma0=float(_get(d, "gamma0", required=True, path="lattice.")),
            dim=int(_get(d, "dim", 1)),
            m_range=tuple(_get(ext, "m", (-1000, 1000))),
            n_range=tuple(_get(ext, "n", (-1000, 1000))),
            k_cut=(None if _get(d, "k_cut") is None else float(d["k_cut"])),
            sigma=float(_get(d, "sigma", DEFAULT_SIGMA)),
        )
    except ValueError as exc:
        raise SchemaError(f"lattice: {exc}") from exc


def run_config_from_dict(d: dict) -> tuple[RunConfig, int]:
    """Build a RunConfig plus the ensemble size n_traj."""
    if "lattice" not in d:
        raise SchemaError("missing required key lattice")
    lattice = lattice_from_dict(d["lattice"])
    pot_d = _get(d, "potential", {"kind": "free"})
    ini_d = dict(_get(d, "initial_state", {"kind": "coherent-index", "m": 0, "n": 0}))
    kind = ini_d.pop("kind", "coherent-index")
    grid_d = _get(d, "grid", {})
    try:
        potential = Potential(kind=pot_d.get("kind", "free"),
                              omega=float(pot_d.get("omega", 0.0)))
        ini_kwargs = {}
        for key in ("m", "n", "x0", "k0", "width", "l_z", "omega"):
            if key in ini_d:
                val = ini_d.pop(key)
                ini_kwargs[key] = tuple(val) if isinstance(val, list) else val
        if ini_d:
            raise SchemaError(f"initial_state: unknown keys {sorted(ini_d)}")
        initial = InitialState(kind=kind, **ini_kwargs)
        config = RunConfig(
            lattice=lattice,
            potential=potential,
            initial_state=initial,
            t_max=float(_get(d, "t_max", 3.0)),
            dt_cap=float(_get(d, "dt_cap", 0.01)),
            first_click_mode=_get(d, "first_click_mode", "assume-at-origin"),
            master_seed=int(_get(d, "master_seed", 2024)),
            model=_get(d, "model", "jump"),
            grid_span=(None if _get(grid_d, "span") is None else float(grid_d["span"])),
            grid_center=_get(grid_d, "center"),
            grid_points=(None if _get(grid_d, "points") is None else int(grid_d["points"])),
            dx_factor=float(_get(grid_d, "dx_factor", 8.0)),
            stop_after_clicks=_get(d, "stop_after_clicks"),
            recenter_on_jump=bool(_get(d, "recenter_on_jump", True)),
        )
    except SchemaError:
        raise
    except (TypeError, ValueError) as exc:
        raise SchemaError(str(exc)) from exc
    return config, int(_get(d, "n_traj", 1))


def load_config(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc


def apply_overrides(d: dict, overrides) -> dict:
    """--override a.b.c=VALUE with JSON-parsed values; returns a deep copy."""
    out = json.loads(json.dumps(d))
    for item in overrides or []:
        key, sep, raw = item.partition("=")
        if not sep:
            raise SchemaError(f"override {item!r} is not KEY=VALUE")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = out
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise SchemaError(f"override path {key!r} crosses a non-object")
        node[parts[-1]] = value
    return out
