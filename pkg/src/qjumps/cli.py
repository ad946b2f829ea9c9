"""Command-line interface.

Subcommands:

    scenario       run a named preset or a scenario config file
    trajectory     one stochastic trajectory from a run config
    ensemble       many trajectories from a run config
    renewal        deterministic intensity table / first-click density / T_esc
    two-detector   closed-form vs numeric two-meter rates
    lindblad-check density-matrix oracle vs trajectory-ensemble average

Common flags: --config PATH, --preset NAME, --seed U64, --workers N,
--out DIR, --override KEY=VALUE (repeatable, dotted keys, JSON values).
Reruns with the same configuration and seed produce byte-identical files for
any worker count.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from . import io as qio
from .config import apply_overrides, load_config, run_config_from_dict
from .engine import limit_blas_threads, run_trajectory
from .errors import QjumpsError
from .presets import preset_names, resolve, run_scenario
from .renewal import compute_intensities, escape_time, first_click_density


def _common(parser, config_required=False):
    parser.add_argument("--config", help="JSON run-configuration file",
                        required=config_required)
    parser.add_argument("--seed", type=int, default=None, help="master seed override")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--override", action="append", default=[],
                        metavar="KEY=VALUE", help="dotted-key config override")


def build_parser():
    p = argparse.ArgumentParser(prog="qjumps", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    sc = sub.add_parser("scenario", help="run a preset scenario")
    sc.add_argument("--preset", choices=preset_names(), default=None)
    _common(sc)

    tr = sub.add_parser("trajectory", help="run a single trajectory")
    _common(tr, config_required=True)
    tr.add_argument("--index", type=int, default=0, help="trajectory index")

    en = sub.add_parser("ensemble", help="run an ensemble of trajectories")
    _common(en, config_required=True)
    en.add_argument("--n-traj", type=int, default=None, help="override n_traj")

    rn = sub.add_parser("renewal", help="deterministic renewal analysis")
    _common(rn, config_required=True)
    rn.add_argument("--t-max", type=float, default=None)

    td = sub.add_parser("two-detector", help="two-meter closed forms vs numerics")
    _common(td)
    td.add_argument("--gamma", type=float, default=None)
    td.add_argument("--spacing", type=float, default=None)

    lc = sub.add_parser("lindblad-check", help="density-matrix oracle comparison")
    _common(lc)

    return p


def _scenario_like(args, preset_name):
    base = None
    if args.config:
        base = load_config(args.config)
    resolved = resolve(preset_name if base is None else None, base, args.override, args.seed)
    files = run_scenario(resolved, args.out, workers=args.workers,
                         preset=preset_name or "custom")
    for f in files:
        print(f)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    limit_blas_threads()
    try:
        if args.command == "scenario":
            if args.preset is None and args.config is None:
                raise QjumpsError("scenario needs --preset or --config")
            base = load_config(args.config) if args.config else None
            resolved = resolve(args.preset, base, args.override, args.seed)
            for f in run_scenario(resolved, args.out, workers=args.workers,
                                  preset=args.preset or "custom"):
                print(f)
        elif args.command == "trajectory":
            d = apply_overrides(load_config(args.config), args.override)
            if args.seed is not None:
                d["master_seed"] = args.seed
            config, _ = run_config_from_dict(d)
            rec = run_trajectory(config, args.index)
            from pathlib import Path
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            print(qio.write_jsonl(out / "trajectory.jsonl",
                                  qio.trajectory_jsonl_records([rec]), "trajectory", d))
            cols = (["trajectory", "t", "x_m", "y_m", "kx_n", "ky_n"]
                    if config.lattice.dim == 2 else ["trajectory", "t", "x_m", "k_n"])
            print(qio.write_csv(out / "trajectory.csv", cols,
                                qio.trajectory_csv_rows([rec], config.lattice),
                                "trajectory", d))
        elif args.command == "ensemble":
            d = apply_overrides(load_config(args.config), args.override)
            if args.seed is not None:
                d["master_seed"] = args.seed
            if args.n_traj is not None:
                d["n_traj"] = args.n_traj
            d.setdefault("pipeline", "ensemble")
            for f in run_scenario(d, args.out, workers=args.workers, preset="custom"):
                print(f)
        elif args.command == "renewal":
            d = apply_overrides(load_config(args.config), args.override)
            if args.seed is not None:
                d["master_seed"] = args.seed
            config, _ = run_config_from_dict(d)
            t_max = args.t_max if args.t_max is not None else config.t_max
            table = compute_intensities(config, t_max)
            f, escaped = first_click_density(table)
            from pathlib import Path
            import json as _json
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            lam_cols = [f"lambda_{lab.m[0]}_{lab.n[0]}" for lab in table.labels]
            rows = ([t, *lam, lt, L] for t, lam, lt, L in
                    zip(table.t, table.lam, table.lam_total, table.Lambda))
            print(qio.write_csv(out / "intensities.csv",
                                ["t", *lam_cols, "lambda_total", "Lambda"], rows,
                                "renewal", d))
            print(qio.write_csv(out / "f_t1.csv", ["t", "f_t1"], zip(table.t, f),
                                "renewal", dict(d, escaped_mass=escaped)))
            report = {"escaped_mass": escaped, "Lambda_T": float(table.Lambda[-1])}
            try:
                report["T_esc"] = escape_time(table)
            except QjumpsError as exc:
                report["T_esc_error"] = str(exc)
            (out / "renewal.json").write_text(
                _json.dumps(report, sort_keys=True, indent=2) + "\n")
            print(out / "renewal.json")
        elif args.command == "two-detector":
            overrides = list(args.override)
            if args.gamma is not None:
                overrides.append(f"gamma={args.gamma}")
            if args.spacing is not None:
                overrides.append(f"spacing={args.spacing}")
            resolved = resolve("two-detector", None, overrides, args.seed)
            for f in run_scenario(resolved, args.out, workers=args.workers,
                                  preset="two-detector"):
                print(f)
        elif args.command == "lindblad-check":
            resolved = resolve("lindblad-check", None, args.override, args.seed)
            for f in run_scenario(resolved, args.out, workers=args.workers,
                                  preset="lindblad-check"):
                print(f)
    except QjumpsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
