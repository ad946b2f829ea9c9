"""Deterministic file output: CSV with comment headers, JSONL, manifests.

Every data file starts with a header naming the preset, the resolved
parameters and the code version (as '#' comments in CSV, as a leading
metadata record in JSONL).  Floats are written with shortest round-trip
representation, so a rerun with the same seed produces byte-identical files
regardless of worker count.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from . import __version__
from .errors import SchemaError

SCHEMA_VERSION = 1


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(float(v))
    if isinstance(v, (int,)):
        return str(v)
    return str(v)


def header_lines(preset: str, params: dict) -> list[str]:
    return [
        f"# preset: {preset}",
        f"# schema_version: {SCHEMA_VERSION}",
        f"# code_version: {__version__}",
        f"# params: {json.dumps(params, sort_keys=True, separators=(',', ':'), default=str)}",
    ]


def write_csv(path, columns, rows, preset: str = "custom", params: dict | None = None):
    path = Path(path)
    lines = header_lines(preset, params or {})
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_jsonl(path, records, preset: str = "custom", params: dict | None = None):
    """JSON-lines file whose first line is a metadata record."""
    path = Path(path)
    meta = {"_meta": {"preset": preset, "schema_version": SCHEMA_VERSION,
                      "code_version": __version__, "params": params or {}}}
    lines = [json.dumps(meta, sort_keys=True, separators=(",", ":"), default=str)]
    for rec in records:
        lines.append(json.dumps(rec, sort_keys=True, separators=(",", ":")))
    path.write_text("\n".join(lines) + "\n")
    return path


def trajectory_jsonl_records(records):
    for rec in records:
        yield {"seed": rec.seed,
               "events": [[t, m, n] for t, m, n in rec.events],
               "reason": rec.terminated_reason}


def trajectory_csv_rows(records, lattice):
    for i, rec in enumerate(records):
        for t, m, n in rec.events:
            if isinstance(m, tuple):
                xs = [mi * lattice.dx_spacing for mi in m]
                ks = ["" if n is None else ni * lattice.dp_spacing for ni in (n or ())]
                yield (i, t, *xs, *ks)
            else:
                yield (i, t, m * lattice.dx_spacing,
                       None if n is None else n * lattice.dp_spacing)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def write_manifest(outdir, preset: str, resolved: dict, master_seed: int, outputs):
    outdir = Path(outdir)
    manifest = {
        "preset": preset,
        "schema_version": SCHEMA_VERSION,
        "code_version": __version__,
        "master_seed": master_seed,
        "resolved_config": resolved,
        "outputs": {Path(p).name: sha256_file(p) for p in outputs},
    }
    path = outdir / "manifest.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2, default=str) + "\n")
    return path


def read_csv(path):
    """Parse a package CSV back into (meta, columns, rows-of-strings)."""
    meta = {}
    columns = None
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition(":")
            meta[key.strip()] = val.strip()
            continue
        if columns is None:
            columns = line.split(",")
            continue
        rows.append(line.split(","))
    if columns is None:
        raise SchemaError(f"{path}: no column header found")
    return meta, columns, rows
