"""CSV and JSON output with lossless floats and provenance headers.

CSV files start with ``#``-comment lines carrying the tool version and the
configuration hash.  Floats are written with 17 significant digits, which
round-trips every IEEE double exactly.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import __version__
from .groundstate import ProfileKind, RadialProfile, profile_from_samples
from .ode import ProblemParams, Regime


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if x is None:
        return ""
    return str(x)


def _parse(s: str):
    if s == "":
        return None
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def provenance(config_hash: Optional[str]) -> dict:
    return {"version": __version__, "config_hash": config_hash}


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], *, config_hash: Optional[str] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# version={__version__}\n# config_hash={config_hash}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])
    return path


def read_csv(path):
    """Return ``(meta, header, rows)`` with numbers parsed back to int/float."""
    meta, lines = {}, []
    with Path(path).open() as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key] = value
            else:
                lines.append(line)
    reader = csv.reader(lines)
    header = next(reader)
    rows = [[_parse(x) for x in row] for row in reader]
    return meta, header, rows


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if hasattr(obj, "value") and hasattr(obj, "name"):  # enums
        return obj.value
    return obj


def write_json(path, payload: dict, *, config_hash: Optional[str] = None) -> Path:
    """JSON with sorted keys; Python's float repr is already the shortest exact form."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {**provenance(config_hash), **_jsonable(payload)}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


PROFILE_COLUMNS = ("t", "u", "du", "ddu")


def save_profile(profile: RadialProfile, stem, *, config_hash: Optional[str] = None):
    """Write ``stem.csv`` (samples) and ``stem.json`` (parameters and metadata)."""
    stem = Path(stem)
    if profile.params.epsilon != 0:
        raise ValueError("only unperturbed profiles are serialized")
    csv_path = write_csv(stem.with_suffix(".csv"), PROFILE_COLUMNS,
                         zip(profile.grid, profile.u, profile.du, profile.ddu), config_hash=config_hash)
    meta = {
        "params": profile.params.as_dict(),
        "amplitude": profile.amplitude,
        "h": profile.h,
        "kind": profile.kind.value,
        "radius": profile.radius,
        "fitted_decay": profile.fitted_decay,
    }
    json_path = write_json(stem.with_suffix(".json"), meta, config_hash=config_hash)
    return csv_path, json_path


def load_profile(stem) -> RadialProfile:
    stem = Path(stem)
    meta = read_json(stem.with_suffix(".json"))
    _, header, rows = read_csv(stem.with_suffix(".csv"))
    data = np.array(rows, dtype=float)
    col = {name: data[:, header.index(name)] for name in PROFILE_COLUMNS}
    pd = meta["params"]
    params = ProblemParams(int(pd["N"]), float(pd["p"]), float(pd["lambda"]), float(pd["epsilon"]),
                           Regime(pd["regime"]))
    return profile_from_samples(params, col["t"], col["u"], col["du"], amplitude=meta["amplitude"],
                                h=meta["h"], kind=ProfileKind(meta["kind"]), radius=meta["radius"],
                                fitted_decay=meta["fitted_decay"])
