"""JSON and CSV emission for reports and fields."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np


def json_ready(obj):
    """Convert numpy scalars/arrays to plain Python; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_ready(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return json_ready(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, shortest round-trip floats."""
    return json.dumps(json_ready(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path: str | Path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def write_field_csv(path: str | Path, u: np.ndarray) -> Path:
    """One value per line in row-major order."""
    path = Path(path)
    np.savetxt(path, np.asarray(u, dtype=float).ravel(order="C"), fmt="%.17g")
    return path


def read_field_csv(path: str | Path, grid=None) -> np.ndarray:
    vals = np.loadtxt(path, dtype=float, ndmin=1)
    return vals if grid is None else grid.check_field(vals)


def write_fiber_csv(path: str | Path, rows: np.ndarray) -> Path:
    path = Path(path)
    np.savetxt(path, rows, fmt="%.17g", delimiter=",", header="t,q_n,q_e,J", comments="")
    return path
