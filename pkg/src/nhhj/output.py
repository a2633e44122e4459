"""Deterministic CSV/JSON writers.

Floats go to CSV with 17 significant digits, which round-trips IEEE doubles.
JSON uses Python's shortest round-tripping repr, fixed key order and a
trailing newline, so identical inputs give byte-identical files.
"""

import csv
import json
from pathlib import Path

import numpy as np

FLOAT_FMT = ".17g"


def fmt(x):
    return format(float(x), FLOAT_FMT)


def trajectory_header(user_names, m):
    return (
        ["t"]
        + list(user_names)
        + [f"p_{n}" for n in user_names]
        + ["E"]
        + [f"Psi{i + 1}" for i in range(m)]
        + [f"lambda{i + 1}" for i in range(m)]
    )


def write_trajectory_csv(path, user_names, times, q, p, energy, residuals, multipliers):
    """One row per sample; ``q`` and ``p`` must already be in user order."""
    residuals = np.asarray(residuals, dtype=float).reshape(len(times), -1)
    multipliers = np.asarray(multipliers, dtype=float).reshape(len(times), -1)
    header = trajectory_header(user_names, residuals.shape[1])
    block = np.column_stack([times, q, p, energy, residuals, multipliers])
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in block:
            w.writerow([fmt(x) for x in row])
    return path


def read_trajectory_csv(path):
    """Inverse of ``write_trajectory_csv``: ``(header, array)``."""
    with Path(path).open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # JSON has no inf/nan; keep them readable as strings
        return x if np.isfinite(x) else repr(x)
    return obj


def write_json(path, data):
    path = Path(path)
    text = json.dumps(to_jsonable(data), indent=2, ensure_ascii=False, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")
    return path
