"""Deterministic CSV and JSON emission.

CSV files start with a header row followed by a ``# units:`` comment line.
Floats use ``%.12g`` so the same numbers always produce the same bytes.
"""
from __future__ import annotations

import json
import math

import numpy as np


def format_value(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return "%.12g" % v
    return str(v)


def csv_text(header, rows, units):
    if len(units) != len(header):
        raise ValueError("units must match header")
    lines = [",".join(header), "# units: " + ",".join(units)]
    lines += [",".join(format_value(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def write_csv(path, header, rows, units):
    """Render rows as CSV; write to ``path`` when given.  Returns the text."""
    text = csv_text(header, rows, units)
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def read_csv(path):
    """Parse a CSV written by :func:`write_csv` into ``(header, rows)``."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:] if not ln.startswith("#")]
    return header, rows


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isfinite(v):
            return float(format_value(v))
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return obj


def json_text(obj):
    """Canonical JSON: sorted keys, 12 significant digits, non-finite as strings."""
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj):
    text = json_text(obj)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
