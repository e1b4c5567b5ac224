"""Deterministic JSON and plot-data output.

Floats are written with 17 significant digits and keys are sorted, so equal
inputs give byte-identical files.
"""

import dataclasses
import json
import math
from pathlib import Path

import numpy as np


def _normalize(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _normalize(obj.to_dict() if hasattr(obj, "to_dict") else dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_normalize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _normalize(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "word"):
        return {"word": list(obj.word), "origin": obj.origin, "height": float(obj.height)}
    return str(obj)


def _encode(value, indent, level):
    pad = " " * (indent * (level + 1))
    close = " " * (indent * level)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(value[k], indent, level + 1)}" for k in sorted(value)]
        return "{\n" + ",\n".join(items) + "\n" + close + "}"
    if isinstance(value, list):
        if not value:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in value):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in value) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in value) + "\n" + close + "]"
    if isinstance(value, float):
        return format_float(value)
    return json.dumps(value)


def format_float(x):
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def dumps(obj, indent=2):
    """Canonical JSON text (trailing newline included)."""
    return _encode(_normalize(obj), indent, 0) + "\n"


def dump(obj, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def write_columns(path, rows, header):
    """Whitespace-separated plot-data file with a '#' header line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["# " + " ".join(header)]
    for row in rows:
        lines.append(" ".join(format_float(float(v)) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path
