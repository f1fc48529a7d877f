"""Deterministic JSON and CSV serialization of reports."""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Any, Iterable, Sequence

import numpy as np

from fforge import __version__

SCHEMA_VERSION = "fforge-report/1"

_AXES = ("t", "r", "theta", "phi")


def fmt_float(v: float) -> str:
    if math.isnan(v) or math.isinf(v):
        return json.dumps(str(v))
    return format(v + 0.0, ".17g")  # + 0.0 folds -0.0 into 0


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON with every float written to 17 significant digits and keys in insertion order."""
    out: list[str] = []
    _emit(obj, out, 0, indent)
    return "".join(out) + "\n"


def _emit(obj, out, level, indent):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, (np.integer,)):
        obj = int(obj)
    if isinstance(obj, bool) or obj is None:
        out.append(json.dumps(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(fmt_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = list(obj.items())
        for i, (k, v) in enumerate(items):
            out.append(f"{pad}{json.dumps(str(k))}: ")
            _emit(v, out, level + 1, indent)
            out.append(",\n" if i < len(items) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        if all(isinstance(x, (int, float, np.floating)) and not isinstance(x, bool) for x in obj):
            out.append("[" + ", ".join(fmt_float(float(x)) if not isinstance(x, int) else str(x) for x in obj) + "]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad)
            _emit(v, out, level + 1, indent)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def labelled(tensor: np.ndarray, pattern: str) -> dict[str, float]:
    """Flatten a tensor into {"g_t_r": value, ...}; ``pattern`` names the index slots, e.g. "g_{}{}"."""
    tensor = np.asarray(tensor)
    out = {}
    for idx in np.ndindex(*tensor.shape):
        out[pattern.format(*(_AXES[i] for i in idx))] = float(tensor[idx])
    return out


def envelope(command: str, spec_name: str | None, config: dict, results: Any, timing: float | None = None) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "tool_version": __version__,
        "command": command,
        "spec": spec_name,
        "config": config,
        "results": results,
        "timing_seconds": timing,
    }


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt_float(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()
