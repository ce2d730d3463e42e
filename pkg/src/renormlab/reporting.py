"""Deterministic report documents and atomic file output."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile

from . import __version__

WALL_TIME_FIELD = "wall_time_s"


def stable_dumps(obj) -> str:
    """JSON with sorted keys and fixed separators: byte-stable for equal data."""
    return json.dumps(obj, sort_keys=True, indent=2, separators=(",", ": "), allow_nan=False)


def sanitize(obj):
    """Make a payload JSON-safe: tuples to lists, numpy scalars to Python,
    non-finite floats to strings (schema-visible rather than invalid JSON)."""
    import numpy as np

    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if v != v:
            return "nan"
        if v in (float("inf"), float("-inf")):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def report_doc(kind: str, config_echo: dict, result: dict, seed: int, wall_time_s: float) -> dict:
    return {
        "schema": f"renormlab.report/{kind}/1",
        "scenario": {"kind": kind, "config": sanitize(config_echo)},
        "provenance": {
            "tool": "renormlab",
            "version": __version__,
            "seed": int(seed),
            WALL_TIME_FIELD: float(wall_time_s),
        },
        "result": sanitize(result),
    }


def atomic_write_text(path: str, text: str):
    """Write-then-rename so readers never observe a partial file."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-report-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(path: str, doc: dict):
    atomic_write_text(path, stable_dumps(doc) + "\n")


def write_csv(path: str, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    atomic_write_text(path, buf.getvalue())


def strip_wall_time(doc: dict) -> dict:
    """Copy of a report with the single nondeterministic field removed."""
    out = json.loads(stable_dumps(doc))
    out.get("provenance", {}).pop(WALL_TIME_FIELD, None)
    return out
