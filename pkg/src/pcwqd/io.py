"""
File formats. All files carry SI base units; headers are mandatory.

CSV files start with optional ``# key=value`` metadata lines followed by one
header row of column names:

==========  =========================================
scan        ``freq_hz, transmission``
histogram   ``time_s, counts, irf_counts`` (metadata ``rep_period_s`` required)
iv          ``v_volts, i_amps``
rc          ``f_ac_hz, intensity_counts_per_s``
==========  =========================================

Writes go to a temporary file in the target directory followed by an atomic
rename.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .lifetime import DecayHistogram
from .wgqed import ScanTrace

COLUMNS = {
    "scan": ("freq_hz", "transmission"),
    "histogram": ("time_s", "counts", "irf_counts"),
    "iv": ("v_volts", "i_amps"),
    "rc": ("f_ac_hz", "intensity_counts_per_s"),
}


def atomic_write(path, data) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


# ---------------------------------------------------------------------------
# CSV

def format_csv(kind: str, columns, meta: dict | None = None) -> str:
    names = COLUMNS[kind]
    cols = [np.asarray(c, dtype=float) for c in columns]
    if len(cols) != len(names) or len({c.size for c in cols}) != 1:
        raise ValueError(f"{kind} needs {len(names)} equal-length columns")
    buf = io.StringIO()
    for k in sorted(meta or {}):
        buf.write(f"# {k}={meta[k]}\n")
    buf.write(",".join(names) + "\n")
    for row in zip(*cols):
        buf.write(",".join(repr(float(x)) for x in row) + "\n")
    return buf.getvalue()


def read_csv(path, kind: str) -> tuple[dict, np.ndarray]:
    """Metadata dict and (n, ncol) array. Raises ValidationError on format errors."""
    names = COLUMNS[kind]
    meta: dict = {}
    rows = []
    header = None
    try:
        with open(path, newline="") as fh:
            for lineno, line in enumerate(fh, 1):
                s = line.strip()
                if not s:
                    continue
                if s.startswith("#"):
                    key, sep, val = s[1:].partition("=")
                    if sep:
                        meta[key.strip()] = val.strip()
                    continue
                fields = next(csv.reader([s]))
                if header is None:
                    header = tuple(f.strip() for f in fields)
                    if header != names:
                        raise ValidationError(f"{path}: expected header {','.join(names)}, got {s}")
                    continue
                if len(fields) != len(names):
                    raise ValidationError(f"{path}:{lineno}: expected {len(names)} fields")
                try:
                    rows.append([float(f) for f in fields])
                except ValueError:
                    raise ValidationError(f"{path}:{lineno}: non-numeric field") from None
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from exc
    if header is None:
        raise ValidationError(f"{path}: missing header row")
    arr = np.array(rows, dtype=float).reshape(-1, len(names))
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{path}: non-finite values")
    return meta, arr


def read_scan(path) -> ScanTrace:
    meta, arr = read_csv(path, "scan")
    if arr.shape[0] < 2:
        raise ValidationError(f"{path}: scan needs at least 2 rows")
    try:
        return ScanTrace(arr[:, 0], arr[:, 1], meta=meta)
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def write_scan(path, trace: ScanTrace) -> None:
    atomic_write(path, format_csv("scan", [trace.axis, trace.values], trace.meta))


def read_histogram(path) -> DecayHistogram:
    meta, arr = read_csv(path, "histogram")
    if "rep_period_s" not in meta:
        raise ValidationError(f"{path}: missing '# rep_period_s=' header")
    if arr.shape[0] < 8:
        raise ValidationError(f"{path}: histogram needs at least 8 bins")
    t = arr[:, 0]
    dt = float(np.median(np.diff(t)))
    edges = np.append(t, t[-1] + dt)
    try:
        return DecayHistogram(edges, arr[:, 1], arr[:, 2], float(meta["rep_period_s"]))
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def write_histogram(path, hist: DecayHistogram) -> None:
    text = format_csv("histogram", [hist.times, hist.counts, hist.irf],
                      {"rep_period_s": repr(float(hist.rep_period))})
    atomic_write(path, text)


def read_xy(path, kind: str) -> np.ndarray:
    _, arr = read_csv(path, kind)
    if arr.shape[0] < 3:
        raise ValidationError(f"{path}: need at least 3 rows")
    return arr


def write_xy(path, kind: str, arr) -> None:
    arr = np.asarray(arr, dtype=float)
    atomic_write(path, format_csv(kind, [arr[:, 0], arr[:, 1]]))


# ---------------------------------------------------------------------------
# JSON and key-tree text

def _clean(obj):
    """Plain JSON types; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _fmt(x) -> str:
    if x is None:
        return "null"
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def key_tree(obj, indent: int = 0) -> str:
    """Indented ``key: value`` rendering with sorted keys; lists use ``- ``."""
    pad = "  " * indent
    out = []
    if isinstance(obj, dict):
        for k in sorted(obj):
            v = obj[k]
            if isinstance(v, (dict, list)) and v:
                out.append(f"{pad}{k}:")
                out.append(key_tree(v, indent + 1))
            elif isinstance(v, (dict, list)):
                out.append(f"{pad}{k}: {'{}' if isinstance(v, dict) else '[]'}")
            else:
                out.append(f"{pad}{k}: {_fmt(v)}")
    elif isinstance(obj, list):
        for v in obj:
            if isinstance(v, (dict, list)) and v:
                out.append(f"{pad}-")
                out.append(key_tree(v, indent + 1))
            else:
                out.append(f"{pad}- {_fmt(v)}")
    else:
        out.append(pad + _fmt(obj))
    return "\n".join(out)


def write_columns(path, header: str, columns) -> None:
    """Plot-data file: whitespace-separated columns under a ``#`` header."""
    cols = [np.asarray(c, dtype=float) for c in columns]
    lines = [f"# {header}"]
    for row in zip(*cols):
        lines.append(" ".join(f"{float(x):.10g}" for x in row))
    atomic_write(path, "\n".join(lines) + "\n")
