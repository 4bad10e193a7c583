"""Self-describing CSV time series.

Layout::

    # radpair <kind>
    # units: <free text>
    # <key>: <value>          (zero or more metadata lines)
    col1,col2,...
    v11,v12,...

Floats are written with ``repr`` (shortest round-trip form), so files are
byte-reproducible and read back bit-exactly.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

UNITS = "time in 1/A; rates and frequencies in A (A = reference hyperfine constant); populations dimensionless"


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, columns: dict, *, kind: str, meta: dict | None = None, units: str = UNITS) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(columns)
    arrays = [np.asarray(columns[c]) for c in names]
    n = len(arrays[0]) if arrays else 0
    if any(len(a) != n for a in arrays):
        raise ValueError("all columns must have the same length")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# radpair {kind}\n")
        fh.write(f"# units: {units}\n")
        for k, v in (meta or {}).items():
            fh.write(f"# {k}: {v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for i in range(n):
            w.writerow([_fmt(a[i]) for a in arrays])
    return path


def read_csv(path) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    """Return (columns, metadata). Metadata includes ``kind`` and ``units``."""
    meta: dict[str, str] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            text = line[1:].strip()
            if text.startswith("radpair "):
                meta["kind"] = text[len("radpair "):]
            elif ":" in text:
                k, v = text.split(":", 1)
                meta[k.strip()] = v.strip()
        else:
            body.append(line)
    rows = list(csv.reader(body))
    if not rows:
        raise ValueError(f"{path}: no header row")
    names, data = rows[0], rows[1:]
    cols = {}
    for j, name in enumerate(names):
        vals = [r[j] for r in data]
        if all(v.lstrip("-").isdigit() for v in vals) and vals:
            cols[name] = np.array([int(v) for v in vals])
        else:
            cols[name] = np.array([float(v) for v in vals])
    return cols, meta
