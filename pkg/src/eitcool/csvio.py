"""CSV emission and ingestion with provenance metadata.

Output files start with '#'-prefixed metadata lines (config hash, seed,
package version, command), then a header row, then data.  Files are
written to a temporary name and atomically renamed, so a failed run never
leaves a partial file behind.  Formatting is fixed so that identical
inputs produce byte-identical files.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np


def _format(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return f"{float(value):.12g}"


def write_csv(path: str | Path, columns: dict, metadata: dict | None = None) -> None:
    """Atomically write named columns (equal-length sequences) as CSV."""
    path = Path(path)
    names = list(columns)
    cols = [np.atleast_1d(columns[name]) for name in names]
    length = len(cols[0])
    if any(len(c) != length for c in cols):
        raise ValueError("columns must have equal length")

    lines = []
    for key, value in (metadata or {}).items():
        lines.append(f"# {key} = {value}")
    lines.append(",".join(names))
    for i in range(length):
        lines.append(",".join(_format(c[i]) for c in cols))
    text = "\n".join(lines) + "\n"

    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_data(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Read a CSV with optional '#' metadata lines and a one-line header.

    Returns the column names and a 2-d float array (rows x columns).
    """
    path = Path(path)
    names: list[str] = []
    rows: list[list[float]] = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if not names:
                names = parts
                continue
            row = []
            for p in parts:
                try:
                    row.append(float(p))
                except ValueError:
                    row.append(float("nan"))  # non-numeric column
            rows.append(row)
    if not names or not rows:
        raise ValueError(f"{path}: no data found")
    return names, np.asarray(rows, dtype=float)
