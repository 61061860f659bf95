"""Plain-text file formats: key=value records, CSV tables, and matrices with sidecars."""

from __future__ import annotations

import csv
import os
from pathlib import Path

import numpy as np

from .exceptions import ValidationError


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (list, tuple, np.ndarray)):
        return ",".join(format_value(v) for v in value)
    return str(value)


def write_kv(path, items) -> Path:
    """Write ``key=value`` lines in the given order. ``items`` is a mapping or pairs."""
    path = Path(path)
    pairs = items.items() if hasattr(items, "items") else items
    lines = []
    for key, value in pairs:
        text = format_value(value)
        if "\n" in text:
            raise ValidationError(f"value for {key!r} spans several lines")
        lines.append(f"{key}={text}\n")
    path.write_text("".join(lines), encoding="utf-8")
    return path


def parse_kv_lines(lines, source="<input>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in out:
            raise ValidationError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def read_kv(path) -> dict[str, str]:
    path = Path(path)
    return parse_kv_lines(path.read_text(encoding="utf-8").splitlines(), str(path))


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta")


def write_table(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    return path


def write_matrix(path, matrix, meta) -> Path:
    """Whitespace-separated matrix (rows are times) plus a ``.meta`` sidecar."""
    path = Path(path)
    matrix = np.asarray(matrix)
    fmt = "%d" if np.issubdtype(matrix.dtype, np.integer) else "%.17g"
    np.savetxt(path, matrix, fmt=fmt)
    write_kv(sidecar_path(path), {"rows": matrix.shape[0], "cols": matrix.shape[1], **meta})
    return path


def read_matrix(path) -> tuple[np.ndarray, dict[str, str]]:
    path = Path(path)
    return np.loadtxt(path, ndmin=2), read_kv(sidecar_path(path))


def ensure_dir(path) -> Path:
    path = Path(path)
    os.makedirs(path, exist_ok=True)
    return path
