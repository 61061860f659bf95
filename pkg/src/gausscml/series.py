"""Time-indexed ensemble averages and their CSV form."""

from __future__ import annotations

import csv
import numbers
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._validation import check_scalar, check_series_arrays
from .exceptions import ValidationError
from .io import format_value, sidecar_path, write_kv

LABELS = ("flip_rate", "persistence", "damage_fine", "damage_coarse")
CSV_HEADER = ("t", "value", "n_configs", "label")


@dataclass(frozen=True, eq=False)
class ObservableSeries:
    """Values of one observable at increasing integer times.

    ``config_index`` is set on single-configuration partials and is what
    :func:`gausscml.ensemble.merge_series` sorts by.
    """

    times: np.ndarray
    values: np.ndarray
    n_configs: int
    label: str
    config_index: int | None = None

    def __post_init__(self):
        times, values = check_series_arrays(self.times, self.values)
        if times.size and not np.issubdtype(times.dtype, np.integer):
            if not np.all(times == np.round(times)):
                raise ValidationError("times must be integers")
        times = times.astype(np.int64)
        if self.label not in LABELS:
            raise ValidationError(f"label must be one of {LABELS}, got {self.label!r}")
        check_scalar(self.n_configs, "n_configs", target_type=numbers.Integral, min_val=1)
        if self.label in ("flip_rate", "persistence"):
            if np.any(values < 0.0) or np.any(values > 1.0):
                raise ValidationError(f"{self.label} values must lie in [0, 1]")
        for arr in (times, values):
            arr.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.times.size

    def __eq__(self, other):
        if not isinstance(other, ObservableSeries):
            return NotImplemented
        return (self.label == other.label and self.n_configs == other.n_configs
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.values, other.values))

    def value_at(self, t: int) -> float:
        pos = np.searchsorted(self.times, t)
        if pos == self.times.size or self.times[pos] != t:
            raise KeyError(t)
        return float(self.values[pos])

    def window(self, t_min, t_max) -> "ObservableSeries":
        mask = (self.times >= t_min) & (self.times <= t_max)
        return ObservableSeries(self.times[mask], self.values[mask], self.n_configs, self.label)

    def to_csv(self, path, meta=None) -> Path:
        """Write the series; ``meta`` (if given) goes to a ``.meta`` sidecar."""
        path = Path(path)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for t, v in zip(self.times, self.values):
                writer.writerow([int(t), format_value(v), self.n_configs, self.label])
        if meta is not None:
            write_kv(sidecar_path(path), meta)
        return path

    @classmethod
    def from_csv(cls, path) -> "ObservableSeries":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if tuple(header or ()) != CSV_HEADER:
                raise ValidationError(f"{path}: expected header {','.join(CSV_HEADER)}")
            rows = [r for r in reader if r]
        if not rows:
            raise ValidationError(f"{path}: no data rows")
        labels = {r[3] for r in rows}
        counts = {r[2] for r in rows}
        if len(labels) != 1 or len(counts) != 1:
            raise ValidationError(f"{path}: label and n_configs must be constant")
        times = np.array([int(r[0]) for r in rows], dtype=np.int64)
        values = np.array([float(r[1]) for r in rows])
        return cls(times, values, int(rows[0][2]), rows[0][3])
