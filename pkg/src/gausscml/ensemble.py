"""Deterministic parallel execution over configurations and fixed-order reduction.

Configurations are grouped into contiguous blocks, each block is simulated by a
worker, and the per-configuration results are reassembled in configuration
index order before any floating-point reduction happens. Results are therefore
identical for any worker count.
"""

from __future__ import annotations

import numbers
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ._validation import check_scalar
from .exceptions import GridMismatch, ValidationError
from .series import ObservableSeries

# A block of about this many doubles keeps the stepping buffers in cache.
BLOCK_ELEMENTS = 25_000


def make_blocks(n_configs: int, n_sites: int, target: int = BLOCK_ELEMENTS) -> list[range]:
    rows = max(1, target // max(1, n_sites))
    return [range(s, min(s + rows, n_configs)) for s in range(0, n_configs, rows)]


def map_blocks(func, blocks, *args, workers: int = 1):
    """Apply ``func(block, *args)`` to every block and return results in block order."""
    check_scalar(workers, "workers", target_type=numbers.Integral, min_val=1)
    blocks = list(blocks)
    if workers == 1 or len(blocks) <= 1:
        return [func(block, *args) for block in blocks]
    with ProcessPoolExecutor(max_workers=min(workers, len(blocks))) as pool:
        futures = [pool.submit(func, block, *args) for block in blocks]
        return [f.result() for f in futures]


def ordered_mean(rows) -> np.ndarray:
    """Row mean accumulated strictly in row order (index order of configurations)."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise ValidationError("need a non-empty 2-D array of per-configuration rows")
    acc = np.zeros(rows.shape[1])
    for row in rows:
        acc += row
    return acc / rows.shape[0]


def merge_series(partials) -> ObservableSeries:
    """Pointwise mean of per-configuration series.

    Partials carrying ``config_index`` are sorted by it first, so the input
    order does not matter.
    """
    partials = list(partials)
    if not partials:
        raise ValidationError("merge_series needs at least one partial")
    if all(p.config_index is not None for p in partials):
        partials.sort(key=lambda p: p.config_index)
    elif any(p.config_index is not None for p in partials):
        raise ValidationError("either all or none of the partials must carry config_index")
    ref = partials[0]
    for p in partials[1:]:
        if p.label != ref.label:
            raise ValidationError(f"cannot merge {p.label!r} into {ref.label!r}")
        if not np.array_equal(p.times, ref.times):
            raise GridMismatch("partials have different time grids")
    if any(p.n_configs != 1 for p in partials):
        # pre-averaged inputs: weight by their configuration counts
        weights = np.array([p.n_configs for p in partials], dtype=np.float64)
        acc = np.zeros(len(ref))
        for w, p in zip(weights, partials):
            acc += w * p.values
        values = acc / weights.sum()
        n_configs = int(weights.sum())
    else:
        values = ordered_mean([p.values for p in partials])
        n_configs = len(partials)
    return ObservableSeries(ref.times, values, n_configs, ref.label)
