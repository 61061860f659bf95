"""Coarse-grained spins, flip rate F(t), persistence P(t) and pattern exports.

Observable time ``t`` counts pairs of micro-steps: ``F(t)`` compares the spin
field at micro-time ``2t`` with the one at ``2t - 2``, and ``P(t)`` is the
fraction of sites whose spin at every even micro-time up to ``2t`` equals its
spin at micro-time 0. Spins are defined from the raw initial condition.
"""

from __future__ import annotations

import numbers
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._validation import check_same_length, check_scalar
from .ensemble import make_blocks, map_blocks, ordered_mean
from .exceptions import ValidationError
from .io import sidecar_path, write_kv, write_matrix, write_table
from .lattice import EnsembleSpec, LatticeEngine, LatticeState, init_batch, init_random
from .series import ObservableSeries


@dataclass(frozen=True, eq=False)
class SpinField:
    spins: np.ndarray

    def __post_init__(self):
        spins = np.asarray(self.spins, dtype=np.int8)
        if spins.ndim != 1 or not np.all(np.abs(spins) == 1):
            raise ValidationError("spins must be a 1-D array of +1/-1")
        object.__setattr__(self, "spins", spins)

    def __len__(self):
        return self.spins.size


def spins_of(cells, x_star: float) -> np.ndarray:
    """+1 where ``cells >= x_star`` (ties go up), -1 elsewhere."""
    return np.where(np.asarray(cells) >= x_star, 1, -1).astype(np.int8)


def coarse_grain(state: LatticeState, x_star: float) -> SpinField:
    return SpinField(spins_of(state.cells, x_star))


def flip_rate(prev: SpinField, curr: SpinField) -> float:
    check_same_length(prev, curr, ("prev", "curr"))
    return np.count_nonzero(prev.spins != curr.spins) / len(curr)


@dataclass(frozen=True, eq=False)
class PersistenceTracker:
    reference: SpinField
    alive: np.ndarray
    count_alive: int

    @classmethod
    def start(cls, reference: SpinField) -> "PersistenceTracker":
        n = len(reference)
        return cls(reference, np.ones(n, dtype=bool), n)

    @property
    def persistence(self) -> float:
        return self.count_alive / len(self.reference)


def update_persistence(tracker: PersistenceTracker, curr: SpinField) -> PersistenceTracker:
    check_same_length(tracker.reference, curr, ("reference", "curr"))
    alive = tracker.alive & (curr.spins == tracker.reference.spins)
    return PersistenceTracker(tracker.reference, alive, int(np.count_nonzero(alive)))


def sample_times(t_max: int, mode: str = "raw", dense_until: int = 1000,
                 per_decade: int = 100) -> np.ndarray:
    """Observable times at which series are stored.

    ``raw`` keeps every ``t`` in ``1..t_max``; ``log`` keeps every ``t`` up to
    ``dense_until`` and about ``per_decade`` log-spaced times per decade after.
    ``t_max`` is always included.
    """
    check_scalar(t_max, "t_max", target_type=numbers.Integral, min_val=1)
    if mode == "raw" or t_max <= dense_until:
        return np.arange(1, t_max + 1, dtype=np.int64)
    if mode != "log":
        raise ValidationError(f"unknown sampling mode {mode!r}")
    decades = np.log10(t_max / dense_until)
    n = int(np.ceil(decades * per_decade)) + 1
    tail = np.unique(np.round(np.logspace(np.log10(dense_until), np.log10(t_max), n)).astype(np.int64))
    return np.union1d(np.arange(1, dense_until + 1, dtype=np.int64), tail)


@dataclass(frozen=True, eq=False)
class ObservableCounts:
    """Integer flip and persistent-site counts per configuration and stored time."""

    times: np.ndarray
    flips: np.ndarray
    alive: np.ndarray
    n_sites: int

    @property
    def n_configs(self) -> int:
        return self.flips.shape[0]

    def flip_fractions(self) -> np.ndarray:
        return self.flips / self.n_sites

    def persistence_fractions(self) -> np.ndarray:
        return self.alive / self.n_sites

    def flip_rate_series(self) -> ObservableSeries:
        return ObservableSeries(self.times, ordered_mean(self.flip_fractions()),
                                self.n_configs, "flip_rate")

    def persistence_series(self) -> ObservableSeries:
        return ObservableSeries(self.times, ordered_mean(self.persistence_fractions()),
                                self.n_configs, "persistence")

    def partials(self, label: str) -> list[ObservableSeries]:
        rows = self.flip_fractions() if label == "flip_rate" else self.persistence_fractions()
        return [ObservableSeries(self.times, row, 1, label, config_index=i)
                for i, row in enumerate(rows)]


def _count_block(block, spec: EnsembleSpec, x_star: float, times: np.ndarray):
    x = init_batch(spec, block)
    engine = LatticeEngine(x.shape, spec.params.nu, spec.params.beta, spec.epsilon)
    ref = x >= x_star
    prev = ref.copy()
    curr = np.empty_like(ref)
    alive = np.ones_like(ref)
    diff = np.empty_like(ref)
    flips = np.zeros((len(block), times.size), dtype=np.int64)
    counts = np.zeros((len(block), times.size), dtype=np.int64)
    slot = 0
    for t in range(1, int(times[-1]) + 1):
        engine.step(x)
        engine.step(x)
        np.greater_equal(x, x_star, out=curr)
        if t == times[slot]:
            np.not_equal(curr, prev, out=diff)
            flips[:, slot] = np.count_nonzero(diff, axis=1)
        np.equal(curr, ref, out=diff)
        alive &= diff
        if t == times[slot]:
            counts[:, slot] = np.count_nonzero(alive, axis=1)
            slot += 1
        prev, curr = curr, prev
    return flips, counts


def observable_counts(spec: EnsembleSpec, beta: float | None = None, *, sampling: str = "raw",
                      workers: int = 1) -> ObservableCounts:
    """Simulate every configuration of ``spec`` and count flips and persistent sites."""
    spec = spec.with_beta(beta)
    x_star = spec.params.x_star
    times = sample_times(spec.t_max, sampling)
    blocks = make_blocks(spec.n_configs, spec.n_sites)
    parts = map_blocks(_count_block, blocks, spec, x_star, times, workers=workers)
    flips = np.concatenate([p[0] for p in parts])
    alive = np.concatenate([p[1] for p in parts])
    return ObservableCounts(times, flips, alive, spec.n_sites)


def run_observables(spec: EnsembleSpec, beta: float | None = None, *, sampling: str = "raw",
                    workers: int = 1) -> tuple[ObservableSeries, ObservableSeries]:
    """Ensemble-averaged ``(F, P)`` series for ``spec`` (optionally at another ``beta``)."""
    counts = observable_counts(spec, beta, sampling=sampling, workers=workers)
    return counts.flip_rate_series(), counts.persistence_series()


@dataclass(frozen=True, eq=False)
class SpatialProfile:
    cells: np.ndarray
    spins: np.ndarray
    x_star: float
    micro_time: int

    def rows(self):
        return [(i, float(x), int(s)) for i, (x, s) in enumerate(zip(self.cells, self.spins))]

    def run_lengths(self) -> np.ndarray:
        """Lengths of maximal runs of equal spins around the ring."""
        s = self.spins
        if np.all(s == s[0]):
            return np.array([s.size])
        start = int(np.flatnonzero(s != np.roll(s, 1))[0])
        rolled = np.roll(s, -start)
        edges = np.flatnonzero(np.diff(rolled) != 0) + 1
        return np.diff(np.concatenate(([0], edges, [s.size])))

    def to_csv(self, path) -> Path:
        path = Path(path)
        write_table(path, ("i", "x", "s"), self.rows())
        write_kv(sidecar_path(path), {"x_star": self.x_star, "micro_time": self.micro_time})
        return path


def export_spatial_profile(state: LatticeState, x_star: float) -> SpatialProfile:
    return SpatialProfile(state.cells.copy(), spins_of(state.cells, x_star), float(x_star),
                          state.micro_time)


def export_space_time(spec: EnsembleSpec, beta: float | None = None, t_max: int | None = None,
                      coarse: bool = False) -> np.ndarray:
    """Rows are the lattice at micro-times ``0, 2, ..., 2 t_max``; shape ``(t_max+1, N)``."""
    if spec.n_configs != 1:
        raise ValidationError("space-time export needs a spec with n_configs == 1")
    spec = spec.with_beta(beta)
    t_max = spec.t_max if t_max is None else t_max
    check_scalar(t_max, "t_max", target_type=numbers.Integral, min_val=1)
    state = init_random(spec, 0)
    x = state.cells.reshape(1, -1).copy()
    engine = LatticeEngine(x.shape, spec.params.nu, spec.params.beta, spec.epsilon)
    out = np.empty((t_max + 1, spec.n_sites))
    out[0] = x[0]
    for t in range(1, t_max + 1):
        engine.step(x)
        engine.step(x)
        out[t] = x[0]
    if coarse:
        return spins_of(out, spec.params.x_star)
    return out


def space_time_meta(spec: EnsembleSpec, coarse: bool) -> dict:
    return {
        "N": spec.n_sites, "beta": spec.params.beta, "epsilon": spec.epsilon, "nu": spec.params.nu,
        "seed": spec.master_seed, "x_star": spec.params.x_star,
        "content": "spins" if coarse else "cells", "time_unit": "observable_step (2 micro-steps)",
    }


def write_space_time(path, matrix, spec: EnsembleSpec, coarse: bool) -> Path:
    return write_matrix(path, matrix, space_time_meta(spec, coarse))
