"""Damage spreading between replicas of the lattice.

Replica 0 is the unperturbed reference. Damage is recorded at every
micro-step, since the damage field is inspected without any two-step
reduction.
"""

from __future__ import annotations

import numbers
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._validation import check_scalar
from .ensemble import make_blocks, map_blocks, ordered_mean
from .exceptions import IndexOutOfRange, InvalidK, ValidationError
from .io import write_matrix
from .lattice import EnsembleSpec, LatticeEngine, LatticeState, config_rng, draw_cells
from .mapcore import MapParams
from .series import ObservableSeries

DEFAULT_DELTA = 0.1
VANISHED = 1e-12


@dataclass(frozen=True, eq=False)
class ReplicaSet:
    """``k`` copies of one lattice, stored as a ``(k, N)`` array."""

    cells: np.ndarray
    epsilon: float
    params: MapParams
    micro_time: int = 0

    def __post_init__(self):
        cells = np.array(self.cells, dtype=np.float64)
        if cells.ndim != 2 or cells.shape[1] < 3:
            raise ValidationError(f"replica cells must have shape (k, N>=3), got {cells.shape}")
        if cells.shape[0] < 2:
            raise InvalidK(f"need at least 2 replicas, got {cells.shape[0]}")
        cells.flags.writeable = False
        object.__setattr__(self, "cells", cells)

    @property
    def k(self) -> int:
        return self.cells.shape[0]

    @property
    def n_pairs(self) -> int:
        return self.k * (self.k - 1) // 2

    @property
    def n_sites(self) -> int:
        return self.cells.shape[1]

    @property
    def replicas(self) -> list[LatticeState]:
        return [LatticeState(row, self.epsilon, self.params, self.micro_time) for row in self.cells]

    def step(self) -> "ReplicaSet":
        x = self.cells.copy()
        LatticeEngine(x.shape, self.params.nu, self.params.beta, self.epsilon).step(x)
        return ReplicaSet(x, self.epsilon, self.params, self.micro_time + 1)


def make_replicas(base: LatticeState, k: int) -> ReplicaSet:
    if isinstance(k, bool) or not isinstance(k, numbers.Integral) or k < 2:
        raise InvalidK(f"k must be an integer >= 2, got {k!r}")
    cells = np.tile(base.cells, (int(k), 1))
    return ReplicaSet(cells, base.epsilon, base.params, base.micro_time)


def _check_sites(sites, n_sites) -> np.ndarray:
    idx = np.asarray(sorted(set(int(s) for s in sites)), dtype=np.int64)
    if idx.size == 0:
        raise ValidationError("perturbation needs at least one site")
    if idx[0] < 0 or idx[-1] >= n_sites:
        raise IndexOutOfRange(f"site indices must lie in [0, {n_sites}), got {idx[0]}..{idx[-1]}")
    return idx


def perturb(rs: ReplicaSet, sites, delta: float) -> ReplicaSet:
    """Add ``delta`` at ``sites`` in every replica except the reference (replica 0)."""
    check_scalar(delta, "delta")
    idx = _check_sites(sites, rs.n_sites)
    x = rs.cells.copy()
    x[1:, idx] += delta
    return ReplicaSet(x, rs.epsilon, rs.params, rs.micro_time)


def fraction_sites(n_sites: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """``round(p N)`` distinct sites drawn from ``rng`` (at least one)."""
    check_scalar(p, "p", min_val=0.0, max_val=1.0, include_min=False)
    m = max(1, int(round(p * n_sites)))
    return np.sort(rng.choice(n_sites, size=m, replace=False))


def perturb_fraction(rs: ReplicaSet, p: float, delta: float, rng: np.random.Generator) -> ReplicaSet:
    """Each non-reference replica gets its own independent choice of ``round(p N)`` sites."""
    check_scalar(delta, "delta")
    x = rs.cells.copy()
    for r in range(1, rs.k):
        x[r, fraction_sites(rs.n_sites, p, rng)] += delta
    return ReplicaSet(x, rs.epsilon, rs.params, rs.micro_time)


def _pair_abs_sum(values: np.ndarray) -> np.ndarray:
    """Sum over replica pairs l<m and sites of ``|v_l - v_m|``; ``values`` is ``(..., k, N)``."""
    k = values.shape[-2]
    total = np.zeros(values.shape[:-2])
    for l in range(k - 1):
        for m in range(l + 1, k):
            total = total + np.abs(values[..., l, :] - values[..., m, :]).sum(axis=-1)
    return total


def damage_fine(rs: ReplicaSet) -> float:
    return float(_pair_abs_sum(rs.cells) / rs.n_pairs)


def damage_coarse(rs: ReplicaSet, x_star: float) -> float:
    spins = np.where(rs.cells >= x_star, 1.0, -1.0)
    return float(_pair_abs_sum(spins) / rs.n_pairs)


@dataclass(frozen=True, eq=False)
class DamageResult:
    """Ensemble output of :func:`run_damage`. Times are micro-steps ``0..t_max``."""

    fine: ObservableSeries
    coarse: ObservableSeries
    field: np.ndarray | None
    fine_by_config: np.ndarray
    coarse_by_config: np.ndarray

    def __iter__(self):
        return iter((self.fine, self.coarse, self.field))

    @property
    def final_fine(self) -> np.ndarray:
        return self.fine_by_config[:, -1]

    @property
    def final_coarse(self) -> np.ndarray:
        return self.coarse_by_config[:, -1]


def _initial_replicas(spec, idx, k, sites, fraction, delta):
    rng = config_rng(spec.master_seed, idx)
    base = draw_cells(spec, rng)
    rs = ReplicaSet(np.tile(base, (k, 1)), spec.epsilon, spec.params)
    if fraction is not None:
        return perturb_fraction(rs, fraction, delta, rng).cells
    return perturb(rs, sites, delta).cells


def _damage_block(block, spec, k, sites, fraction, delta, t_max, x_star, want_field):
    n = spec.n_sites
    x = np.concatenate([_initial_replicas(spec, i, k, sites, fraction, delta) for i in block])
    engine = LatticeEngine(x.shape, spec.params.nu, spec.params.beta, spec.epsilon)
    view = x.reshape(len(block), k, n)
    n_pairs = k * (k - 1) // 2
    fine = np.empty((len(block), t_max + 1))
    coarse = np.empty((len(block), t_max + 1))
    field = np.empty((t_max + 1, n)) if want_field else None
    for t in range(t_max + 1):
        if t:
            engine.step(x)
        fine[:, t] = _pair_abs_sum(view) / n_pairs
        coarse[:, t] = _pair_abs_sum(np.where(view >= x_star, 1.0, -1.0)) / n_pairs
        if want_field:
            field[t] = np.abs(view[0, 0] - view[0, 1])
    return fine, coarse, field


def run_damage(spec: EnsembleSpec, beta: float | None = None, k: int = 2, *, sites=None,
               fraction: float | None = None, delta: float = DEFAULT_DELTA,
               t_max: int | None = None, record_field: bool = True,
               workers: int = 1) -> DamageResult:
    """Evolve ``k`` replicas per configuration and record ``d(t)`` and ``D(t)``.

    Perturbation is either at explicit ``sites`` (default: the central site
    ``N // 2``) or at a random fraction ``fraction`` of sites. ``t_max`` is in
    micro-steps and defaults to ``spec.t_max``. For ``k == 2`` the per-site
    damage field ``|x_i(t) - y_i(t)|`` of configuration 0 is returned as a
    ``(t_max + 1, N)`` matrix.
    """
    if isinstance(k, bool) or not isinstance(k, numbers.Integral) or k < 2:
        raise InvalidK(f"k must be an integer >= 2, got {k!r}")
    if sites is not None and fraction is not None:
        raise ValidationError("give either sites or fraction, not both")
    spec = spec.with_beta(beta)
    t_max = spec.t_max if t_max is None else t_max
    check_scalar(t_max, "t_max", target_type=numbers.Integral, min_val=1)
    check_scalar(delta, "delta")
    if fraction is None:
        sites = _check_sites([spec.n_sites // 2] if sites is None else sites, spec.n_sites)
    x_star = spec.params.x_star
    blocks = make_blocks(spec.n_configs, spec.n_sites * k)
    want = record_field and k == 2
    parts = map_blocks(_damage_block, blocks, spec, k, sites, fraction, delta, t_max, x_star,
                       False, workers=workers)
    fine = np.concatenate([p[0] for p in parts])
    coarse = np.concatenate([p[1] for p in parts])
    field = None
    if want:
        field = _damage_block(range(1), spec, k, sites, fraction, delta, t_max, x_star, True)[2]
    times = np.arange(t_max + 1)
    n = spec.n_configs
    return DamageResult(
        ObservableSeries(times, ordered_mean(fine), n, "damage_fine"),
        ObservableSeries(times, ordered_mean(coarse), n, "damage_coarse"),
        field, fine, coarse,
    )


def damage_vanished(final_fine, threshold: float = VANISHED) -> np.ndarray:
    return np.asarray(final_fine) < threshold


def write_damage_field(path, field, spec: EnsembleSpec, delta: float, sites) -> Path:
    return write_matrix(path, field, {
        "N": spec.n_sites, "beta": spec.params.beta, "epsilon": spec.epsilon,
        "nu": spec.params.nu, "seed": spec.master_seed, "delta": delta,
        "sites": list(sites) if sites is not None else "fraction",
        "time_unit": "micro_step", "content": "abs(x_i - y_i), configuration 0",
    })
