"""State and synchronous dynamics of the periodic 1-D lattice of coupled Gauss maps.

The public operations (:func:`step`, :func:`step_pair`) act on immutable
:class:`LatticeState` objects. Ensemble code uses :class:`LatticeEngine`, which
advances a ``(batch, N)`` block of independent lattices in place with
preallocated buffers. Both paths perform the same floating-point operations in
the same order, so a configuration evolves bit-identically whichever path or
batch size is used.
"""

from __future__ import annotations

import numbers
from dataclasses import dataclass, replace

import numpy as np

from ._validation import check_cells, check_scalar
from .exceptions import ValidationError
from .mapcore import MapParams

DEFAULT_EPSILON = 0.4


@dataclass(frozen=True)
class LatticeState:
    cells: np.ndarray
    epsilon: float
    params: MapParams
    micro_time: int = 0

    def __post_init__(self):
        cells = check_cells(self.cells).copy()
        cells.flags.writeable = False
        object.__setattr__(self, "cells", cells)
        check_scalar(self.epsilon, "epsilon", min_val=0.0, max_val=1.0)
        check_scalar(self.micro_time, "micro_time", target_type=numbers.Integral, min_val=0)

    @property
    def n_sites(self) -> int:
        return self.cells.shape[0]


@dataclass(frozen=True)
class EnsembleSpec:
    """Everything needed to reproduce a set of random initial configurations.

    ``init_low``/``init_high`` default to ``[beta, 1 + beta]``, the interval
    the map sends the real line into.
    """

    n_sites: int
    n_configs: int
    params: MapParams
    master_seed: int = 0
    epsilon: float = DEFAULT_EPSILON
    t_max: int = 1000
    init_low: float | None = None
    init_high: float | None = None

    def __post_init__(self):
        check_scalar(self.n_sites, "n_sites", target_type=numbers.Integral, min_val=3)
        check_scalar(self.n_configs, "n_configs", target_type=numbers.Integral, min_val=1)
        check_scalar(self.t_max, "t_max", target_type=numbers.Integral, min_val=1)
        check_scalar(self.master_seed, "master_seed", target_type=numbers.Integral,
                     min_val=0, max_val=2**64 - 1)
        check_scalar(self.epsilon, "epsilon", min_val=0.0, max_val=1.0)
        if not isinstance(self.params, MapParams):
            raise ValidationError("params must be a MapParams instance")
        for name in ("init_low", "init_high"):
            value = getattr(self, name)
            if value is not None:
                check_scalar(value, name)
        low, high = self.init_interval
        if not low < high:
            raise ValidationError(f"init_low must be below init_high, got [{low}, {high}]")

    @property
    def init_interval(self) -> tuple[float, float]:
        low = self.params.beta if self.init_low is None else float(self.init_low)
        high = 1.0 + self.params.beta if self.init_high is None else float(self.init_high)
        return low, high

    def with_beta(self, beta: float | None) -> "EnsembleSpec":
        """Copy with a different ``beta``; ``None`` returns ``self``."""
        if beta is None or beta == self.params.beta:
            return self
        return replace(self, params=self.params.with_beta(beta))


def config_rng(master_seed: int, config_index: int) -> np.random.Generator:
    """Independent stream for one configuration, keyed by ``(master_seed, config_index)``.

    Adding configurations never changes the streams of existing ones.
    """
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(config_index),))
    return np.random.Generator(np.random.PCG64(seq))


def _check_index(spec: EnsembleSpec, config_index) -> None:
    check_scalar(config_index, "config_index", target_type=numbers.Integral, min_val=0)
    if config_index >= spec.n_configs:
        raise ValidationError(f"config_index {config_index} out of range for {spec.n_configs} configs")


def draw_cells(spec: EnsembleSpec, rng: np.random.Generator) -> np.ndarray:
    low, high = spec.init_interval
    return rng.uniform(low, high, spec.n_sites)


def init_random(spec: EnsembleSpec, config_index: int) -> LatticeState:
    _check_index(spec, config_index)
    cells = draw_cells(spec, config_rng(spec.master_seed, config_index))
    return LatticeState(cells, spec.epsilon, spec.params, 0)


def init_batch(spec: EnsembleSpec, indices) -> np.ndarray:
    """Stack the initial cells for several configurations into a ``(len(indices), N)`` array."""
    out = np.empty((len(indices), spec.n_sites))
    for row, idx in enumerate(indices):
        _check_index(spec, idx)
        out[row] = draw_cells(spec, config_rng(spec.master_seed, idx))
    return out


class LatticeEngine:
    """In-place stepper for a block of independent periodic lattices.

    ``beta`` may be a scalar or an array broadcastable to ``(batch, 1)``, which
    lets one block hold lattices at different ``beta``.
    """

    def __init__(self, shape, nu, beta, epsilon):
        if len(shape) != 2 or shape[1] < 3:
            raise ValidationError(f"engine shape must be (batch, N>=3), got {shape}")
        self.shape = tuple(shape)
        self.neg_nu = -float(nu)
        self.beta = beta if np.isscalar(beta) else np.asarray(beta, dtype=np.float64).reshape(-1, 1)
        self.keep = 1.0 - float(epsilon)
        self.share = float(epsilon) / 2.0
        self._f = np.empty(shape)
        self._nb = np.empty(shape)

    def images(self, x: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        f = self._f if out is None else out
        np.multiply(x, x, out=f)
        f *= self.neg_nu
        np.exp(f, out=f)
        f += self.beta
        return f

    def mix(self, f: np.ndarray, out: np.ndarray) -> np.ndarray:
        """``out = (1-eps) f + (eps/2) (f_right + f_left)`` with periodic wrap."""
        nb = self._nb
        np.add(f[:, 2:], f[:, :-2], out=nb[:, 1:-1])
        np.add(f[:, 1], f[:, -1], out=nb[:, 0])
        np.add(f[:, 0], f[:, -2], out=nb[:, -1])
        nb *= self.share
        np.multiply(f, self.keep, out=out)
        out += nb
        return out

    def step(self, x: np.ndarray) -> np.ndarray:
        """Advance ``x`` by one micro-step in place and return it."""
        return self.mix(self.images(x), x)

    def run(self, x: np.ndarray, n_steps: int) -> np.ndarray:
        for _ in range(n_steps):
            self.step(x)
        return x


def _engine_for(state: LatticeState) -> LatticeEngine:
    return LatticeEngine((1, state.n_sites), state.params.nu, state.params.beta, state.epsilon)


def step(state: LatticeState) -> LatticeState:
    x = state.cells.reshape(1, -1).copy()
    _engine_for(state).step(x)
    return replace(state, cells=x[0], micro_time=state.micro_time + 1)


def step_pair(state: LatticeState) -> LatticeState:
    """Two micro-steps, i.e. one observable time unit."""
    x = state.cells.reshape(1, -1).copy()
    engine = _engine_for(state)
    engine.step(x)
    engine.step(x)
    return replace(state, cells=x[0], micro_time=state.micro_time + 2)


def lattice_bifurcation(betas, n_sites: int = 100, epsilon: float = DEFAULT_EPSILON,
                        transient: int = 1000, keep: int = 20, nu: float = 7.5,
                        seed: int = 0):
    """Site values of a coupled lattice after a transient, for each ``beta``.

    Each ``beta`` gets its own random initial condition on ``[beta, 1+beta]``
    from the stream ``(seed, k)`` where ``k`` is the position in ``betas``.
    Returns ``(betas, values)`` with ``values`` of shape ``(len(betas), keep, n_sites)``
    holding micro-steps ``transient+1 .. transient+keep``.
    """
    check_scalar(transient, "transient", target_type=numbers.Integral, min_val=0)
    check_scalar(keep, "keep", target_type=numbers.Integral, min_val=1)
    betas = np.atleast_1d(np.asarray(betas, dtype=np.float64))
    x = np.empty((betas.size, n_sites))
    for k, beta in enumerate(betas):
        x[k] = config_rng(seed, k).uniform(beta, 1.0 + beta, n_sites)
    engine = LatticeEngine(x.shape, nu, betas, epsilon)
    engine.run(x, transient)
    values = np.empty((betas.size, keep, n_sites))
    for j in range(keep):
        engine.step(x)
        values[:, j] = x
    return betas, values
