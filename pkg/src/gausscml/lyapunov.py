"""Largest Lyapunov exponent of the lattice by co-evolving one tangent vector."""

from __future__ import annotations

import numbers
from dataclasses import dataclass

import numpy as np

from ._validation import check_same_length, check_scalar
from .ensemble import make_blocks, map_blocks, ordered_mean
from .exceptions import TangentCollapse
from .lattice import EnsembleSpec, LatticeEngine, LatticeState, config_rng, draw_cells
from .mapcore import eval_derivative

DEFAULT_TRANSIENT = 10_000
DEFAULT_MEASURE = 100_000


@dataclass(frozen=True, eq=False)
class TangentState:
    base: LatticeState
    tangent: np.ndarray
    log_sum: float = 0.0
    steps_counted: int = 0

    @property
    def estimate(self) -> float:
        return self.log_sum / self.steps_counted if self.steps_counted else float("nan")


def jacobian_vector_product(state: LatticeState, v) -> np.ndarray:
    """Directional derivative of one micro-step at ``state`` along ``v``."""
    v = np.asarray(v, dtype=np.float64)
    check_same_length(state.cells, v, ("cells", "v"))
    u = eval_derivative(state.cells, state.params) * v
    eps = state.epsilon
    return (1.0 - eps) * u + (eps / 2.0) * (np.roll(u, -1) + np.roll(u, 1))


class _TangentEngine:
    """Batched co-evolution of base lattices and unit tangent vectors."""

    def __init__(self, shape, nu, beta, epsilon):
        self.lattice = LatticeEngine(shape, nu, beta, epsilon)
        self.two_nu = 2.0 * nu
        self._g = np.empty(shape)
        self._f = np.empty(shape)
        self._u = np.empty(shape)
        self._w = np.empty(shape)

    def advance(self, x, v):
        """One micro-step of ``x`` and ``v`` (in place); returns the tangent stretch per row."""
        lat = self.lattice
        g = self._g
        np.multiply(x, x, out=g)
        g *= lat.neg_nu
        np.exp(g, out=g)
        f = self._f
        np.add(g, lat.beta, out=f)
        # f'(x) = -2 nu x exp(-nu x^2)
        u = self._u
        np.multiply(x, -self.two_nu, out=u)
        u *= g
        u *= v
        lat.mix(u, self._w)
        lat.mix(f, x)
        norms = np.sqrt(np.einsum("ij,ij->i", self._w, self._w))
        if not np.all(np.isfinite(norms)) or np.any(norms == 0.0):
            raise TangentCollapse("tangent vector underflowed or overflowed before renormalization")
        np.divide(self._w, norms[:, None], out=v)
        return norms


def evolve_tangent(ts: TangentState, n_steps: int) -> TangentState:
    """Advance a single :class:`TangentState` by ``n_steps`` micro-steps."""
    check_scalar(n_steps, "n_steps", target_type=numbers.Integral, min_val=0)
    base = ts.base
    x = base.cells.reshape(1, -1).copy()
    v = np.asarray(ts.tangent, dtype=np.float64).reshape(1, -1)
    norm = np.linalg.norm(v)
    if norm == 0.0 or not np.isfinite(norm):
        raise TangentCollapse("initial tangent must be a finite non-zero vector")
    v = v / norm
    engine = _TangentEngine(x.shape, base.params.nu, base.params.beta, base.epsilon)
    log_sum = ts.log_sum
    for _ in range(n_steps):
        log_sum += float(np.log(engine.advance(x, v)[0]))
    new_base = LatticeState(x[0], base.epsilon, base.params, base.micro_time + n_steps)
    return TangentState(new_base, v[0].copy(), log_sum, ts.steps_counted + n_steps)


def lyapunov_from_state(state: LatticeState, transient: int = 0, measure_steps: int = 1000,
                        tangent=None, rng: np.random.Generator | None = None) -> float:
    """Largest exponent starting from a given state (random unit tangent unless given)."""
    check_scalar(transient, "transient", target_type=numbers.Integral, min_val=0)
    check_scalar(measure_steps, "measure_steps", target_type=numbers.Integral, min_val=1)
    x = state.cells.reshape(1, -1).copy()
    LatticeEngine(x.shape, state.params.nu, state.params.beta, state.epsilon).run(x, transient)
    if tangent is None:
        rng = np.random.default_rng(0) if rng is None else rng
        tangent = rng.standard_normal(state.n_sites)
    start = LatticeState(x[0], state.epsilon, state.params, state.micro_time + transient)
    return evolve_tangent(TangentState(start, tangent), measure_steps).estimate


def _lyapunov_block(block, spec, transient, measure_steps):
    n = spec.n_sites
    x = np.empty((len(block), n))
    v = np.empty((len(block), n))
    for row, idx in enumerate(block):
        rng = config_rng(spec.master_seed, idx)
        x[row] = draw_cells(spec, rng)
        v[row] = rng.standard_normal(n)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    engine = _TangentEngine(x.shape, spec.params.nu, spec.params.beta, spec.epsilon)
    engine.lattice.run(x, transient)
    log_sum = np.zeros(len(block))
    for _ in range(measure_steps):
        log_sum += np.log(engine.advance(x, v))
    return log_sum / measure_steps


def lyapunov_by_config(spec: EnsembleSpec, beta: float | None = None,
                       transient: int = DEFAULT_TRANSIENT, measure_steps: int = DEFAULT_MEASURE,
                       workers: int = 1) -> np.ndarray:
    """Per-configuration estimates, in configuration index order."""
    check_scalar(transient, "transient", target_type=numbers.Integral, min_val=0)
    check_scalar(measure_steps, "measure_steps", target_type=numbers.Integral, min_val=1)
    spec = spec.with_beta(beta)
    blocks = make_blocks(spec.n_configs, spec.n_sites)
    parts = map_blocks(_lyapunov_block, blocks, spec, transient, measure_steps, workers=workers)
    return np.concatenate(parts)


def largest_lyapunov(spec: EnsembleSpec, beta: float | None = None,
                     transient: int = DEFAULT_TRANSIENT, measure_steps: int = DEFAULT_MEASURE,
                     workers: int = 1) -> float:
    est = lyapunov_by_config(spec, beta, transient, measure_steps, workers)
    return float(ordered_mean(est.reshape(-1, 1))[0])


def summarize(estimates) -> tuple[float, float]:
    """Mean and standard error of the mean across configurations."""
    est = np.asarray(estimates, dtype=np.float64)
    mean = float(ordered_mean(est.reshape(-1, 1))[0])
    if est.size < 2:
        return mean, float("nan")
    return mean, float(np.std(est, ddof=1) / np.sqrt(est.size))


def zero_crossing(betas, lambdas) -> float | None:
    """``beta`` where the sweep first turns from non-positive to positive, linearly interpolated.

    Scans in increasing ``beta``; returns ``None`` if the sign never changes.
    """
    order = np.argsort(betas)
    b = np.asarray(betas, dtype=np.float64)[order]
    lam = np.asarray(lambdas, dtype=np.float64)[order]
    for i in range(len(b) - 1):
        if lam[i] <= 0.0 < lam[i + 1]:
            return float(b[i] + (b[i + 1] - b[i]) * (-lam[i]) / (lam[i + 1] - lam[i]))
    return None
