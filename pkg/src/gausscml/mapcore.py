"""The single Gauss map ``f(x) = exp(-nu x^2) + beta`` and its fixed points."""

from __future__ import annotations

import numbers
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._validation import check_scalar
from .exceptions import BracketInvalid, ToleranceNotReached, ValidationError

DEFAULT_NU = 7.5
DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 200


@dataclass(frozen=True)
class MapParams:
    """Gauss map parameters. ``nu`` is the inverse width, ``beta`` the vertical shift."""

    beta: float
    nu: float = DEFAULT_NU

    def __post_init__(self):
        check_scalar(self.beta, "beta")
        check_scalar(self.nu, "nu", min_val=0.0, include_min=False)
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "nu", float(self.nu))

    @cached_property
    def x_star(self) -> float:
        """Largest fixed point, computed on first access."""
        return largest_fixed_point(self).x_star

    def with_beta(self, beta: float) -> "MapParams":
        return MapParams(beta=beta, nu=self.nu)


@dataclass(frozen=True)
class FixedPointResult:
    x_star: float
    residual: float
    derivative_at: float
    stable: bool


def eval_map(x, p: MapParams):
    """Evaluate the map elementwise. Works on scalars and arrays alike."""
    return np.exp(-p.nu * (x * x)) + p.beta


def eval_derivative(x, p: MapParams):
    return -2.0 * p.nu * x * np.exp(-p.nu * (x * x))


def _residual(x, p):
    return float(eval_map(x, p)) - x


def _result(x, p):
    fp = float(eval_derivative(x, p))
    return FixedPointResult(
        x_star=float(x), residual=abs(_residual(x, p)), derivative_at=fp, stable=abs(fp) < 1.0
    )


def _bisect(p, lo, hi, tol, max_iter):
    # requires g(lo) > 0 >= g(hi) or the mirror image
    g_lo = _residual(lo, p)
    if g_lo == 0.0:
        return lo
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        g_mid = _residual(mid, p)
        if abs(g_mid) < tol:
            return mid
        if mid == lo or mid == hi:
            break  # bracket exhausted at machine precision
        if (g_mid > 0) == (g_lo > 0):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    raise ToleranceNotReached(
        f"bisection did not reach |f(x)-x| < {tol} within {max_iter} iterations (beta={p.beta})"
    )


def largest_fixed_point(p: MapParams, tol: float = DEFAULT_TOL,
                        max_iter: int = DEFAULT_MAX_ITER) -> FixedPointResult:
    """Bisect ``f(x) - x`` on ``[0, 1 + beta]``.

    Since ``f <= 1 + beta`` everywhere, no fixed point lies above ``1 + beta``,
    and ``f(0) - 0 = 1 + beta > 0`` makes the bracket valid whenever ``beta > -1``.
    """
    check_scalar(tol, "tol", min_val=0.0, include_min=False)
    if p.beta <= -1.0:
        raise BracketInvalid(f"beta must exceed -1 for the bracket [0, 1+beta], got {p.beta}")
    hi = 1.0 + p.beta
    if _residual(hi, p) > 0.0:
        # can only happen through rounding when 1+beta is itself a root
        return _result(hi, p)
    x = _bisect(p, 0.0, hi, tol, max_iter)
    return _result(x, p)


def find_all_fixed_points(p: MapParams, grid: int = 10_000, tol: float = DEFAULT_TOL,
                          max_iter: int = DEFAULT_MAX_ITER) -> list[FixedPointResult]:
    """All fixed points found by scanning a uniform grid for sign changes of ``f(x) - x``."""
    check_scalar(grid, "grid", target_type=numbers.Integral, min_val=100)
    xs = np.linspace(p.beta - 0.1, 1.0 + p.beta + 0.1, int(grid))
    g = eval_map(xs, p) - xs
    roots = []
    for i in range(len(xs) - 1):
        if g[i] == 0.0:
            roots.append(float(xs[i]))
        elif g[i] * g[i + 1] < 0.0:
            roots.append(_bisect(p, float(xs[i]), float(xs[i + 1]), tol, max_iter))
    if g[-1] == 0.0:
        roots.append(float(xs[-1]))
    return [_result(x, p) for x in sorted(roots)]


def beta_grid(start: float, stop: float, step: float) -> np.ndarray:
    """Inclusive, rounding-safe grid ``start, start+step, ..., stop``."""
    check_scalar(step, "step", min_val=0.0, include_min=False)
    if stop < start:
        raise ValidationError("stop must not be below start")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(n), 12)


def single_map_bifurcation(betas, transient: int = 1000, keep: int = 100, x0: float = 0.1,
                           nu: float = DEFAULT_NU):
    """Orbit samples of the uncoupled map for each ``beta``.

    Returns ``(betas, orbits)`` with ``orbits`` of shape ``(len(betas), keep)``.
    All betas are iterated together, which gives the same numbers as iterating
    them one by one.
    """
    check_scalar(transient, "transient", target_type=numbers.Integral, min_val=0)
    check_scalar(keep, "keep", target_type=numbers.Integral, min_val=1)
    check_scalar(nu, "nu", min_val=0.0, include_min=False)
    betas = np.atleast_1d(np.asarray(betas, dtype=np.float64))
    x = np.full(betas.shape, float(x0))
    for _ in range(transient):
        x = np.exp(-nu * (x * x)) + betas
    orbits = np.empty((betas.size, keep))
    for j in range(keep):
        x = np.exp(-nu * (x * x)) + betas
        orbits[:, j] = x
    return betas, orbits
