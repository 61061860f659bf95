"""Exponent estimation and scaling collapses.

The estimators follow the scikit-learn conventions (constructor stores
hyper-parameters only, ``fit`` returns ``self``, fitted attributes end in an
underscore) so they work with ``clone``, ``get_params`` and friends. The
module-level functions are thin wrappers returning plain result records.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, clone
from sklearn.utils.validation import check_is_fitted

from .exceptions import InsufficientOverlap, NonPositiveValue, ValidationError, WindowTooSmall
from .io import write_table
from .series import ObservableSeries

MIN_FIT_POINTS = 5


def _as_times(t) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 2 and t.shape[1] == 1:
        t = t[:, 0]
    if t.ndim != 1:
        raise ValidationError(f"times must be 1-D or a single column, got shape {t.shape}")
    if np.any(t <= 0) or not np.all(np.isfinite(t)):
        raise ValidationError("times must be positive and finite")
    return t


def _series_xy(series_or_t, y=None):
    if isinstance(series_or_t, ObservableSeries):
        return series_or_t.times.astype(np.float64), series_or_t.values
    if y is None:
        raise ValidationError("values are required when times are given as an array")
    t = _as_times(series_or_t)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != t.shape:
        raise ValidationError("times and values must have the same length")
    return t, y


def _window_mask(t, window, decades):
    if window is None:
        hi = t.max()
        lo = hi / 10.0 ** decades
    else:
        lo, hi = window
        if not lo < hi:
            raise ValidationError(f"window must satisfy t_min < t_max, got {window}")
    return (t >= lo) & (t <= hi)


class PowerLawRegressor(RegressorMixin, BaseEstimator):
    """Least-squares line through ``(log t, log y)``; ``y ~ amplitude * t**-exponent``.

    Parameters
    ----------
    window : (t_min, t_max) or None
        Inclusive fit window. ``None`` means the last ``decades`` decades of
        the supplied times.
    decades : float
        Width of the default window.
    """

    def __init__(self, window=None, decades=1.5):
        self.window = window
        self.decades = decades

    def fit(self, X, y):
        t = _as_times(X)
        y = np.asarray(y, dtype=np.float64)
        if y.shape != t.shape:
            raise ValidationError("X and y must have the same length")
        mask = _window_mask(t, self.window, self.decades)
        tw, yw = t[mask], y[mask]
        if tw.size < MIN_FIT_POINTS:
            raise WindowTooSmall(f"only {tw.size} points in the fit window, need {MIN_FIT_POINTS}")
        if np.any(yw <= 0):
            bad = tw[yw <= 0][0]
            raise NonPositiveValue(f"non-positive value at t={bad:g} inside the fit window")
        lt, ly = np.log(tw), np.log(yw)
        A = np.column_stack([np.ones_like(lt), lt])
        (intercept, slope), *_ = np.linalg.lstsq(A, ly, rcond=None)
        self.exponent_ = float(-slope)
        self.amplitude_ = float(np.exp(intercept))
        self.residual_ = float(np.sqrt(np.mean((ly - (intercept + slope * lt)) ** 2)))
        self.window_ = (float(tw.min()), float(tw.max()))
        self.n_points_ = int(tw.size)
        return self

    def predict(self, X):
        check_is_fitted(self, "exponent_")
        return self.amplitude_ * _as_times(X) ** -self.exponent_


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    amplitude: float
    window: tuple[float, float]
    residual: float
    n_points: int = 0


def fit_power_law(series, window=None, *, values=None, decades: float = 1.5) -> PowerLawFit:
    """Fit ``value ~ A t^-e`` to a series (or to ``times, values=...``) in ``window``."""
    t, y = _series_xy(series, values)
    est = PowerLawRegressor(window=window, decades=decades).fit(t, y)
    return PowerLawFit(est.exponent_, est.amplitude_, est.window_, est.residual_, est.n_points_)


def local_slopes(series, *, values=None, points_per_decade: int = 10):
    """Effective exponent ``-dlog(value)/dlog(t)`` between log-spaced sample times.

    Returns ``(t_mid, slopes)`` with ``t_mid`` the geometric midpoints. Pairs
    touching a non-positive value give ``nan``.
    """
    t, y = _series_xy(series, values)
    n = max(2, int(np.ceil(np.log10(t.max() / t.min()) * points_per_decade)) + 1)
    targets = np.logspace(np.log10(t.min()), np.log10(t.max()), n)
    idx = np.unique(np.clip(np.searchsorted(t, targets), 0, t.size - 1))
    ts, ys = t[idx], y[idx]
    with np.errstate(divide="ignore", invalid="ignore"):
        ly = np.where(ys > 0, np.log(np.where(ys > 0, ys, 1.0)), np.nan)
        slopes = -np.diff(ly) / np.diff(np.log(ts))
    return np.sqrt(ts[1:] * ts[:-1]), slopes


class CorrectedPowerLawRegressor(RegressorMixin, BaseEstimator):
    """``y ~ C t^-theta (1 + c1 t^-gamma)`` with ``theta`` fixed and ``gamma`` chosen from a list.

    For each candidate ``gamma`` the compensated values ``y t^theta`` are
    regressed linearly on ``t^-gamma``; the candidate with the smallest RMS
    residual wins.
    """

    def __init__(self, theta=1.51, gamma_candidates=(1 / 3,), window=None):
        self.theta = theta
        self.gamma_candidates = gamma_candidates
        self.window = window

    def fit(self, X, y):
        t = _as_times(X)
        y = np.asarray(y, dtype=np.float64)
        if self.window is not None:
            mask = _window_mask(t, self.window, None)
            t, y = t[mask], y[mask]
        if t.size < 3:
            raise WindowTooSmall("need at least 3 points for the corrected fit")
        if np.any(y <= 0):
            raise NonPositiveValue("corrected power-law fit needs strictly positive values")
        gammas = np.atleast_1d(np.asarray(self.gamma_candidates, dtype=np.float64))
        if gammas.size == 0 or np.any(gammas <= 0):
            raise ValidationError("gamma candidates must be a non-empty list of positive numbers")
        comp = y * t ** self.theta
        rows = []
        for gamma in gammas:
            s = t ** -gamma
            A = np.column_stack([np.ones_like(s), s])
            (c0, slope), *_ = np.linalg.lstsq(A, comp, rcond=None)
            resid = float(np.sqrt(np.mean((comp - (c0 + slope * s)) ** 2)))
            rows.append((float(gamma), float(c0), float(slope / c0), resid))
        best = min(range(len(rows)), key=lambda i: rows[i][3])
        self.gamma_, self.C_, self.c1_, self.linearity_residual_ = rows[best]
        self.candidates_ = rows
        return self

    def predict(self, X):
        check_is_fitted(self, "gamma_")
        t = _as_times(X)
        return self.C_ * t ** -self.theta * (1.0 + self.c1_ * t ** -self.gamma_)


@dataclass(frozen=True)
class CorrectedFit:
    theta: float
    gamma: float
    C: float
    c1: float
    linearity_residual: float


def fit_corrected_power_law(series, theta: float, gamma_candidates, *, values=None,
                            window=None) -> CorrectedFit:
    t, y = _series_xy(series, values)
    est = CorrectedPowerLawRegressor(theta, gamma_candidates, window).fit(t, y)
    if not est.gamma_ > 0:
        raise ValidationError("fitted gamma must be positive")
    return CorrectedFit(float(theta), est.gamma_, est.C_, est.c1_, est.linearity_residual_)


@dataclass(frozen=True, eq=False)
class RescaledCurve:
    curve_id: str
    branch: str
    t_c: float
    x: np.ndarray
    y: np.ndarray


@dataclass(frozen=True, eq=False)
class CollapseResult:
    exponent_pair: tuple[float, float]
    rescaled_curves: list
    quality: float
    branch_quality: dict

    def to_csv(self, path):
        rows = []
        for c in self.rescaled_curves:
            rows.extend((x, y, c.curve_id) for x, y in zip(c.x, c.y))
        return write_table(path, ("t_rescaled", "value_rescaled", "curve_id"), rows)


def _positive_support(t, v):
    """Leading stretch of strictly positive values (a series stops at its first zero)."""
    bad = np.flatnonzero(~(v > 0))
    end = bad[0] if bad.size else v.size
    return t[:end], v[:end]


def _normalize(t, v, t_c):
    """Rescale by ``t_c`` and by ``v(t_c)`` from log-log interpolation; ``None`` if out of range."""
    t, v = _positive_support(t, v)
    if t.size < 2 or not (t[0] <= t_c <= t[-1]):
        return None
    lv_c = np.interp(np.log(t_c), np.log(t), np.log(v))
    return t / t_c, v / math.exp(lv_c)


def _spread(curves, n_grid, min_decades):
    lo = max(float(x[0]) for x, _ in curves)
    hi = min(float(x[-1]) for x, _ in curves)
    if not hi > lo or math.log10(hi / lo) < min_decades:
        raise InsufficientOverlap(
            f"rescaled curves overlap over {max(0.0, math.log10(hi / lo)) if hi > lo else 0:.2f} "
            f"decades, need {min_decades}")
    grid = np.log10(np.logspace(np.log10(lo), np.log10(hi), n_grid))
    grid[0], grid[-1] = np.log10(lo), np.log10(hi)
    stack = np.array([np.interp(grid, np.log10(x), np.log10(y)) for x, y in curves])
    median = np.median(stack, axis=0)
    return float(np.mean((stack - median) ** 2))


class ScalingCollapse(BaseEstimator):
    """Rescale a family of decay curves by a characteristic time and score the overlap.

    ``kind='finite_size'``: keys are system sizes ``N`` and ``t_c = N**exponent``.
    ``kind='off_critical'``: keys are signed offsets ``beta - beta_c`` and
    ``t_c = |offset| ** -exponent``; the two signs form separate branches.

    Each curve is divided by its own value at ``t_c`` (log-log interpolation of
    the data) so all curves pass through ``(1, 1)``. Quality is the mean
    squared deviation of ``log10`` values from the pointwise median on a common
    log grid spanning the overlap of the rescaled curves; lower is better.
    When ``t_c`` lies outside the measured positive part of some curve, the
    family cannot be normalized and the quality is ``inf``.
    """

    def __init__(self, kind="finite_size", exponent=1.58, decay_exponent=0.158, n_grid=50,
                 min_overlap_decades=1.0):
        self.kind = kind
        self.exponent = exponent
        self.decay_exponent = decay_exponent
        self.n_grid = n_grid
        self.min_overlap_decades = min_overlap_decades

    def _t_c(self, key):
        if self.kind == "finite_size":
            return float(key) ** self.exponent
        if self.kind == "off_critical":
            return abs(float(key)) ** -self.exponent
        raise ValidationError(f"unknown collapse kind {self.kind!r}")

    def _branch(self, key):
        if self.kind == "finite_size":
            return "all"
        return "above" if float(key) > 0 else "below"

    def fit(self, X, y=None):
        family = dict(X)
        keys = [float(k) for k in family]
        if self.kind == "off_critical" and any(k == 0 for k in keys):
            raise ValidationError("off-critical offsets must be non-zero")
        distinct = {abs(k) for k in keys} if self.kind == "off_critical" else set(keys)
        if len(distinct) < 3:
            raise ValidationError(f"need at least 3 distinct curve parameters, got {len(distinct)}")
        curves, branches = [], {}
        normalizable = True
        for key in sorted(family, key=float):
            s = family[key]
            t_c = self._t_c(key)
            scaled = _normalize(s.times.astype(np.float64), s.values, t_c)
            branch = self._branch(key)
            if scaled is None:
                normalizable = False
                continue
            curve = RescaledCurve(f"{key:g}", branch, t_c, scaled[0], scaled[1])
            curves.append(curve)
            branches.setdefault(branch, []).append(curve)
        branch_quality = {}
        if normalizable:
            for name, members in branches.items():
                if len(members) < 2:
                    branch_quality[name] = 0.0
                    continue
                branch_quality[name] = _spread([(c.x, c.y) for c in members], self.n_grid,
                                               self.min_overlap_decades)
            quality = float(np.mean(list(branch_quality.values())))
        else:
            branch_quality = {name: math.inf for name in {self._branch(k) for k in family}}
            quality = math.inf
        self.curves_ = curves
        self.branch_quality_ = branch_quality
        self.quality_ = quality
        self.normalizable_ = normalizable
        return self

    def score(self, X, y=None):
        return -self.fit(X).quality_

    def result(self) -> CollapseResult:
        check_is_fitted(self, "quality_")
        return CollapseResult((float(self.decay_exponent), float(self.exponent)), self.curves_,
                              self.quality_, dict(self.branch_quality_))


def finite_size_collapse(series_by_N, z: float, delta_or_theta: float, **kw) -> CollapseResult:
    return ScalingCollapse("finite_size", z, delta_or_theta, **kw).fit(series_by_N).result()


def off_critical_collapse(series_by_offset, nu_par: float, delta_or_theta: float,
                          **kw) -> CollapseResult:
    """Keys are signed offsets ``beta - beta_c``; their sign selects the branch."""
    return ScalingCollapse("off_critical", nu_par, delta_or_theta, **kw).fit(series_by_offset).result()


def optimize_collapse(family, grid, *, kind="finite_size", decay_exponent=0.158, **kw):
    """Scan candidate exponents; returns ``(best, [(exponent, quality), ...])``.

    Candidates whose rescaled curves do not overlap enough score ``inf``.
    Ties go to the first candidate in ``grid``.
    """
    grid = [float(g) for g in np.atleast_1d(grid)]
    if not grid:
        raise ValidationError("candidate grid is empty")
    base = ScalingCollapse(kind, grid[0], decay_exponent, **kw)
    table = []
    for g in grid:
        est = clone(base).set_params(exponent=g)
        try:
            q = est.fit(family).quality_
        except InsufficientOverlap:
            q = math.inf
        table.append((g, q))
    best = min(range(len(table)), key=lambda i: table[i][1])
    return table[best][0], table
