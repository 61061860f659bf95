"""Flat ``key=value`` experiment configuration.

One setting per line, ``#`` starts a comment line. Unknown keys are an error
so that a typo in a physical parameter cannot silently fall back to a default.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .exceptions import ValidationError
from .io import format_value, parse_kv_lines


def _float_list(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _int_list(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _opt_float(text):
    return None if text.lower() in ("", "none", "auto") else float(text)


def _opt_int(text):
    return None if text.lower() in ("", "none", "auto") else int(text)


def _opt_window(text):
    if text.lower() in ("", "none", "auto"):
        return None
    lo, hi = _float_list(text)
    return (lo, hi)


def _bool(text):
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_PARSERS = {
    "float": float, "int": int, "str": str, "floats": _float_list, "ints": _int_list,
    "opt_float": _opt_float, "opt_int": _opt_int, "window": _opt_window, "bool": _bool,
}


def _f(default, kind, doc=""):
    return field(default=default, metadata={"kind": kind, "doc": doc})


@dataclass(frozen=True)
class Config:
    # model
    nu: float = _f(7.5, "float", "Gauss map width parameter")
    epsilon: float = _f(0.4, "float", "diffusive coupling")
    beta_c: float = _f(-0.6773, "float", "critical beta")
    beta: float = _f(-0.6773, "float", "beta for critical-decay and damage")
    # ensembles
    n_sites: int = _f(20_000, "int")
    n_configs: int = _f(200, "int")
    t_max: int = _f(10_000, "int", "observable steps (pairs of micro-steps)")
    seed: int = _f(12345, "int")
    init_low: float | None = _f(None, "opt_float", "auto = beta")
    init_high: float | None = _f(None, "opt_float", "auto = 1 + beta")
    sampling: str = _f("raw", "str", "raw or log")
    # sweeps (bifurcation, lyapunov)
    beta_start: float = _f(-0.9, "float")
    beta_stop: float = _f(0.5, "float")
    beta_step: float = _f(0.005, "float")
    # bifurcation
    bif_x0: float = _f(0.1, "float")
    bif_transient: int = _f(1000, "int")
    bif_keep: int = _f(100, "int")
    bif_lattice_sites: int = _f(100, "int")
    bif_lattice_transient: int = _f(1000, "int")
    bif_lattice_keep: int = _f(20, "int")
    fixed_point_grid: int = _f(10_000, "int")
    # fitting
    fit_decades: float = _f(1.5, "float")
    delta_window: tuple | None = _f(None, "window", "t_min,t_max or auto")
    theta_window: tuple | None = _f(None, "window", "t_min,t_max or auto")
    gamma_candidates: tuple = _f((0.1, 0.2, 0.25, 1 / 3, 0.4, 0.5, 0.6, 0.75, 1.0), "floats")
    correction_theta: float | None = _f(None, "opt_float", "auto = fitted theta")
    correction_window: tuple | None = _f(None, "window")
    delta: float = _f(0.158, "float", "decay exponent of F used in collapse records")
    theta: float = _f(1.51, "float", "decay exponent of P used in collapse records")
    # finite-size scaling
    sizes: tuple = _f((40, 80, 160, 320, 640, 1280), "ints")
    z: float = _f(1.58, "float")
    z_grid: tuple = _f((1.3, 1.4, 1.5, 1.58, 1.7, 1.8, 1.9, 2.0), "floats")
    fss_time_factor: float = _f(4.0, "float", "t_max(N) = factor * N**fss_time_exponent")
    fss_time_exponent: float = _f(1.58, "float")
    # off-critical scaling
    offsets: tuple = _f((0.005, 0.01, 0.02), "floats", "Delta = |beta - beta_c| values")
    branches: str = _f("both", "str", "both, above or below")
    p_branches: str = _f("above", "str", "branches used for the persistence collapse")
    nu_par: float = _f(1.73, "float")
    nu_par_grid: tuple = _f((1.3, 1.5, 1.73, 1.9, 2.2), "floats")
    # damage
    damage_k: int = _f(2, "int")
    damage_delta: float = _f(0.1, "float")
    damage_site: int | None = _f(None, "opt_int", "auto = N // 2")
    damage_fraction: float | None = _f(None, "opt_float", "perturb a fraction of sites instead")
    damage_t_max: int = _f(10_000, "int", "micro-steps")
    damage_field: bool = _f(True, "bool")
    # lyapunov
    lyap_transient: int = _f(10_000, "int", "micro-steps")
    lyap_steps: int = _f(100_000, "int", "micro-steps")

    def __post_init__(self):
        if self.sampling not in ("raw", "log"):
            raise ValidationError("sampling must be 'raw' or 'log'")
        for name in ("branches", "p_branches"):
            if getattr(self, name) not in ("both", "above", "below"):
                raise ValidationError(f"{name} must be both, above or below")

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def to_items(self) -> list[tuple[str, str]]:
        out = []
        for f in fields(self):
            value = getattr(self, f.name)
            out.append((f.name, "auto" if value is None else format_value(value)))
        return out

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in self.to_items())

    def with_overrides(self, overrides: dict[str, str]) -> "Config":
        known = {f.name: f for f in fields(self)}
        values = {}
        for key, text in overrides.items():
            if key not in known:
                raise ValidationError(f"unknown config key {key!r}")
            kind = known[key].metadata["kind"]
            try:
                values[key] = _PARSERS[kind](text.strip())
            except (ValueError, TypeError) as exc:
                raise ValidationError(f"bad value for {key}: {text!r} ({exc})") from None
        return replace(self, **values)

    @classmethod
    def from_text(cls, text: str, source="<config>") -> "Config":
        return cls().with_overrides(parse_kv_lines(text.splitlines(), source))

    @classmethod
    def from_file(cls, path) -> "Config":
        path = Path(path)
        return cls.from_text(path.read_text(encoding="utf-8"), str(path))


def parse_overrides(pairs) -> dict[str, str]:
    out = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ValidationError(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        out[key.strip()] = value
    return out
