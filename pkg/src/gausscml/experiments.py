"""Experiment drivers: turn a :class:`Config` into output files and a record.

Every output file is a pure function of the configuration; the worker count
only changes wall time. The record file stores the full configuration so an
experiment can be rerun from it.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import Config
from .damage import run_damage, write_damage_field
from .exceptions import ValidationError
from .io import ensure_dir, read_kv, write_kv, write_table
from .lattice import EnsembleSpec, lattice_bifurcation
from .lyapunov import lyapunov_by_config, summarize
from .mapcore import MapParams, beta_grid, find_all_fixed_points, largest_fixed_point, single_map_bifurcation
from .observables import observable_counts
from .scaling import (
    ScalingCollapse, fit_corrected_power_law, fit_power_law, local_slopes, optimize_collapse,
)

KINDS = ("bifurcation", "critical-decay", "fss", "off-critical", "damage", "lyapunov")
RECORD_NAME = "record.txt"


@dataclass
class ExperimentRecord:
    kind: str
    config: Config
    outputs: list = field(default_factory=list)
    wall_time: float = 0.0
    code_version: str = __version__

    def write(self, path) -> Path:
        items = [
            ("kind", self.kind),
            ("code_version", self.code_version),
            ("wall_time", f"{self.wall_time:.3f}"),
            ("outputs", ",".join(str(p) for p in self.outputs)),
        ]
        items += [(f"config.{k}", v) for k, v in self.config.to_items()]
        return write_kv(path, items)

    @classmethod
    def read(cls, path) -> "ExperimentRecord":
        kv = read_kv(path)
        try:
            kind = kv.pop("kind")
            version = kv.pop("code_version")
            wall = float(kv.pop("wall_time"))
            outputs = [p for p in kv.pop("outputs").split(",") if p]
        except KeyError as exc:
            raise ValidationError(f"{path}: missing record key {exc}") from None
        overrides = {}
        for key, value in kv.items():
            if not key.startswith("config."):
                raise ValidationError(f"{path}: unexpected record key {key!r}")
            overrides[key[len("config."):]] = value
        return cls(kind, Config().with_overrides(overrides), outputs, wall, version)


def _spec(cfg: Config, *, beta=None, n_sites=None, t_max=None, n_configs=None) -> EnsembleSpec:
    return EnsembleSpec(
        n_sites=cfg.n_sites if n_sites is None else n_sites,
        n_configs=cfg.n_configs if n_configs is None else n_configs,
        params=MapParams(beta=cfg.beta if beta is None else beta, nu=cfg.nu),
        master_seed=cfg.seed, epsilon=cfg.epsilon,
        t_max=cfg.t_max if t_max is None else t_max,
        init_low=cfg.init_low, init_high=cfg.init_high,
    )


def _series_meta(spec: EnsembleSpec, time_unit: str, **extra):
    meta = {
        "N": spec.n_sites, "beta": spec.params.beta, "epsilon": spec.epsilon, "nu": spec.params.nu,
        "seed": spec.master_seed, "n_configs": spec.n_configs, "x_star": spec.params.x_star,
        "time_unit": time_unit,
    }
    meta.update(extra)
    return meta


OBS_UNIT = "observable_step (2 micro-steps)"


def _bifurcation(cfg: Config, out: Path, workers: int) -> list[Path]:
    betas = beta_grid(cfg.beta_start, cfg.beta_stop, cfg.beta_step)
    if np.any(betas <= -1.0):
        raise ValidationError("bifurcation betas must exceed -1")
    x_stars = [largest_fixed_point(MapParams(b, cfg.nu)).x_star for b in betas]
    paths = []
    rows = []
    for b, xs in zip(betas, x_stars):
        fps = find_all_fixed_points(MapParams(b, cfg.nu), cfg.fixed_point_grid)
        rows.append((b, len(fps), xs, fps[-1].derivative_at, fps[-1].stable))
    paths.append(write_table(out / "fixed_points.csv",
                             ("beta", "n_fixed_points", "x_star", "slope_at_x_star", "stable"), rows))
    _, orbits = single_map_bifurcation(betas, cfg.bif_transient, cfg.bif_keep, cfg.bif_x0, cfg.nu)
    rows = ((b, xs, j, orbits[i, j]) for i, (b, xs) in enumerate(zip(betas, x_stars))
            for j in range(orbits.shape[1]))
    paths.append(write_table(out / "single_map.csv", ("beta", "x_star", "sample", "x"), rows))
    _, values = lattice_bifurcation(betas, cfg.bif_lattice_sites, cfg.epsilon,
                                    cfg.bif_lattice_transient, cfg.bif_lattice_keep, cfg.nu, cfg.seed)
    rows = ((b, xs, cfg.bif_lattice_transient + j + 1, i, values[k, j, i])
            for k, (b, xs) in enumerate(zip(betas, x_stars))
            for j in range(values.shape[1]) for i in range(values.shape[2]))
    paths.append(write_table(out / "lattice.csv", ("beta", "x_star", "micro_time", "site", "x"), rows))
    return paths


def _fit_items(prefix, fit):
    return [(f"{prefix}", fit.exponent), (f"{prefix}_amplitude", fit.amplitude),
            (f"{prefix}_window", fit.window), (f"{prefix}_log_rms", fit.residual),
            (f"{prefix}_points", fit.n_points)]


def _critical_decay(cfg: Config, out: Path, workers: int) -> list[Path]:
    spec = _spec(cfg)
    counts = observable_counts(spec, sampling=cfg.sampling, workers=workers)
    F, P = counts.flip_rate_series(), counts.persistence_series()
    meta = _series_meta(spec, OBS_UNIT)
    paths = [F.to_csv(out / "flip_rate.csv", meta), P.to_csv(out / "persistence.csv", meta)]
    fit_f = fit_power_law(F, cfg.delta_window, decades=cfg.fit_decades)
    report = [("beta", spec.params.beta), ("n_sites", spec.n_sites), ("n_configs", spec.n_configs),
              ("t_max", spec.t_max)]
    report += _fit_items("delta", fit_f)
    try:
        fit_p = fit_power_law(P, cfg.theta_window, decades=cfg.fit_decades)
        report += _fit_items("theta", fit_p)
        theta = fit_p.exponent if cfg.correction_theta is None else cfg.correction_theta
        positive = P.window(1, P.times[P.values > 0].max())
        corr = fit_corrected_power_law(positive, theta, cfg.gamma_candidates,
                                       window=cfg.correction_window)
        report += [("correction_theta", corr.theta), ("gamma", corr.gamma), ("C", corr.C),
                   ("c1", corr.c1), ("correction_rms", corr.linearity_residual)]
    except (ArithmeticError, ValueError) as exc:
        report += [("theta_error", str(exc).replace("\n", " "))]
    paths.append(write_kv(out / "fit_report.txt", report))
    rows = []
    for series in (F, P):
        t_mid, slopes = local_slopes(series)
        rows += [(series.label, tm, s) for tm, s in zip(t_mid, slopes)]
    paths.append(write_table(out / "local_slopes.csv", ("label", "t", "slope"), rows))
    return paths


def fss_t_max(cfg: Config, n: int) -> int:
    """Observable steps simulated for lattice size ``n``."""
    return max(1, int(math.ceil(cfg.fss_time_factor * n ** cfg.fss_time_exponent)))


def _collapse_outputs(out, stem, family, kind, exponent, grid, decay, paths, report):
    est = ScalingCollapse(kind, exponent, decay).fit(family)
    res = est.result()
    paths.append(res.to_csv(out / f"{stem}_collapse.csv"))
    best, table = optimize_collapse(family, grid, kind=kind, decay_exponent=decay)
    paths.append(write_table(out / f"{stem}_quality.csv", ("exponent", "quality"), table))
    report += [(f"{stem}_quality", res.quality), (f"{stem}_best_exponent", best)]
    for name, q in sorted(res.branch_quality.items()):
        report.append((f"{stem}_quality_{name}", q))


def _fss(cfg: Config, out: Path, workers: int) -> list[Path]:
    if len(set(cfg.sizes)) < 3:
        raise ValidationError("fss needs at least 3 distinct sizes")
    fam_f, fam_p, paths = {}, {}, []
    for n in sorted(set(cfg.sizes)):
        spec = _spec(cfg, beta=cfg.beta_c, n_sites=n, t_max=fss_t_max(cfg, n))
        counts = observable_counts(spec, sampling=cfg.sampling, workers=workers)
        fam_f[n], fam_p[n] = counts.flip_rate_series(), counts.persistence_series()
        meta = _series_meta(spec, OBS_UNIT)
        paths.append(fam_f[n].to_csv(out / f"flip_rate_N{n}.csv", meta))
        paths.append(fam_p[n].to_csv(out / f"persistence_N{n}.csv", meta))
    report = [("z", cfg.z)]
    _collapse_outputs(out, "fss_F", fam_f, "finite_size", cfg.z, cfg.z_grid, cfg.delta, paths, report)
    _collapse_outputs(out, "fss_P", fam_p, "finite_size", cfg.z, cfg.z_grid, cfg.theta, paths, report)
    paths.append(write_kv(out / "fss_report.txt", report))
    return paths


def _signs(branches):
    return {"both": (1, -1), "above": (1,), "below": (-1,)}[branches]


def _off_critical(cfg: Config, out: Path, workers: int) -> list[Path]:
    if len(set(cfg.offsets)) < 3 or any(d <= 0 for d in cfg.offsets):
        raise ValidationError("off-critical needs at least 3 distinct positive offsets")
    fam_f, fam_p, paths = {}, {}, []
    p_signs = _signs(cfg.p_branches)
    for sign in _signs(cfg.branches):
        for d in sorted(set(cfg.offsets)):
            offset = sign * d
            beta = round(cfg.beta_c + offset, 12)
            spec = _spec(cfg, beta=beta)
            counts = observable_counts(spec, sampling=cfg.sampling, workers=workers)
            F, P = counts.flip_rate_series(), counts.persistence_series()
            fam_f[offset] = F
            if sign in p_signs:
                fam_p[offset] = P
            branch = "above" if sign > 0 else "below"
            meta = _series_meta(spec, OBS_UNIT, offset=offset, branch=branch)
            paths.append(F.to_csv(out / f"flip_rate_{branch}_{d:g}.csv", meta))
            paths.append(P.to_csv(out / f"persistence_{branch}_{d:g}.csv", meta))
    report = [("nu_par", cfg.nu_par), ("beta_c", cfg.beta_c)]
    _collapse_outputs(out, "offcrit_F", fam_f, "off_critical", cfg.nu_par, cfg.nu_par_grid,
                      cfg.delta, paths, report)
    if fam_p:
        _collapse_outputs(out, "offcrit_P", fam_p, "off_critical", cfg.nu_par, cfg.nu_par_grid,
                          cfg.theta, paths, report)
    paths.append(write_kv(out / "offcrit_report.txt", report))
    return paths


def _damage(cfg: Config, out: Path, workers: int) -> list[Path]:
    spec = _spec(cfg)
    sites = None
    if cfg.damage_fraction is None:
        sites = [spec.n_sites // 2 if cfg.damage_site is None else cfg.damage_site]
    res = run_damage(spec, k=cfg.damage_k, sites=sites, fraction=cfg.damage_fraction,
                     delta=cfg.damage_delta, t_max=cfg.damage_t_max,
                     record_field=cfg.damage_field, workers=workers)
    meta = _series_meta(spec, "micro_step", k=cfg.damage_k, delta=cfg.damage_delta)
    paths = [res.fine.to_csv(out / "damage_fine.csv", meta),
             res.coarse.to_csv(out / "damage_coarse.csv", meta)]
    rows = [(i, a, b) for i, (a, b) in enumerate(zip(res.final_fine, res.final_coarse))]
    paths.append(write_table(out / "damage_final.csv", ("config", "d_final", "D_final"), rows))
    if res.field is not None:
        paths.append(write_damage_field(out / "damage_field.txt", res.field, spec,
                                        cfg.damage_delta, sites))
    return paths


def _lyapunov(cfg: Config, out: Path, workers: int) -> list[Path]:
    rows = []
    for beta in beta_grid(cfg.beta_start, cfg.beta_stop, cfg.beta_step):
        est = lyapunov_by_config(_spec(cfg, beta=float(beta)), transient=cfg.lyap_transient,
                                 measure_steps=cfg.lyap_steps, workers=workers)
        rows.append((float(beta), *summarize(est)))
    return [write_table(out / "lyapunov.csv", ("beta", "lambda_max", "stderr"), rows)]


_RUNNERS = {
    "bifurcation": _bifurcation, "critical-decay": _critical_decay, "fss": _fss,
    "off-critical": _off_critical, "damage": _damage, "lyapunov": _lyapunov,
}


def run_experiment(kind: str, cfg: Config, out_dir, workers: int = 1) -> ExperimentRecord:
    """Run one experiment, write its outputs and ``record.txt`` into ``out_dir``."""
    if kind not in _RUNNERS:
        raise ValidationError(f"unknown experiment {kind!r}; choose from {', '.join(KINDS)}")
    out = ensure_dir(out_dir)
    start = time.perf_counter()
    paths = _RUNNERS[kind](cfg, out, workers)
    record = ExperimentRecord(kind, cfg, [p.name for p in paths], time.perf_counter() - start)
    record.write(out / RECORD_NAME)
    return record


def rerun(record_path, out_dir, workers: int = 1) -> ExperimentRecord:
    record = ExperimentRecord.read(record_path)
    return run_experiment(record.kind, record.config, out_dir, workers)
