"""Acceptance suite: one verdict line per criterion, at the stated tolerances.

Desk-scale criteria (1, 2, 4 to 8) are marked ``slow``; together they take
about an hour on one core. Set ``GAUSSCML_ACCEPTANCE_CACHE=<dir>`` to keep raw
simulation arrays between runs and ``GAUSSCML_WORKERS=<n>`` to use more
processes (results do not depend on the worker count).
"""

import hashlib
import os
from pathlib import Path

import numpy as np
import pytest

from gausscml.cli import EXIT_OK, main
from gausscml.damage import run_damage
from gausscml.lattice import EnsembleSpec, LatticeState, init_random, step
from gausscml.lyapunov import jacobian_vector_product, lyapunov_by_config, summarize, zero_crossing
from gausscml.mapcore import MapParams, beta_grid, largest_fixed_point
from gausscml.observables import observable_counts
from gausscml.scaling import ScalingCollapse, fit_corrected_power_law, fit_power_law
from gausscml.series import ObservableSeries

BETA_C = -0.6773
SEED = 12345
WORKERS = int(os.environ.get("GAUSSCML_WORKERS", os.cpu_count() or 1))
CACHE = os.environ.get("GAUSSCML_ACCEPTANCE_CACHE")


@pytest.fixture
def verdict(record_property):
    def emit(tag, ok, detail):
        line = f"criterion {tag:<4} {'PASS' if ok else 'FAIL'}: {detail}"
        print(line)
        record_property("acceptance", line)
        return ok
    return emit


def cached(name, params, compute):
    """Run ``compute()`` (a dict of arrays), optionally memoized on disk by ``params``."""
    if not CACHE:
        return compute()
    key = hashlib.sha256(repr(sorted(params.items())).encode()).hexdigest()[:16]
    path = Path(CACHE) / f"{name}-{key}.npz"
    if path.exists():
        with np.load(path) as data:
            return {k: data[k] for k in data.files}
    out = compute()
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, **out)
    return out


def spec(beta, n_sites, n_configs, t_max):
    return EnsembleSpec(n_sites=n_sites, n_configs=n_configs, params=MapParams(beta),
                        master_seed=SEED, t_max=t_max)


def counts_arrays(beta, n_sites, n_configs, t_max, sampling="raw"):
    params = dict(beta=beta, n_sites=n_sites, n_configs=n_configs, t_max=t_max,
                  sampling=sampling, seed=SEED)

    def compute():
        c = observable_counts(spec(beta, n_sites, n_configs, t_max), sampling=sampling,
                              workers=WORKERS)
        return {"times": c.times, "flips": c.flips, "alive": c.alive, "n_sites": np.array(n_sites)}
    return cached("counts", params, compute)


def ensemble_series(arrays):
    """Ensemble-mean ``(F, P)`` series from count arrays."""
    n_sites = int(arrays["n_sites"])
    n = arrays["flips"].shape[0]
    F = ObservableSeries(arrays["times"], arrays["flips"].mean(axis=0) / n_sites, n, "flip_rate")
    P = ObservableSeries(arrays["times"], arrays["alive"].mean(axis=0) / n_sites, n, "persistence")
    return F, P


@pytest.fixture(scope="module")
def critical_run():
    return ensemble_series(counts_arrays(BETA_C, 20_000, 200, 10_000))


# 1, 2: critical exponents -------------------------------------------------------------

@pytest.mark.slow
def test_01_flip_rate_exponent(critical_run, verdict):
    fit = fit_power_law(critical_run[0])
    ok = abs(fit.exponent - 0.158) <= 0.03
    verdict("01", ok, f"delta = {fit.exponent:.4f} over t in [{fit.window[0]:g}, {fit.window[1]:g}] "
                      f"(target 0.158 +/- 0.03)")
    assert ok


@pytest.mark.slow
def test_02_persistence_exponent(critical_run, verdict):
    fit = fit_power_law(critical_run[1])
    ok = abs(fit.exponent - 1.51) <= 0.15
    verdict("02", ok, f"theta = {fit.exponent:.4f} over t in [{fit.window[0]:g}, {fit.window[1]:g}] "
                      f"(target 1.51 +/- 0.15)")
    assert ok


# 3: corrected fit on exact synthetic input --------------------------------------------

def test_03_corrected_fit_round_trip(verdict):
    t = np.arange(10, 10_001, dtype=float)
    y = 13 * t ** -1.51 * (1 - 1.7692 * t ** (-1 / 3))
    fit = fit_corrected_power_law(t, 1.51, (0.1, 0.2, 0.25, 1 / 3, 0.4, 0.5, 0.75, 1.0), values=y)
    ok = (abs(fit.gamma - 1 / 3) <= 0.01 / 3 and abs(fit.C - 13) <= 0.13
          and abs(fit.c1 + 1.7692) <= 0.017692)
    verdict("03", ok, f"gamma = {fit.gamma:.6f}, C = {fit.C:.6f}, c1 = {fit.c1:.6f} "
                      f"(targets 1/3, 13, -1.7692 within 1%)")
    assert ok


# 4: finite-size collapse --------------------------------------------------------------

FSS_SIZES = (40, 80, 160, 320)


@pytest.fixture(scope="module")
def fss_families():
    fam_f, fam_p = {}, {}
    for n in FSS_SIZES:
        # t_max = N^2 keeps t_c = N^z inside the data for every z up to 2
        fam_f[n], fam_p[n] = ensemble_series(counts_arrays(BETA_C, n, 1000, n * n, "log"))
    return fam_f, fam_p


def qualities(family, kind, exponents):
    return {e: ScalingCollapse(kind, e).fit(family).quality_ for e in exponents}


def fmt_q(q):
    return ", ".join(f"q({e:g}) = {v:.3e}" for e, v in q.items())


@pytest.mark.slow
@pytest.mark.parametrize("which,tag", [(0, "04a"), (1, "04b")])
def test_04_finite_size_collapse(fss_families, which, tag, verdict):
    q = qualities(fss_families[which], "finite_size", (1.30, 1.58, 2.00))
    ok = q[1.58] < q[1.30] and q[1.58] < q[2.00]
    name = "F" if which == 0 else "P"
    verdict(tag, ok, f"{name} collapse over N = {FSS_SIZES}: {fmt_q(q)}")
    assert ok


# 5: off-critical collapse -------------------------------------------------------------

OFFSETS = (0.005, 0.01, 0.02)


@pytest.fixture(scope="module")
def offcrit_families():
    fam_f, fam_p = {}, {}
    for sign in (1, -1):
        for d in OFFSETS:
            off = sign * d
            F, P = ensemble_series(counts_arrays(round(BETA_C + off, 12), 20_000, 200, 10_000))
            fam_f[off] = F
            if sign > 0:
                fam_p[off] = P
    return fam_f, fam_p


def describe_offcrit(est_by_exp):
    parts = []
    for e, est in est_by_exp.items():
        if not est.normalizable_:
            parts.append(f"q({e:g}) = inf (t_c beyond t_max for some offset)")
        else:
            branches = ", ".join(f"{k} {v:.3e}" for k, v in sorted(est.branch_quality_.items()))
            parts.append(f"q({e:g}) = {est.quality_:.3e} [{branches}]")
    return "; ".join(parts)


@pytest.mark.slow
@pytest.mark.parametrize("which,tag", [(0, "05a"), (1, "05b")])
def test_05_off_critical_collapse(offcrit_families, which, tag, verdict):
    family = offcrit_families[which]
    ests = {e: ScalingCollapse("off_critical", e).fit(family) for e in (1.30, 1.73, 2.20)}
    q = {e: est.quality_ for e, est in ests.items()}
    ok = q[1.73] < q[1.30] and q[1.73] < q[2.20]
    name = "F, both branches" if which == 0 else "P, above-critical branch"
    verdict(tag, ok, f"{name}: {describe_offcrit(ests)}")
    assert ok


# 6: damage ----------------------------------------------------------------------------

def damage_final(beta):
    params = dict(beta=beta, n_sites=1000, n_configs=50, t_max=10_000, seed=SEED, delta=0.1)

    def compute():
        res = run_damage(spec(beta, 1000, 50, 10_000), k=2, delta=0.1, t_max=10_000,
                         record_field=False, workers=WORKERS)
        return {"fine": res.final_fine, "coarse": res.final_coarse}
    return cached("damage", params, compute)


@pytest.mark.slow
def test_06a_damage_persists_at_critical(verdict):
    out = damage_final(BETA_C)
    frac = float(np.mean(out["coarse"] > 0))
    ok = frac >= 0.9
    verdict("06a", ok, f"D(t_max) > 0 in {frac:.0%} of 50 configurations at beta_c (need >= 90%)")
    assert ok


@pytest.mark.slow
def test_06b_damage_heals_below_transition(verdict):
    out = damage_final(-0.79)
    frac = float(np.mean(out["fine"] < 1e-8))
    ok = frac >= 0.9
    verdict("06b", ok, f"d(t_max) < 1e-8 in {frac:.0%} of 50 configurations at beta = -0.79 "
                       f"(need >= 90%; median d = {np.median(out['fine']):.3g})")
    assert ok


# 7: Lyapunov sign change --------------------------------------------------------------

def lyapunov_estimates(beta):
    params = dict(beta=beta, n_sites=1000, n_configs=10, transient=10_000, measure=100_000,
                  seed=SEED)

    def compute():
        est = lyapunov_by_config(spec(beta, 1000, 10, 1), transient=10_000, measure_steps=100_000,
                                 workers=WORKERS)
        return {"est": est}
    return cached("lyapunov", params, compute)["est"]


@pytest.mark.slow
def test_07_lyapunov_sign_change(verdict):
    betas = beta_grid(-0.82, -0.70, 0.01)
    lams = [summarize(lyapunov_estimates(float(b)))[0] for b in betas]
    crossing = zero_crossing(betas, lams)
    lam_c, err_c = summarize(lyapunov_estimates(BETA_C))
    in_range = crossing is not None and -0.80 < crossing < -0.76
    distinct = abs(lam_c) > 2 * err_c
    ok = in_range and distinct
    where = "none" if crossing is None else f"{crossing:.4f}"
    verdict("07", ok, f"zero crossing at beta = {where} (need inside (-0.80, -0.76)); "
                      f"lambda(beta_c) = {lam_c:.4f} +/- {err_c:.4f} (need |lambda| > 2 stderr)")
    assert ok


# 8: phase discrimination --------------------------------------------------------------

PHASE_N, PHASE_CONFIGS, PHASE_T = 2000, 50, 10_000


@pytest.mark.slow
def test_08a_active_phase(verdict):
    arrays = counts_arrays(-0.65, PHASE_N, PHASE_CONFIGS, PHASE_T)
    F, P = ensemble_series(arrays)
    late = F.values[F.times > PHASE_T / 10].mean()
    ok = late > 0.01 and P.values[-1] < 1e-3
    verdict("08a", ok, f"beta = -0.65: mean F over last decade = {late:.4f} (need > 0.01), "
                       f"P(t_max) = {P.values[-1]:.2e} (need < 1e-3)")
    assert ok


@pytest.mark.slow
def test_08b_absorbing_phase(verdict):
    arrays = counts_arrays(-0.69, PHASE_N, PHASE_CONFIGS, PHASE_T)
    _, P = ensemble_series(arrays)
    frozen = float(np.mean(arrays["flips"][:, -1] == 0))
    ok = frozen >= 0.9 and P.values[-1] > 0.05
    verdict("08b", ok, f"beta = -0.69: F(t_max) = 0 in {frozen:.0%} of configurations (need >= 90%), "
                       f"P(t_max) = {P.values[-1]:.4f} (need > 0.05)")
    assert ok


# 9 to 13: properties ------------------------------------------------------------------

def naive_step(cells, eps, p):
    n = len(cells)
    f = [np.exp(-p.nu * (c * c)) + p.beta for c in cells]
    return np.array([(1.0 - eps) * f[i] + (eps / 2.0) * (f[(i + 1) % n] + f[(i - 1) % n])
                     for i in range(n)])


def test_09_oracle_equivalence(verdict):
    rng = np.random.default_rng(9)
    mismatches = 0
    for n in (3, 5, 64):
        for _ in range(100):
            beta = rng.uniform(-0.85, -0.5)
            p = MapParams(beta)
            cells = rng.uniform(beta, 1 + beta, n)
            fast = step(LatticeState(cells, 0.4, p)).cells
            mismatches += not np.array_equal(fast, naive_step(cells, 0.4, p))
    ok = mismatches == 0
    verdict("09", ok, f"{mismatches} of 300 states differ from the per-site formula (bit-exact)")
    assert ok


def test_10_jacobian_check(verdict):
    rng = np.random.default_rng(10)
    h, worst = 1e-7, 0.0
    for _ in range(50):
        beta = rng.uniform(-0.8, -0.6)
        p = MapParams(beta)
        x, v = rng.uniform(beta, 1 + beta, 16), rng.standard_normal(16)
        fd = (step(LatticeState(x + h * v, 0.4, p)).cells
              - step(LatticeState(x - h * v, 0.4, p)).cells) / (2 * h)
        w = jacobian_vector_product(LatticeState(x, 0.4, p), v)
        worst = max(worst, float(np.linalg.norm(w - fd) / np.linalg.norm(w)))
    ok = worst < 1e-5
    verdict("10", ok, f"worst relative error {worst:.2e} over 50 pairs at N = 16 (need < 1e-5)")
    assert ok


def test_11_fixed_points_and_invariance(verdict):
    betas = beta_grid(-0.9, 0.5, 0.005)
    worst = max(largest_fixed_point(MapParams(float(b))).residual for b in betas)
    p = MapParams(BETA_C)
    x_star = largest_fixed_point(p, tol=1e-16).x_star
    drift = float(np.max(np.abs(step(LatticeState(np.full(100, x_star), 0.4, p)).cells - x_star)))
    ok = worst < 1e-12 and drift < 1e-14
    verdict("11", ok, f"max residual {worst:.4e} over {betas.size} betas (need < 1e-12); "
                      f"homogeneous x* drift {drift:.1e} (need < 1e-14)")
    assert ok


DETERMINISM_RUNS = {
    "bifurcation": ["beta_start=-0.8", "beta_stop=-0.6", "beta_step=0.05", "bif_transient=100",
                    "bif_keep=10", "bif_lattice_sites=20", "bif_lattice_transient=50",
                    "bif_lattice_keep=5"],
    "critical-decay": ["n_sites=5000", "n_configs=12", "t_max=100"],
    "fss": ["sizes=8,12,16", "n_configs=4000", "fss_time_factor=2", "z_grid=1.3,1.58,2.0"],
    "off-critical": ["n_sites=5000", "n_configs=12", "t_max=100", "offsets=0.05,0.1,0.2",
                     "nu_par_grid=1.0,1.73"],
    "damage": ["n_sites=5000", "n_configs=12", "damage_t_max=50"],
    "lyapunov": ["n_sites=5000", "n_configs=12", "beta_start=-0.8", "beta_stop=-0.7",
                 "beta_step=0.05", "lyap_transient=10", "lyap_steps=20"],
}


def test_12_determinism(tmp_path, verdict):
    differing = []
    for kind, sets in DETERMINISM_RUNS.items():
        dirs = []
        for workers in (1, 8):
            out = tmp_path / f"{kind}-{workers}"
            argv = [kind, "--out", str(out), "--workers", str(workers)]
            for s in sets:
                argv += ["--set", s]
            assert main(argv) == EXIT_OK
            dirs.append(out)
        a = {p.name: p.read_bytes() for p in dirs[0].iterdir() if p.name != "record.txt"}
        b = {p.name: p.read_bytes() for p in dirs[1].iterdir() if p.name != "record.txt"}
        if a != b or not a:
            differing.append(kind)
    ok = not differing
    verdict("12", ok, f"1 vs 8 workers, all six subcommands: "
                      f"{'byte-identical' if ok else 'differ in ' + ', '.join(differing)}")
    assert ok


def test_13_invariants(verdict):
    rng = np.random.default_rng(13)
    failures = []
    s = spec(BETA_C, 200, 5, 300)
    c = observable_counts(s)
    F, P = c.flip_fractions(), c.persistence_fractions()
    if not (np.all((F >= 0) & (F <= 1)) and np.all((P >= 0) & (P <= 1))):
        failures.append("bounds")
    if not np.all(np.diff(P, axis=1) <= 0):
        failures.append("monotone persistence")
    p = MapParams(BETA_C)
    for _ in range(50):
        cells = init_random(s, 0).cells + rng.uniform(-0.1, 0.1, 200)
        k = int(rng.integers(0, 200))
        out = step(LatticeState(cells, 0.4, p)).cells
        if not np.array_equal(step(LatticeState(np.roll(cells, k), 0.4, p)).cells, np.roll(out, k)):
            failures.append("translation")
            break
        if not np.array_equal(step(LatticeState(cells[::-1], 0.4, p)).cells, out[::-1]):
            failures.append("reflection")
            break
    ok = not failures
    verdict("13", ok, "bounds, monotone P, translation and reflection equivariance hold"
                      if ok else "violated: " + ", ".join(failures))
    assert ok
