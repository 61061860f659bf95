import numpy as np
import pytest
from hypothesis import settings

from gausscml.lattice import EnsembleSpec
from gausscml.mapcore import MapParams

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

BETA_C = -0.6773


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def critical_params():
    return MapParams(BETA_C)


def small_spec(beta=BETA_C, n_sites=64, n_configs=3, t_max=50, seed=7, **kw):
    return EnsembleSpec(n_sites=n_sites, n_configs=n_configs, params=MapParams(beta),
                        master_seed=seed, t_max=t_max, **kw)


def pytest_terminal_summary(terminalreporter):
    """Repeat the one-line verdicts recorded by the acceptance tests."""
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            if getattr(rep, "when", "call") != "call":
                continue
            lines += [v for k, v in getattr(rep, "user_properties", []) if k == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        # lines start with a zero-padded criterion tag, so plain sorting orders them
        for line in sorted(lines):
            terminalreporter.write_line(line)
