import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qbmlab import presets
from qbmlab.diagnostics import measurement_diffusion
from qbmlab.propagator import EvolutionParams

settings.register_profile("qbmlab", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("qbmlab")


@pytest.fixture
def fig1():
    phys = presets.fig1_physical()
    coeffs = measurement_diffusion(phys)
    return phys, coeffs, EvolutionParams(phys.gamma, phys.M, coeffs, phys.hbar)


@pytest.fixture
def packet():
    return presets.fig1_packet()


@pytest.fixture
def cat_setup(fig1):
    phys, coeffs, _ = fig1
    spec = presets.fig4_cat()
    return spec, EvolutionParams(phys.gamma, spec.M, coeffs, spec.hbar)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[key])
