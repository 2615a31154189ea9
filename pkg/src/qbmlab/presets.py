"""Reference parameter sets (SI units) used by figures, examples and tests."""

from __future__ import annotations

from .statekit import HBAR, KB, CatSpec, GaussianSpec, PhysicalParams

# variance of the measuring device, hbar/2 * n with n = 1e4
MEASUREMENT_VARIANCE = HBAR / 2 * 1e4


def fig1_physical() -> PhysicalParams:
    return PhysicalParams(
        M=5.01e-22,
        m=5.01e-26,
        gamma=1000.0,
        T=300.0,
        R=5e6,
        var_sigma_x=MEASUREMENT_VARIANCE,
        var_sigma_p=MEASUREMENT_VARIANCE,
        hbar=HBAR,
        kB=KB,
    )


def fig1_packet() -> GaussianSpec:
    return GaussianSpec(x0=0.0, p0=5.01e-26, dx0=0.73e-7, hbar=HBAR)


def fig4_cat() -> CatSpec:
    return CatSpec(l=4e-7, sigma=0.73e-7, v=1e-4, M=5.01e-22, hbar=HBAR)
