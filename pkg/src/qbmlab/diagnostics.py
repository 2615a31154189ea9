"""Diffusion coefficients, the Lindblad condition and the initial entropy rate."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import mpmath

from .errors import InvalidSpecError
from .statekit import HBAR, DiffusionCoeffs, DiffusionSource, PhysicalParams

MARGIN_DPS = 40


@dataclass(frozen=True)
class LindbladReport:
    product: float
    threshold: float
    margin: float
    satisfied: bool

    @property
    def ratio(self) -> float:
        """D_pp D_xx / (hbar gamma / 4)^2; at least 1 for Lindblad form."""
        return self.product / self.threshold if self.threshold else math.inf


def measurement_diffusion(params: PhysicalParams) -> DiffusionCoeffs:
    """D_pp = gamma [M kB T + (m/M) var_sigma_p] + R hbar^2 / (8 var_sigma_x), D_xx = R hbar^2 / (8 var_sigma_p)."""
    p = params
    D_pp = p.gamma * (p.M * p.kB * p.T + p.m / p.M * p.var_sigma_p) + p.R * p.hbar**2 / (8 * p.var_sigma_x)
    D_xx = p.R * p.hbar**2 / (8 * p.var_sigma_p)
    return DiffusionCoeffs(D_pp, D_xx, DiffusionSource.MEASUREMENT)


def caldeira_leggett(params: PhysicalParams) -> DiffusionCoeffs:
    return DiffusionCoeffs(params.gamma * params.M * params.kB * params.T, 0.0, DiffusionSource.CALDEIRA_LEGGETT)


def q_diffusion(q: float, D_xx: float, gamma: float, hbar: float = HBAR) -> DiffusionCoeffs:
    """D_pp = q (hbar gamma / 4)^2 / D_xx, so that q = 1 sits on the Lindblad boundary."""
    if not q > 0:
        raise InvalidSpecError(f"q must be > 0, got {q!r}")
    if not D_xx > 0:
        raise InvalidSpecError(f"D_xx must be > 0, got {D_xx!r}")
    return DiffusionCoeffs(q * (hbar * gamma / 4) ** 2 / D_xx, D_xx, DiffusionSource.EXPLICIT)


def lindblad_check(coeffs: DiffusionCoeffs, gamma: float, hbar: float = HBAR) -> LindbladReport:
    """D_pp D_xx >= (hbar gamma / 4)^2, with the margin evaluated in multiple precision."""
    with mpmath.workdps(MARGIN_DPS):
        product = mpmath.mpf(coeffs.D_pp) * mpmath.mpf(coeffs.D_xx)
        threshold = (mpmath.mpf(hbar) * mpmath.mpf(gamma) / 4) ** 2
        margin = product - threshold
        return LindbladReport(float(product), float(threshold), float(margin), bool(margin >= 0))


def entropy_rate0(dx0: float, dp0: float, coeffs: DiffusionCoeffs, gamma: float, hbar: float = HBAR) -> float:
    """d S_lin / dt at t = 0 for a Gaussian packet with spreads dx0, dp0."""
    if not (dx0 > 0 and dp0 > 0):
        raise InvalidSpecError("spreads must be positive")
    if dx0 * dp0 < hbar / 2 * (1 - 1e-12):
        raise InvalidSpecError(f"dx0 dp0 = {dx0 * dp0:.6e} violates the uncertainty bound hbar/2 = {hbar / 2:.6e}")
    return 4 / hbar**2 * (dp0**2 * coeffs.D_xx + dx0**2 * coeffs.D_pp) - gamma


def minimizing_packet(coeffs: DiffusionCoeffs, hbar: float = HBAR):
    """Minimum-uncertainty (dx0, dp0) that minimizes the initial entropy rate."""
    if not (coeffs.D_pp > 0 and coeffs.D_xx > 0):
        raise InvalidSpecError("the minimizing packet needs D_pp > 0 and D_xx > 0")
    dx0 = math.sqrt(hbar / 2 * math.sqrt(coeffs.D_xx / coeffs.D_pp))
    return dx0, hbar / (2 * dx0)


def q_sweep(
    D_xx: float,
    gamma: float,
    q_values: Iterable[float],
    hbar: float = HBAR,
    packet: Optional[tuple] = None,
):
    """Rows (q, rate) with D_pp = q (hbar gamma/4)^2 / D_xx.

    ``packet=None`` uses the minimizing packet of each q, whose rate is
    gamma (sqrt(q) - 1); a fixed ``(dx0, dp0)`` may be supplied instead.
    """
    rows = []
    for q in q_values:
        coeffs = q_diffusion(float(q), D_xx, gamma, hbar)
        dx0, dp0 = packet if packet is not None else minimizing_packet(coeffs, hbar)
        rows.append((float(q), entropy_rate0(dx0, dp0, coeffs, gamma, hbar)))
    return rows
