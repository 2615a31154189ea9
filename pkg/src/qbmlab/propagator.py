"""Exact time evolution of characteristic functions.

The master equation becomes a first-order PDE in (k, Delta)::

    d chi/dt = [(k/M) d/dDelta - gamma Delta d/dDelta - D_pp Delta^2 - D_xx k^2] chi

whose solution is a backward shift along Delta times a Gaussian damping factor.
For exponential terms this reduces to a closed map on the six coefficients.

Every combination of Gamma = 1 - exp(-gamma t) that appears divided by a power
of gamma is evaluated by a dedicated kernel so that gamma -> 0 (free particle)
and gamma t << 1 are exact and free of cancellation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidSpecError, InvalidTimeError
from .statekit import HBAR, CharTerm, DiffusionCoeffs, ExpSumState, Rep, to_characteristic

SERIES_THRESHOLD = 1e-8
# below this gamma*t the cubic kernel uses its Taylor series (25 terms reach
# machine precision); the closed form loses ~log10(1/(gamma t)^3) digits
CUBIC_SERIES_THRESHOLD = 0.5
_CUBIC_TERMS = 25


@dataclass(frozen=True)
class EvolutionParams:
    gamma: float
    M: float
    diffusion: DiffusionCoeffs
    hbar: float = HBAR

    def __post_init__(self):
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise InvalidSpecError(f"gamma must be >= 0, got {self.gamma!r}")
        if not self.M > 0:
            raise InvalidSpecError(f"M must be > 0, got {self.M!r}")

    @property
    def D_pp(self) -> float:
        return self.diffusion.D_pp

    @property
    def D_xx(self) -> float:
        return self.diffusion.D_xx


@dataclass(frozen=True)
class GammaFactor:
    t: float
    Gamma: float
    Gamma_over_gamma: float


def _check_time(t):
    if not (t >= 0 and math.isfinite(t)):
        raise InvalidTimeError(f"time must be finite and >= 0, got {t!r}")


def gamma_factor(gamma: float, t: float) -> GammaFactor:
    _check_time(t)
    y = gamma * t
    Gamma = -math.expm1(-y)
    if y < SERIES_THRESHOLD:
        ratio = t * (1 - y / 2 + y * y / 6)
    else:
        ratio = Gamma / gamma
    return GammaFactor(t, Gamma, ratio)


def relax_time(gamma: float, t: float) -> float:
    """(1 - exp(-gamma t)) / gamma, tending to t as gamma -> 0."""
    return gamma_factor(gamma, t).Gamma_over_gamma


def double_relax_time(gamma: float, t: float) -> float:
    """Gamma (2 - Gamma) / (2 gamma) = (1 - exp(-2 gamma t)) / (2 gamma)."""
    _check_time(t)
    y = 2 * gamma * t
    if y < SERIES_THRESHOLD:
        return t * (1 - y / 2 + y * y / 6)
    return -math.expm1(-y) / (2 * gamma)


def _cubic_coefficients():
    # y - (Gamma^2/2 + Gamma) = sum_{n>=3} (-1)^n (2 - 2^(n-1)) y^n / n!
    return [(-1) ** n * (2 - 2 ** (n - 1)) / math.factorial(n) for n in range(3, 3 + _CUBIC_TERMS)]


_CUBIC = _cubic_coefficients()


def cubic_kernel(gamma: float, t: float) -> float:
    """[gamma t - (Gamma^2/2 + Gamma)] / gamma^3, equal to t^3/3 at gamma = 0.

    This is the position-variance drift per unit D_pp/M^2.
    """
    _check_time(t)
    y = gamma * t
    if y < CUBIC_SERIES_THRESHOLD:
        acc = 0.0
        for coef in reversed(_CUBIC):
            acc = acc * y + coef
        return acc * t**3
    G = -math.expm1(-y)
    return (y - (G * G / 2 + G)) / gamma**3


def _drift(t: float, params: EvolutionParams):
    """Coefficients of the Gaussian damping factor accumulated over [0, t].

    Returns (tau, decay, alpha, beta, delta) with chi_t(k, Delta) =
    chi_0(k, decay*Delta + k*tau/M) * exp(-alpha k^2 - beta k Delta - delta Delta^2).
    """
    g = params.gamma
    tau = relax_time(g, t)
    decay = math.exp(-g * t)
    D_pp, D_xx, M = params.D_pp, params.D_xx, params.M
    alpha = D_xx * t + D_pp / M**2 * cubic_kernel(g, t)
    beta = D_pp / M * tau**2
    delta = D_pp * double_relax_time(g, t)
    return tau, decay, alpha, beta, delta


def evolve_term(term: CharTerm, t: float, params: EvolutionParams) -> CharTerm:
    """Evolve one characteristic-function term by time t."""
    tau, decay, alpha, beta, delta = _drift(t, params)
    a0, b0, c0, d0, e0, f0 = term.astuple()
    s = tau / params.M
    return CharTerm(
        a=a0 + b0 * s + c0 * s * s + alpha,
        b=b0 * decay + 2 * c0 * s * decay + beta,
        c=c0 * decay * decay + delta,
        d=d0 + e0 * s,
        e=e0 * decay,
        f=f0,
    )


def evolve_state(state: ExpSumState, t: float, params: EvolutionParams) -> ExpSumState:
    """rho(x,x',0) -> chi(k,Delta_0,0) -> chi(k,Delta_t,t), term by term."""
    chi = to_characteristic(state)
    _check_time(t)
    return ExpSumState(tuple(evolve_term(term, t, params) for term in chi.terms), Rep.CHARACTERISTIC, chi.hbar)


def char_solution_pointwise(chi0: Callable, k, Delta, t: float, params: EvolutionParams):
    """Evaluate chi(k, Delta, t) for an arbitrary initial characteristic function.

    ``chi0(k, Delta)`` must accept broadcastable arrays.
    """
    tau, decay, alpha, beta, delta = _drift(t, params)
    k = np.asarray(k, dtype=float)
    Delta = np.asarray(Delta, dtype=float)
    Delta0 = Delta * decay + k * tau / params.M
    out = np.asarray(chi0(k, Delta0), dtype=complex) * np.exp(-alpha * k**2 - beta * k * Delta - delta * Delta**2)
    if out.ndim == 0:
        return complex(out)
    return out


def backward_footprint(k, Delta, t: float, params: EvolutionParams):
    """Initial-time Delta_0 reached by tracing (k, Delta_t) back along its characteristic."""
    tau, decay, *_ = _drift(t, params)
    return np.asarray(Delta) * decay + np.asarray(k) * tau / params.M


def trajectory(state: ExpSumState, times, params: EvolutionParams):
    """Evolved states on a time grid (a list, one state per time)."""
    return [evolve_state(state, float(t), params) for t in times]
