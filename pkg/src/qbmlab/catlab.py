"""Closed forms for the two-packet (Schrödinger cat) state.

Term order follows ``statekit.build_cat``: the two packet terms (d = -/+ d_bar)
then the two interference terms (d = +/- d_tilde).  All four share a, b, c.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .errors import InvalidSpecError, SingularTermError
from .observables import coherence_length, spread
from .propagator import EvolutionParams, cubic_kernel, double_relax_time, relax_time
from .statekit import CatSpec, build_cat

log = logging.getLogger(__name__)

EXTENDED_DPS = 50


@dataclass(frozen=True)
class CatCoefficients:
    t: float
    a_bar: complex
    b_bar: complex
    c_bar: complex
    d_bar: complex
    d_tilde: complex
    e_bar: complex
    e_tilde: complex
    f_bar: complex
    f_tilde: complex


@dataclass(frozen=True)
class CatCapitals:
    """Coordinate-representation coefficients (A..F) of the four cat terms."""

    A: complex
    B: complex
    C: complex
    D_bar: complex
    D_tilde: complex
    E_bar: complex
    E_tilde: complex
    F_bar: complex
    F_tilde: complex


@dataclass(frozen=True)
class AttenuationSample:
    t: float
    W: float
    log_W: float


def _check_t(t):
    if not (t >= 0 and math.isfinite(t)):
        raise InvalidSpecError(f"time must be finite and >= 0, got {t!r}")


def cat_coefficients(spec: CatSpec, params: EvolutionParams, t: float) -> CatCoefficients:
    _check_t(t)
    hbar, M, g = spec.hbar, params.M, params.gamma
    s2, l, v = spec.sigma**2, spec.l, spec.v
    tau = relax_time(g, t)  # Gamma/gamma
    keep = math.exp(-g * t)  # 1 - Gamma
    c0 = hbar**2 / (8 * s2)
    D_pp, D_xx = params.D_pp, params.D_xx
    a = s2 / 2 + c0 * (tau / M) ** 2 + D_xx * t + D_pp / M**2 * cubic_kernel(g, t)
    b = 2 * c0 * tau * keep / M + D_pp * tau**2 / M
    c = c0 * keep**2 + D_pp * double_relax_time(g, t)
    f_bar = spec.norm_log
    return CatCoefficients(
        t=t,
        a_bar=complex(a),
        b_bar=complex(b),
        c_bar=complex(c),
        d_bar=complex(-l / 2 + v * tau),
        d_tilde=-1j * (2 * M * v * s2 / hbar + hbar * l * tau / (4 * s2 * M)),
        e_bar=complex(M * v * keep),
        e_tilde=-1j * hbar * l / (4 * s2) * keep,
        f_bar=complex(f_bar),
        f_tilde=complex(f_bar + spec.overlap_exponent),
    )


def cat_capitals(coeffs: CatCoefficients, hbar: float) -> CatCapitals:
    a, b, c = coeffs.a_bar, coeffs.b_bar, coeffs.c_bar
    norm = cmath.log(2 * cmath.sqrt(math.pi * a))

    def D(d, e):
        return (2 * a * e - b * d) / (2 * hbar * a)

    return CatCapitals(
        A=(4 * a * c - b * b) / (4 * hbar**2 * a),
        B=-b / (4 * hbar * a),
        C=1 / (16 * a),
        D_bar=D(coeffs.d_bar, coeffs.e_bar),
        D_tilde=D(coeffs.d_tilde, coeffs.e_tilde),
        E_bar=coeffs.d_bar / (4 * a),
        E_tilde=coeffs.d_tilde / (4 * a),
        F_bar=coeffs.f_bar + norm + coeffs.d_bar**2 / (4 * a),
        F_tilde=coeffs.f_tilde + norm + coeffs.d_tilde**2 / (4 * a),
    )


# ---------------------------------------------------------------------------
# attenuation


def _free_width(spec: CatSpec, params: EvolutionParams, t: float) -> float:
    """a_bar with D_pp = D_xx = 0."""
    return spec.sigma**2 / 2 + spec.hbar**2 / (8 * spec.sigma**2) * (relax_time(params.gamma, t) / params.M) ** 2


def _log_attenuation_stable(spec: CatSpec, params: EvolutionParams, t: float) -> float:
    # (d_bar^2 + |d_tilde|^2)/(4 a_free) equals the constant overlap exponent for
    # any gamma, so ln W = K/(4 a) - K/(4 a_free) = -K delta / (4 a a_free)
    co = cat_coefficients(spec, params, t)
    K = co.d_bar.real**2 + abs(co.d_tilde) ** 2
    a = co.a_bar.real
    a_free = _free_width(spec, params, t)
    delta = params.D_xx * t + params.D_pp / params.M**2 * cubic_kernel(params.gamma, t)
    return -K * delta / (4 * a * a_free)


def _log_attenuation_literal(spec: CatSpec, params: EvolutionParams, t: float, precision: str) -> float:
    if precision == "double":
        co = cat_coefficients(spec, params, t)
        K = co.d_bar.real**2 + abs(co.d_tilde) ** 2
        return K / (4 * co.a_bar.real) - spec.overlap_exponent
    if precision != "extended":
        raise ValueError(f"precision must be 'double' or 'extended', got {precision!r}")
    with mpmath.workdps(EXTENDED_DPS):
        mpf = mpmath.mpf
        hbar, M, g = mpf(spec.hbar), mpf(params.M), mpf(params.gamma)
        s2, l, v, T = mpf(spec.sigma) ** 2, mpf(spec.l), mpf(spec.v), mpf(t)
        D_pp, D_xx = mpf(params.D_pp), mpf(params.D_xx)
        if g == 0:
            tau, cubic = T, T**3 / 3
        else:
            G = -mpmath.expm1(-g * T)
            tau = G / g
            cubic = (g * T - (G**2 / 2 + G)) / g**3
        a = s2 / 2 + hbar**2 / (8 * s2) * (tau / M) ** 2 + D_xx * T + D_pp / M**2 * cubic
        d_bar = -l / 2 + v * tau
        d_tilde = 2 * M * v * s2 / hbar + hbar * l * tau / (4 * s2 * M)
        val = (d_bar**2 + d_tilde**2) / (4 * a) - l**2 / (8 * s2) - 2 * M**2 * v**2 * s2 / hbar**2
        return float(val)


def attenuation(spec: CatSpec, params: EvolutionParams, t: float, mode: str = "stable", precision: str = "double") -> AttenuationSample:
    """W_t = exp[(d_bar^2 + |d_tilde|^2)/(4 a_bar) - l^2/(8 sigma^2) - 2 M^2 v^2 sigma^2/hbar^2].

    ``mode="stable"`` evaluates the same exponent without the cancellation of
    two O(l^2/sigma^2) numbers; ``mode="literal"`` evaluates it as written,
    in double or (``precision="extended"``) multiple precision.
    """
    _check_t(t)
    if mode == "stable":
        lw = _log_attenuation_stable(spec, params, t)
    elif mode == "literal":
        lw = _log_attenuation_literal(spec, params, t, precision)
    else:
        raise ValueError(f"mode must be 'stable' or 'literal', got {mode!r}")
    return AttenuationSample(t, math.exp(lw), lw)


def attenuation_curve(spec: CatSpec, params: EvolutionParams, times, **kw):
    return [attenuation(spec, params, float(t), **kw) for t in times]


def decoherence_bracket(spec: CatSpec, form: str = "consistent") -> float:
    s2, l, v, M, hbar = spec.sigma**2, spec.l, spec.v, spec.M, spec.hbar
    if form == "consistent":
        return l**2 / (4 * s2**2) + 4 * M**2 * v**2 / hbar**2
    if form == "printed":
        # as printed: carries units of m^2 relative to the consistent form
        return l**2 / (4 * s2) + 4 * M**2 * v**2 * s2 / hbar**2
    raise ValueError(f"form must be 'consistent' or 'printed', got {form!r}")


def decoherence_time(spec: CatSpec, D_xx: float, form: str = "consistent") -> float:
    """tau_D = 1/(D_xx K); infinite when D_xx = 0 or there is nothing to decohere."""
    if not D_xx >= 0:
        raise InvalidSpecError(f"D_xx must be >= 0, got {D_xx!r}")
    rate = D_xx * decoherence_bracket(spec, form)
    return math.inf if rate == 0 else 1 / rate


# ---------------------------------------------------------------------------
# diagonal profiles


def cat_diagonal(spec: CatSpec, params: EvolutionParams, t: float, x):
    """rho(x, x, t): two displaced packets plus the cosine interference term."""
    co = cat_coefficients(spec, params, t)
    a, db, y = co.a_bar.real, co.d_bar.real, abs(co.d_tilde)
    x = np.asarray(x, dtype=float)
    pref = math.exp(-spec.norm_log) / (2 * math.sqrt(math.pi * a))
    packets = np.exp(-((x + db) ** 2) / (4 * a)) + np.exp(-((x - db) ** 2) / (4 * a))
    # envelope exp(-(x^2 - |d_tilde|^2)/4a - overlap) rewritten through ln W
    lw = _log_attenuation_stable(spec, params, t)
    fringe = 2 * np.exp(lw - (x * x + db * db) / (4 * a)) * np.cos(y * x / (2 * a))
    out = pref * (packets + fringe)
    return float(out) if out.ndim == 0 else out


def free_cat_diagonal(spec: CatSpec, t: float, x):
    """Diagonal of the freely evolving cat (gamma = 0, no diffusion)."""
    s2, l, v, M, hbar = spec.sigma**2, spec.l, spec.v, spec.M, spec.hbar
    w2 = s2 + hbar**2 * t**2 / (4 * M**2 * s2)
    x = np.asarray(x, dtype=float)
    centre = l / 2 - v * t
    k = (4 * M * v * s2 / hbar + hbar * l * t / (2 * s2 * M)) / (2 * w2)
    norm = 2 * (1 + math.exp(-spec.overlap_exponent)) * math.sqrt(2 * math.pi * w2)
    out = (
        np.exp(-((x - centre) ** 2) / (2 * w2))
        + np.exp(-((x + centre) ** 2) / (2 * w2))
        + 2 * np.exp(-(x * x + centre**2) / (2 * w2)) * np.cos(k * x)
    ) / norm
    return float(out) if out.ndim == 0 else out


def interference_excess(spec: CatSpec, params: EvolutionParams, t: float) -> float:
    """rho(0, 0, t) minus the two-packet background at x = 0."""
    co = cat_coefficients(spec, params, t)
    a, db = co.a_bar.real, co.d_bar.real
    pref = math.exp(-spec.norm_log) / (2 * math.sqrt(math.pi * a))
    return pref * 2 * math.exp(_log_attenuation_stable(spec, params, t) - db * db / (4 * a))


# ---------------------------------------------------------------------------
# literal spread / coherence-length formulas (comparison only)


def _printed_pieces(k: CatCapitals):
    A, C = k.A, k.C
    Db, Dt, Eb, Et, Fb, Ft = k.D_bar, k.D_tilde, k.E_bar, k.E_tilde, k.F_bar, k.F_tilde
    alpha = (C * Db * Dt + A * Eb * Et) / (4 * A * C) + Fb + Ft
    beta = (C * Db**2 - C * Dt**2 + A * Et**2 - A * Eb**2) / (8 * A * C)
    denom_exps = [
        Eb**2 / (2 * A) - 2 * Fb,
        Dt**2 / (2 * A) - 2 * Ft,
        -(Db**2) / (2 * A) - 2 * Fb,
        -(Et**2) / (2 * A) - 2 * Ft,
    ]
    # numerator and denominator share one overall scale, removed before exponentiating
    shift = max(z.real for z in denom_exps)
    denom = sum(cmath.exp(z - shift) for z in denom_exps)
    return alpha, beta, denom, shift


def _printed_spread2(k: CatCapitals) -> complex:
    C, Eb, Et, Fb, Ft = k.C, k.E_bar, k.E_tilde, k.F_bar, k.F_tilde
    alpha, beta, denom, shift = _printed_pieces(k)
    num = (
        Eb**2 * cmath.exp(Eb**2 / (2 * C) - 2 * Ft - shift)
        - Et**2 * cmath.exp(-(Et**2) / (2 * C) - 2 * Fb - shift)
        + ((Eb**2 - Et**2) * cmath.cos(alpha) - 2 * Eb * Et * cmath.sin(alpha)) * cmath.exp(-beta - shift)
    )
    return 1 / (8 * C) + num / (8 * C**2) / denom


def _printed_coherence2(k: CatCapitals) -> complex:
    A, Db, Dt, Fb, Ft = k.A, k.D_bar, k.D_tilde, k.F_bar, k.F_tilde
    alpha, beta, denom, shift = _printed_pieces(k)
    num = (
        Dt**2 * cmath.exp(Dt**2 / (2 * A) - 2 * Ft - shift)
        - Db**2 * cmath.exp(-(Db**2) / (2 * A) - 2 * Fb - shift)
        + ((Dt**2 - Db**2) * cmath.cos(alpha) - 2 * Db * Dt * cmath.sin(alpha)) * cmath.exp(-beta - shift)
    )
    return 1 / (8 * A) + num / (8 * A**2) / denom


def _root(value: complex, what: str) -> float:
    try:
        v = value.real
    except OverflowError:
        v = math.nan
    if not v >= 0:
        log.warning("%s: literal formula gives non-positive square %r", what, value)
        return math.nan
    return math.sqrt(v)


def _capitals_for(spec: CatSpec, params: EvolutionParams, t: float, axis: str, form: str) -> CatCapitals:
    caps = cat_capitals(cat_coefficients(spec, params, t), spec.hbar)
    if axis == "x":
        return caps
    if axis == "p":
        return cat_momentum_coefficients(caps, spec.hbar, form=form)
    raise ValueError(f"axis must be 'x' or 'p', got {axis!r}")


def cat_printed_spread(spec: CatSpec, params: EvolutionParams, t: float, axis: str = "x", form: str = "printed") -> float:
    """Spread from the printed closed form (literal-formula mode; not authoritative)."""
    _check_t(t)
    try:
        return _root(_printed_spread2(_capitals_for(spec, params, t, axis, form)), f"spread_{axis}")
    except OverflowError:
        log.warning("spread_%s: literal formula overflows at t=%g", axis, t)
        return math.nan


def cat_printed_coherence(spec: CatSpec, params: EvolutionParams, t: float, axis: str = "x", form: str = "printed") -> float:
    """Coherence length from the printed closed form (literal-formula mode)."""
    _check_t(t)
    try:
        return _root(_printed_coherence2(_capitals_for(spec, params, t, axis, form)), f"coherence_{axis}")
    except OverflowError:
        log.warning("coherence_%s: literal formula overflows at t=%g", axis, t)
        return math.nan


def printed_discrepancy_report(spec: CatSpec, params: EvolutionParams, times):
    """Relative deviation of the printed cat formulas from the trace-moment path.

    Returns one dict per time; deviations are logged, never corrected.
    """
    rows = []
    for t in times:
        state = _evolved_cat(spec, params, float(t))
        row = {"t": float(t)}
        for axis in ("x", "p"):
            for name, lit, ref in (
                ("M", cat_printed_spread(spec, params, float(t), axis), spread(state, axis)),
                ("L", cat_printed_coherence(spec, params, float(t), axis), coherence_length(state, axis)),
            ):
                dev = abs(lit - ref) / ref if ref else math.nan
                row[f"{name}_{axis}"] = ref
                row[f"{name}_{axis}_literal"] = lit
                row[f"{name}_{axis}_reldev"] = dev
                if not dev <= 1e-6:
                    log.info("t=%g %s_%s literal %.6e vs trace moments %.6e (rel %.3e)", t, name, axis, lit, ref, dev)
        rows.append(row)
    return rows


def _evolved_cat(spec, params, t):
    from .propagator import evolve_state

    return evolve_state(build_cat(spec), t, params)


# ---------------------------------------------------------------------------
# momentum representation


def cat_momentum_coefficients(caps: CatCapitals, hbar: float, form: str = "physical") -> CatCapitals:
    """Coefficients of rho(p, p') for the cat, from its position-representation capitals.

    ``form="physical"`` uses <p|x> = exp(-i p x/hbar)/sqrt(2 pi hbar) and agrees
    with ``statekit.momentum_rep`` term by term.  ``form="printed"`` applies the
    printed substitution table, whose D_bar, E_bar and E_tilde rules carry the
    opposite sign convention from its D_tilde rule.
    """
    A, B, C = caps.A, caps.B, caps.C
    Z = 4 * hbar**2 * (B * B + 4 * A * C)
    if Z == 0:
        raise SingularTermError("momentum transform is singular (Z = 0)")

    def F(Fv, D, E):
        return Fv + cmath.log(Z) / 2 + 4 * hbar**2 * (C * D * D - B * D * E - A * E * E) / Z

    if form == "physical":

        def Dp(D, E):
            return -2 * hbar * (B * D + 2 * A * E) / Z

        def Ep(D, E):
            return 2 * hbar * (2 * C * D - B * E) / Z

        D_bar, D_tilde = Dp(caps.D_bar, caps.E_bar), Dp(caps.D_tilde, caps.E_tilde)
        E_bar, E_tilde = Ep(caps.D_bar, caps.E_bar), Ep(caps.D_tilde, caps.E_tilde)
    elif form == "printed":
        D_bar = 2 * hbar * (B * caps.D_bar + 2 * A * caps.E_bar) / Z
        D_tilde = -2 * hbar * (B * caps.D_tilde + 2 * A * caps.E_tilde) / Z
        E_bar = 2 * hbar * (B * caps.E_bar - 2 * C * caps.D_bar) / Z
        E_tilde = 2 * hbar * (B * caps.E_tilde - 2 * C * caps.D_tilde) / Z
    else:
        raise ValueError(f"form must be 'physical' or 'printed', got {form!r}")
    return CatCapitals(
        A=A / Z,
        B=-B / Z,
        C=C / Z,
        D_bar=D_bar,
        D_tilde=D_tilde,
        E_bar=E_bar,
        E_tilde=E_tilde,
        F_bar=F(caps.F_bar, caps.D_bar, caps.E_bar),
        F_tilde=F(caps.F_tilde, caps.D_tilde, caps.E_tilde),
    )
