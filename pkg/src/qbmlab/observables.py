"""Moments, purity, spreads and coherence lengths of exponential-sum states.

Traces of products of the density matrix are computed in closed form: for
every ordered pair of terms (i, j) the product rho_i(x, x') rho_j(x', x) is a
complex Gaussian in s = x - x', S = x + x', so each trace is a double sum of
analytic Gaussian integrals and their first and second moments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NumericalInconsistencyError, SingularTermError, UnsupportedStateError
from .propagator import EvolutionParams, relax_time
from .statekit import CharTerm, ExpSumState, GaussianSpec, Rep, momentum_rep, to_characteristic, to_position

RADICAND_SLACK = 1e-12


@dataclass(frozen=True)
class MomentSet:
    mean_x: float
    mean_p: float
    var_x: float
    var_p: float
    cov_xp: float

    def as_dict(self):
        return {k: getattr(self, k) for k in ("mean_x", "mean_p", "var_x", "var_p", "cov_xp")}


@dataclass(frozen=True)
class TraceMoments:
    tr_rho2: float
    tr_rho2_x: float
    tr_rho2_x2: float
    tr_rho_x_rho_x: float
    tr_rho2_p: float
    tr_rho2_p2: float
    tr_rho_p_rho_p: float


@dataclass(frozen=True)
class UncertaintyProducts:
    """L_x dp and L_p dx are only defined (non-NaN) for single-Gaussian states."""

    Lx_dp: float
    Lp_dx: float
    Lx_Mp: float


@dataclass(frozen=True)
class AsymptoticReference:
    regime: str
    t: float
    moments: MomentSet
    coherence_x2: float
    coherence_p2: float


# ---------------------------------------------------------------------------
# single-Gaussian closed forms


def _single_term(state_or_term) -> CharTerm:
    if isinstance(state_or_term, CharTerm):
        return state_or_term
    chi = to_characteristic(state_or_term)
    if len(chi.terms) != 1:
        raise UnsupportedStateError(f"expected a single-term state, got {len(chi.terms)} terms; use trace_moments")
    return chi.terms[0]


def gaussian_moments(state_or_term) -> MomentSet:
    """<x>, <p>, variances and symmetrized covariance of a single normalized term."""
    a, b, c, d, e, _ = _single_term(state_or_term).astuple()
    return MomentSet(-d.real, -e.real, 2 * a.real, 2 * c.real, b.real)


def state_moments(state: ExpSumState) -> MomentSet:
    """Moments of an arbitrary exponential-sum state from derivatives of chi at the origin."""
    chi = to_characteristic(state)
    norm = mx = mp = mxx = mpp = mxp = 0j
    for a, b, c, d, e, f in (t.astuple() for t in chi.terms):
        w = np.exp(-f)
        norm += w
        mx += -d * w
        mp += -e * w
        mxx += (2 * a + d * d) * w
        mpp += (2 * c + e * e) * w
        mxp += (b + d * e) * w
    mx, mp, mxx, mpp, mxp = (q / norm for q in (mx, mp, mxx, mpp, mxp))
    return MomentSet(*(float(q.real) for q in (mx, mp, mxx - mx * mx, mpp - mp * mp, mxp - mx * mp)))


def coherence_ratio(state_or_term, hbar: Optional[float] = None) -> float:
    """(hbar/2) / sqrt(4 a c - b^2); the purity of a single Gaussian term."""
    term = _single_term(state_or_term)
    if hbar is None:
        hbar = state_or_term.hbar
    a, b, c = term.a.real, term.b.real, term.c.real
    return (hbar / 2) / math.sqrt(4 * a * c - b * b)


def gaussian_coherence_lengths(state_or_term, hbar: Optional[float] = None):
    """(L_x^2, L_p^2) of a single Gaussian term in closed form."""
    term = _single_term(state_or_term)
    if hbar is None:
        hbar = state_or_term.hbar
    a, b, c = term.a.real, term.b.real, term.c.real
    det = 4 * a * c - b * b
    return hbar**2 * a / 2 / det, hbar**2 * c / 2 / det


# ---------------------------------------------------------------------------
# pairwise Gaussian integrals


@dataclass(frozen=True)
class _PairMoments:
    log_w: np.ndarray  # log of each pair's integral of rho_i(x,x') rho_j(x',x)
    mu_s: np.ndarray
    mu_S: np.ndarray
    cov_ss: np.ndarray
    cov_sS: np.ndarray
    cov_SS: np.ndarray


def _pair_moments(state: ExpSumState) -> _PairMoments:
    coeffs = np.array([t.astuple() for t in state.terms], dtype=complex)
    A, B, C, D, E, F = (coeffs[:, n] for n in range(6))
    # pair (i, j): rho_i(x, x') rho_j(x', x); swapping x and x' flips s only
    Pss = A[:, None] + A[None, :]
    PsS = 0.5j * (B[:, None] - B[None, :])
    PSS = C[:, None] + C[None, :]
    Ls = -1j * (D[:, None] - D[None, :])
    LS = -(E[:, None] + E[None, :])
    K = F[:, None] + F[None, :]
    if np.any(Pss.real <= 0) or np.any(PSS.real <= 0):
        raise SingularTermError("divergent pair integral: a term has Re A <= 0 or Re C <= 0")
    schur = PSS - PsS**2 / Pss
    if np.any(schur == 0):
        raise SingularTermError("divergent pair integral: singular quadratic form")
    det = Pss * schur
    inv_ss = PSS / det
    inv_sS = -PsS / det
    inv_SS = Pss / det
    quad = Ls * (inv_ss * Ls + inv_sS * LS) + LS * (inv_sS * Ls + inv_SS * LS)
    # integral over dx dx' = (1/2) ds dS of exp(-w.P.w + L.w - K)
    log_w = math.log(math.pi / 2) - 0.5 * (np.log(Pss) + np.log(schur)) + quad / 4 - K
    mu_s = 0.5 * (inv_ss * Ls + inv_sS * LS)
    mu_S = 0.5 * (inv_sS * Ls + inv_SS * LS)
    return _PairMoments(log_w.ravel(), mu_s.ravel(), mu_S.ravel(), 0.5 * inv_ss.ravel(), 0.5 * inv_sS.ravel(), 0.5 * inv_SS.ravel())


def _normalized_weights(pm: _PairMoments):
    shift = np.max(pm.log_w.real)
    w = np.exp(pm.log_w - shift)
    total = w.sum()
    return w, total, shift


def _coordinate_state(state: ExpSumState, axis: str) -> ExpSumState:
    if axis == "x":
        return to_position(state)
    if axis == "p":
        return state if state.rep is Rep.MOMENTUM else momentum_rep(state)
    raise ValueError(f"axis must be 'x' or 'p', got {axis!r}")


def _raw_traces(state: ExpSumState):
    pm = _pair_moments(state)
    w, total, shift = _normalized_weights(pm)
    scale = math.exp(shift)
    mean_x = pm.mu_S / 2 + pm.mu_s / 2
    x2 = (pm.cov_SS + 2 * pm.cov_sS + pm.cov_ss + (pm.mu_S + pm.mu_s) ** 2) / 4
    xx = (pm.cov_SS - pm.cov_ss + pm.mu_S**2 - pm.mu_s**2) / 4
    return (
        (total * scale).real,
        (np.sum(w * mean_x) * scale).real,
        (np.sum(w * x2) * scale).real,
        (np.sum(w * xx) * scale).real,
    )


def trace_moments(state: ExpSumState) -> TraceMoments:
    """tr(rho^2), tr(rho^2 X), tr(rho^2 X^2), tr(rho X rho X) for X = x and X = p."""
    tx = _raw_traces(_coordinate_state(state, "x"))
    tp = _raw_traces(_coordinate_state(state, "p"))
    return TraceMoments(tx[0], tx[1], tx[2], tx[3], tp[1], tp[2], tp[3])


def purity(state: ExpSumState) -> float:
    return trace_moments_x_only(state)[0]


def trace_moments_x_only(state: ExpSumState):
    return _raw_traces(to_position(state))


def _central(state: ExpSumState):
    pm = _pair_moments(state)
    w, total, _ = _normalized_weights(pm)
    w = w / total
    Es = np.sum(w * pm.mu_s)
    ES = np.sum(w * pm.mu_S)
    var_S = np.sum(w * (pm.cov_SS + (pm.mu_S - ES) ** 2))
    cov = np.sum(w * (pm.cov_sS + (pm.mu_s - Es) * (pm.mu_S - ES)))
    Es2 = np.sum(w * (pm.cov_ss + pm.mu_s**2))
    return Es, ES, var_S, cov, Es2


def _safe_sqrt(value: complex, scale: float, what: str) -> float:
    v = value.real
    if v < 0:
        if v < -RADICAND_SLACK * scale:
            raise NumericalInconsistencyError(f"{what}: negative radicand {v:.3e} (scale {scale:.3e})")
        return 0.0
    return math.sqrt(v)


def spread(state: ExpSumState, axis: str = "x") -> float:
    """M_X = sqrt{[tr(rho^2 X^2) + tr(rho X rho X)]/tr(rho^2) - 2 [tr(rho^2 X)/tr(rho^2)]^2}.

    Evaluated as half the variance of X + X' under the weight rho(X,X')rho(X',X),
    which is the same quantity without the cancellation of the raw-trace form.
    """
    Es, ES, var_S, cov, Es2 = _central(_coordinate_state(state, axis))
    value = 0.5 * (var_S + cov - Es * (ES + Es))
    scale = abs(var_S) + abs(Es2) + abs(ES) ** 2
    return _safe_sqrt(value, scale, f"spread({axis})")


def coherence_length(state: ExpSumState, axis: str = "x") -> float:
    """L_X = sqrt{[tr(rho^2 X^2) - tr(rho X rho X)] / tr(rho^2)}."""
    Es, ES, var_S, cov, Es2 = _central(_coordinate_state(state, axis))
    value = 0.5 * (cov + Es * ES + Es2)
    scale = abs(Es2) + abs(var_S)
    return _safe_sqrt(value, scale, f"coherence_length({axis})")


def spread_from_traces(tm: TraceMoments, axis: str = "x") -> float:
    """M_X straight from the raw trace formula (cancellation-prone; for cross-checks)."""
    t2, t1, tq, tc = _axis_traces(tm, axis)
    value = (tq + tc) / tm.tr_rho2 - 2 * (t1 / tm.tr_rho2) ** 2
    return _safe_sqrt(complex(value), abs(tq / tm.tr_rho2), f"spread({axis})")


def coherence_from_traces(tm: TraceMoments, axis: str = "x") -> float:
    t2, t1, tq, tc = _axis_traces(tm, axis)
    value = (tq - tc) / tm.tr_rho2
    return _safe_sqrt(complex(value), abs(tq / tm.tr_rho2), f"coherence_length({axis})")


def _axis_traces(tm: TraceMoments, axis: str):
    if axis == "x":
        return tm.tr_rho2, tm.tr_rho2_x, tm.tr_rho2_x2, tm.tr_rho_x_rho_x
    if axis == "p":
        return tm.tr_rho2, tm.tr_rho2_p, tm.tr_rho2_p2, tm.tr_rho_p_rho_p
    raise ValueError(f"axis must be 'x' or 'p', got {axis!r}")


def uncertainty_products(state: ExpSumState) -> UncertaintyProducts:
    Lx = coherence_length(state, "x")
    Mp = spread(state, "p")
    chi = to_characteristic(state)
    if len(chi.terms) == 1:
        m = gaussian_moments(chi)
        Lp = coherence_length(state, "p")
        return UncertaintyProducts(Lx * math.sqrt(m.var_p), Lp * math.sqrt(m.var_x), Lx * Mp)
    return UncertaintyProducts(math.nan, math.nan, Lx * Mp)


# ---------------------------------------------------------------------------
# short/long-time reference formulas


def asymptotic_reference(params: EvolutionParams, spec: GaussianSpec, regime: str, t: float) -> AsymptoticReference:
    """Leading-order short-time (t << 1/gamma) or long-time (t >> 1/gamma) behaviour.

    These are test references; the exact values come from the propagator.
    """
    g, M = params.gamma, params.M
    D_pp, D_xx = params.D_pp, params.D_xx
    dx2, dp2 = spec.dx0**2, spec.dp0**2
    if regime == "short":
        moments = MomentSet(
            mean_x=spec.x0 + spec.p0 * t / M,
            mean_p=spec.p0 * (1 - g * t),
            var_x=dx2 + 2 * D_xx * t,
            var_p=dp2 + 2 * (D_pp - g * dp2) * t,
            cov_xp=dp2 * t / M,
        )
        Lx2 = dx2 * (1 - 2 * (D_pp / dp2 - g) * t)
        Lp2 = dp2 * (1 - 2 * D_xx / dx2 * t)
    elif regime == "long":
        if g <= 0 or D_pp <= 0:
            raise ValueError("the long-time regime needs gamma > 0 and D_pp > 0")
        var_x = 2 * (D_xx + D_pp / (M * g) ** 2) * t
        moments = MomentSet(
            mean_x=spec.x0 + spec.p0 * relax_time(g, t) / M,
            mean_p=0.0,
            var_x=var_x,
            var_p=D_pp / g,
            cov_xp=D_pp / (M * g * g),
        )
        Lx2 = spec.hbar**2 * g / (4 * D_pp)
        Lp2 = spec.hbar**2 / (4 * var_x)
    else:
        raise ValueError(f"regime must be 'short' or 'long', got {regime!r}")
    return AsymptoticReference(regime, t, moments, Lx2, Lp2)
