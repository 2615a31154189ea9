"""State containers for Gaussian-exponential density matrices.

A state is a finite sum of exponential terms.  In the position (or momentum)
representation every term reads::

    exp[-A(x-x')^2 - iB(x-x')(x+x') - C(x+x')^2 - iD(x-x') - E(x+x') - F]

and in the characteristic-function representation chi(k, Delta) =
tr(exp[i(k x + Delta p)] rho)::

    exp[-a k^2 - b k Delta - c Delta^2 - i d k - i e Delta - f]

The k*Delta coefficient ``b`` multiplies a real cross term (no factor i): with
that convention ``b`` is the symmetrized x-p covariance of a Gaussian and the
evolution map of :mod:`qbmlab.propagator` keeps it real.

All coefficients are complex; normalization constants live inside F / f.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, fields, replace
from typing import Iterable, Union

import numpy as np

from .errors import InvalidSpecError, SingularTermError

HBAR = 1.06e-34
KB = 1.38e-23

_LN2 = math.log(2.0)
_LNPI = math.log(math.pi)


@dataclass(frozen=True)
class PhysicalParams:
    """System parameters in SI units.

    ``var_sigma_x`` and ``var_sigma_p`` are the measurement variance increases
    (Delta_sigma x)^2 and (Delta_sigma p)^2.  The stock parameter set assigns
    both the same number hbar/2 * 1e4 even though their units differ; the values
    are stored exactly as given.
    """

    M: float
    m: float
    gamma: float
    T: float
    R: float
    var_sigma_x: float
    var_sigma_p: float
    hbar: float = HBAR
    kB: float = KB

    def __post_init__(self):
        # gamma, T and R may vanish (frictionless, zero-temperature, unmeasured limits)
        for f in fields(self):
            value = getattr(self, f.name)
            floor_ok = value >= 0 if f.name in ("gamma", "T", "R") else value > 0
            if not (isinstance(value, (int, float)) and math.isfinite(value) and floor_ok):
                raise InvalidSpecError(f"PhysicalParams.{f.name} out of range: {value!r}")


class DiffusionSource(str, enum.Enum):
    MEASUREMENT = "measurement"
    CALDEIRA_LEGGETT = "caldeira-leggett"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class DiffusionCoeffs:
    D_pp: float
    D_xx: float
    source: DiffusionSource = DiffusionSource.EXPLICIT

    def __post_init__(self):
        if not (self.D_pp >= 0 and self.D_xx >= 0):
            raise InvalidSpecError(f"diffusion coefficients must be >= 0, got D_pp={self.D_pp}, D_xx={self.D_xx}")
        if self.source is DiffusionSource.CALDEIRA_LEGGETT and self.D_xx != 0:
            raise InvalidSpecError("Caldeira-Leggett coefficients require D_xx = 0")


class Rep(str, enum.Enum):
    POSITION = "position"
    MOMENTUM = "momentum"
    CHARACTERISTIC = "characteristic"


@dataclass(frozen=True)
class CoordTerm:
    A: complex
    B: complex
    C: complex
    D: complex
    E: complex
    F: complex

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, complex(getattr(self, f.name)))

    def astuple(self):
        return (self.A, self.B, self.C, self.D, self.E, self.F)


@dataclass(frozen=True)
class CharTerm:
    a: complex
    b: complex
    c: complex
    d: complex
    e: complex
    f: complex

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, complex(getattr(self, f.name)))

    def astuple(self):
        return (self.a, self.b, self.c, self.d, self.e, self.f)


Term = Union[CoordTerm, CharTerm]


@dataclass(frozen=True)
class ExpSumState:
    terms: tuple
    rep: Rep
    hbar: float = HBAR

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise InvalidSpecError("a state needs at least one term")
        kind = CharTerm if self.rep is Rep.CHARACTERISTIC else CoordTerm
        if not all(isinstance(t, kind) for t in terms):
            raise InvalidSpecError(f"all terms of a {self.rep.value} state must be {kind.__name__}")
        object.__setattr__(self, "terms", terms)

    def __len__(self):
        return len(self.terms)


@dataclass(frozen=True)
class GaussianSpec:
    """Minimum-uncertainty Gaussian packet; dp0 = hbar / (2 dx0)."""

    x0: float
    p0: float
    dx0: float
    hbar: float = HBAR

    def __post_init__(self):
        if not (self.dx0 > 0 and math.isfinite(self.dx0)):
            raise InvalidSpecError(f"dx0 must be > 0, got {self.dx0!r}")
        if not (self.hbar > 0):
            raise InvalidSpecError("hbar must be > 0")

    @property
    def dp0(self) -> float:
        return self.hbar / (2.0 * self.dx0)


@dataclass(frozen=True)
class CatSpec:
    """Two Gaussian packets of width sigma at +-l/2 moving towards each other at speed v."""

    l: float
    sigma: float
    v: float
    M: float
    hbar: float = HBAR

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise InvalidSpecError(f"sigma must be > 0, got {self.sigma!r}")
        if not self.l >= 0:
            raise InvalidSpecError(f"l must be >= 0, got {self.l!r}")
        if not (self.M > 0 and self.hbar > 0):
            raise InvalidSpecError("M and hbar must be > 0")

    @property
    def overlap_exponent(self) -> float:
        """l^2/8 sigma^2 + 2 M^2 v^2 sigma^2 / hbar^2, the packet-overlap suppression."""
        return self.l**2 / (8 * self.sigma**2) + 2 * (self.M * self.v * self.sigma / self.hbar) ** 2

    @property
    def norm_log(self) -> float:
        """log of 2 [1 + <psi_2|psi_1> / sqrt(2 pi sigma^2)]."""
        return _LN2 + math.log1p(math.exp(-self.overlap_exponent))


# ---------------------------------------------------------------------------
# representation maps


def coord_to_char(term: CoordTerm, hbar: float = HBAR) -> CharTerm:
    """Position-representation term -> characteristic-function term."""
    A, B, C, D, E, F = term.astuple()
    if C == 0:
        raise SingularTermError("coord_to_char: C = 0")
    a = 1 / (16 * C)
    b = -B * hbar / (4 * C)
    c = (4 * A * C + B**2) * hbar**2 / (4 * C)
    d = E / (4 * C)
    e = (2 * C * D - B * E) * hbar / (2 * C)
    # exp(-f) = exp(-F) exp(+E^2/4C) (1/2) sqrt(pi/C)
    f = F - E**2 / (4 * C) + _LN2 - 0.5 * _LNPI + 0.5 * cmath.log(C)
    return CharTerm(a, b, c, d, e, f)


def char_to_coord(term: CharTerm, hbar: float = HBAR) -> CoordTerm:
    a, b, c, d, e, f = term.astuple()
    if a == 0:
        raise SingularTermError("char_to_coord: a = 0")
    A = (4 * a * c - b**2) / (4 * hbar**2 * a)
    B = -b / (4 * hbar * a)
    C = 1 / (16 * a)
    D = (2 * a * e - b * d) / (2 * hbar * a)
    E = d / (4 * a)
    F = f + _LN2 + 0.5 * _LNPI + 0.5 * cmath.log(a) + d**2 / (4 * a)
    return CoordTerm(A, B, C, D, E, F)


def coord_to_momentum(term: CoordTerm, hbar: float = HBAR) -> CoordTerm:
    """Analytic double Fourier transform rho(x, x') -> rho(p, p') of one term.

    Uses <p|x> = exp(-i p x / hbar) / sqrt(2 pi hbar).  Applying the map twice
    returns the parity-flipped term (D, E -> -D, -E).
    """
    A, B, C, D, E, F = term.astuple()
    if A.real <= 0 or C.real <= 0:
        raise SingularTermError(f"coord_to_momentum: non-convergent term (Re A={A.real}, Re C={C.real})")
    Z = 4 * hbar**2 * (B**2 + 4 * A * C)
    if Z == 0:
        raise SingularTermError("coord_to_momentum: Z = 0")
    return CoordTerm(
        A / Z,
        -B / Z,
        C / Z,
        -2 * hbar * (B * D + 2 * A * E) / Z,
        2 * hbar * (2 * C * D - B * E) / Z,
        F + 0.5 * cmath.log(Z) + 4 * hbar**2 * (C * D**2 - B * D * E - A * E**2) / Z,
    )


def to_characteristic(state: ExpSumState) -> ExpSumState:
    if state.rep is Rep.CHARACTERISTIC:
        return state
    if state.rep is Rep.MOMENTUM:
        raise InvalidSpecError("a momentum-representation state has no characteristic form here; convert from position")
    return ExpSumState(tuple(coord_to_char(t, state.hbar) for t in state.terms), Rep.CHARACTERISTIC, state.hbar)


def to_position(state: ExpSumState) -> ExpSumState:
    if state.rep is Rep.POSITION:
        return state
    if state.rep is Rep.MOMENTUM:
        raise InvalidSpecError("momentum -> position conversion is not provided")
    return ExpSumState(tuple(char_to_coord(t, state.hbar) for t in state.terms), Rep.POSITION, state.hbar)


def momentum_rep(state: ExpSumState) -> ExpSumState:
    """Momentum-representation density matrix rho(p, p') of a position or characteristic state."""
    pos = to_position(state)
    return ExpSumState(tuple(coord_to_momentum(t, pos.hbar) for t in pos.terms), Rep.MOMENTUM, pos.hbar)


# ---------------------------------------------------------------------------
# pointwise evaluation


def term_exponent(term: Term, u, v):
    """The (complex) exponent of one term at (u, v); arrays broadcast."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if isinstance(term, CharTerm):
        a, b, c, d, e, f = term.astuple()
        return -a * u**2 - b * u * v - c * v**2 - 1j * d * u - 1j * e * v - f
    A, B, C, D, E, F = term.astuple()
    s = u - v
    S = u + v
    return -A * s**2 - 1j * B * s * S - C * S**2 - 1j * D * s - E * S - F


def coord_term_exponent_rotated(term: CoordTerm, X, s):
    """Exponent of a position/momentum term at centre X = (x + x')/2 and separation s = x - x'.

    Avoids forming x = X + s/2 when |s| << |X|, which would lose s entirely.
    """
    X = np.asarray(X, dtype=float)
    s = np.asarray(s, dtype=float)
    A, B, C, D, E, F = term.astuple()
    S = 2 * X
    return -A * s**2 - 1j * B * s * S - C * S**2 - 1j * D * s - E * S - F


def evaluate_rotated(state: ExpSumState, X, s):
    """rho(X + s/2, X - s/2) for a position (or momentum) state."""
    if state.rep is Rep.CHARACTERISTIC:
        raise InvalidSpecError("evaluate_rotated needs a position or momentum state")
    total = sum(np.exp(coord_term_exponent_rotated(t, X, s)) for t in state.terms)
    if np.ndim(total) == 0:
        return complex(total)
    return total


def evaluate(state: ExpSumState, u, v):
    """Sum of the state's terms at (u, v).

    (u, v) is (x, x') for position, (p, p') for momentum and (k, Delta) for the
    characteristic representation.  Scalars give a Python complex, arrays an
    ndarray of the broadcast shape.
    """
    total = sum(np.exp(term_exponent(t, u, v)) for t in state.terms)
    if np.ndim(total) == 0:
        return complex(total)
    return total


def term_trace_log(term: Term) -> complex:
    """log of the trace contribution of a single term (i.e. -f)."""
    if isinstance(term, CharTerm):
        return -term.f
    A, B, C, D, E, F = term.astuple()
    if C == 0:
        raise SingularTermError("trace of a term with C = 0 diverges")
    return -F + E**2 / (4 * C) - _LN2 + 0.5 * _LNPI - 0.5 * cmath.log(C)


def trace_of(state: ExpSumState) -> complex:
    """tr(rho) = chi(0, 0) = sum_j exp(-f_j)."""
    vals = [cmath.exp(term_trace_log(t)) for t in state.terms]
    return complex(math.fsum(v.real for v in vals), math.fsum(v.imag for v in vals))


def scaled(state: ExpSumState, factor: float) -> ExpSumState:
    """Multiply the whole density matrix by a positive constant."""
    if not factor > 0:
        raise InvalidSpecError("scale factor must be > 0")
    shift = math.log(factor)
    if state.rep is Rep.CHARACTERISTIC:
        terms = tuple(replace(t, f=t.f - shift) for t in state.terms)
    else:
        terms = tuple(replace(t, F=t.F - shift) for t in state.terms)
    return ExpSumState(terms, state.rep, state.hbar)


# ---------------------------------------------------------------------------
# initial states


def gaussian_coord_term(spec: GaussianSpec) -> CoordTerm:
    """Position-representation coefficients of the minimum-uncertainty packet."""
    w = 1 / (8 * spec.dx0**2)
    E = -spec.x0 / (2 * spec.dx0**2)
    F = 0.5 * math.log(2 * math.pi * spec.dx0**2) + spec.x0**2 / (2 * spec.dx0**2)
    return CoordTerm(A=w, B=0, C=w, D=-spec.p0 / spec.hbar, E=E, F=F)


def build_gaussian(spec: GaussianSpec) -> ExpSumState:
    """Characteristic-representation state of a minimum-uncertainty Gaussian packet."""
    term = CharTerm(
        a=spec.dx0**2 / 2,
        b=0,
        c=spec.dp0**2 / 2,
        d=-spec.x0,
        e=-spec.p0,
        f=0,
    )
    return ExpSumState((term,), Rep.CHARACTERISTIC, spec.hbar)


def cat_coord_terms(spec: CatSpec) -> tuple:
    """The four position-representation terms psi_i(x) psi_j*(x') of the cat state.

    Order: (1,1), (2,2), (2,1), (1,2) where packet 1 sits at +l/2 with momentum
    -Mv and packet 2 at -l/2 with momentum +Mv.
    """
    s2 = spec.sigma**2
    kappa = spec.M * spec.v / spec.hbar
    centers = {1: spec.l / 2, 2: -spec.l / 2}
    wavenumbers = {1: -kappa, 2: kappa}
    log_n2 = -spec.norm_log - 0.5 * math.log(2 * math.pi * s2)
    terms = []
    for i, j in ((1, 1), (2, 2), (2, 1), (1, 2)):
        ci, cj = centers[i], centers[j]
        ki, kj = wavenumbers[i], wavenumbers[j]
        terms.append(
            CoordTerm(
                A=1 / (8 * s2),
                B=0,
                C=1 / (8 * s2),
                D=1j * (ci - cj) / (4 * s2) - (ki + kj) / 2,
                E=-(ci + cj) / (4 * s2) - 1j * (ki - kj) / 2,
                F=(ci**2 + cj**2) / (4 * s2) - log_n2,
            )
        )
    return tuple(terms)


def build_cat(spec: CatSpec) -> ExpSumState:
    """Characteristic-representation state of the two-packet cat (four terms)."""
    terms = tuple(coord_to_char(t, spec.hbar) for t in cat_coord_terms(spec))
    return ExpSumState(terms, Rep.CHARACTERISTIC, spec.hbar)


def state_from_terms(terms: Iterable[Term], rep: Rep, hbar: float = HBAR) -> ExpSumState:
    return ExpSumState(tuple(terms), rep, hbar)
