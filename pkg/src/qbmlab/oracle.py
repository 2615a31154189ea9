"""Independent numerical references for the closed forms.

Nothing here uses the closed-form coefficient maps: the moment equations are
integrated with RK4, the characteristic-function PDE is solved by tracing
characteristics numerically, representation changes are done by direct
quadrature, and traces by composite quadrature on grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import CubicSpline, RectBivariateSpline

from .errors import ExtendGridError, InvalidSpecError, RefinementRequiredError, ResolutionError
from .observables import MomentSet
from .propagator import EvolutionParams
from .statekit import ExpSumState, Rep, evaluate, evaluate_rotated, to_characteristic, to_position

ODE_TOL = 1e-10
ALIAS_TOL = 1e-8
TRUNCATION_TOL = 1e-8
# nsigma = 6 in the sense of |f| ~ exp(-nsigma^2 / 2)
DEFAULT_NSIGMA = 8.0

GRID_KINDS = ("position", "rotated", "characteristic")


@dataclass(frozen=True)
class Grid2D:
    """Values on a uniform tensor grid.

    kind "position": axes (x, x'); "rotated": axes (X, s) with x = X + s/2,
    x' = X - s/2; "characteristic": axes (k, Delta).
    """

    axis1: np.ndarray
    axis2: np.ndarray
    values: np.ndarray
    kind: str

    def __post_init__(self):
        a1 = np.asarray(self.axis1, dtype=float)
        a2 = np.asarray(self.axis2, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        if self.kind not in GRID_KINDS:
            raise InvalidSpecError(f"grid kind must be one of {GRID_KINDS}, got {self.kind!r}")
        if v.shape != (a1.size, a2.size):
            raise InvalidSpecError(f"values shape {v.shape} does not match axes ({a1.size}, {a2.size})")
        for ax in (a1, a2):
            _check_uniform(ax)
        object.__setattr__(self, "axis1", a1)
        object.__setattr__(self, "axis2", a2)
        object.__setattr__(self, "values", v)

    @property
    def h1(self) -> float:
        return float(self.axis1[1] - self.axis1[0])

    @property
    def h2(self) -> float:
        return float(self.axis2[1] - self.axis2[0])

    def with_values(self, values) -> "Grid2D":
        return Grid2D(self.axis1, self.axis2, values, self.kind)


def _check_uniform(ax):
    if ax.ndim != 1 or ax.size < 3:
        raise InvalidSpecError("grid axes need at least 3 points")
    steps = np.diff(ax)
    if not (np.all(steps > 0) and np.allclose(steps, steps[0], rtol=1e-9, atol=0)):
        raise InvalidSpecError("grid axes must be uniform and increasing")


def uniform_axis(half_width: float, n: int, centre: float = 0.0) -> np.ndarray:
    """n (odd) points over [centre - half_width, centre + half_width]."""
    if n < 3 or n % 2 == 0:
        raise InvalidSpecError(f"point counts must be odd and >= 3, got {n}")
    if not half_width > 0:
        raise InvalidSpecError(f"half width must be > 0, got {half_width!r}")
    return centre + np.linspace(-half_width, half_width, n)


def sample_state(state: ExpSumState, axis1, axis2, kind: str) -> Grid2D:
    """Evaluate an exponential-sum state on a tensor grid of the given kind."""
    a1, a2 = np.meshgrid(np.asarray(axis1, float), np.asarray(axis2, float), indexing="ij")
    # momentum states are sampled in their own (p, p') coordinates
    coord = state if state.rep is Rep.MOMENTUM else None
    if kind == "characteristic":
        vals = evaluate(to_characteristic(state), a1, a2)
    elif kind == "position":
        vals = evaluate(coord or to_position(state), a1, a2)
    elif kind == "rotated":
        vals = evaluate_rotated(coord or to_position(state), a1, a2)
    else:
        raise InvalidSpecError(f"unknown grid kind {kind!r}")
    return Grid2D(axis1, axis2, vals, kind)


# ---------------------------------------------------------------------------
# grid extents


def _term_boxes(coeffs, nsigma):
    """Bounding boxes of |exp(-q(u, v) + l.u - f)| above exp(-nsigma^2/2) of the largest peak.

    ``coeffs`` rows hold (Q_uu, Q_uv, Q_vv, l_u, l_v, log_amplitude) with real entries.
    """
    boxes, peaks = [], []
    for Quu, Quv, Qvv, lu, lv, la in coeffs:
        Q = np.array([[Quu, Quv], [Quv, Qvv]])
        if Quu <= 0 or np.linalg.det(Q) <= 0:
            raise ExtendGridError("term is not decaying in every direction; no finite grid covers it")
        Qi = np.linalg.inv(Q)
        centre = Qi @ np.array([lu, lv]) / 2
        peak = la + 0.25 * np.array([lu, lv]) @ Qi @ np.array([lu, lv])
        boxes.append((centre, Qi))
        peaks.append(peak)
    top = max(peaks)
    lo = np.array([np.inf, np.inf])
    hi = -lo
    for (centre, Qi), peak in zip(boxes, peaks):
        R = nsigma**2 / 2 + (peak - top)
        if R <= 0:
            continue
        half = np.sqrt(R * np.diag(Qi))
        lo = np.minimum(lo, centre - half)
        hi = np.maximum(hi, centre + half)
    return lo, hi


def char_half_widths(state: ExpSumState, nsigma: float = DEFAULT_NSIGMA):
    """Symmetric (k, Delta) half widths covering every significant term."""
    rows = []
    for t in to_characteristic(state).terms:
        a, b, c, d, e, f = t.astuple()
        rows.append((a.real, b.real / 2, c.real, d.imag, e.imag, -f.real))
    lo, hi = _term_boxes(rows, nsigma)
    return float(max(abs(lo[0]), abs(hi[0]))), float(max(abs(lo[1]), abs(hi[1])))


def rotated_half_widths(state: ExpSumState, nsigma: float = DEFAULT_NSIGMA):
    """Symmetric (X, s) half widths covering every significant term of rho(x, x')."""
    rows = []
    coord = state if state.rep is Rep.MOMENTUM else to_position(state)
    for t in coord.terms:
        A, B, C, D, E, F = t.astuple()
        # exponent in (s, X) with S = 2X: -A s^2 - 2iB sX - 4C X^2 - iD s - 2E X - F
        rows.append((A.real, -B.imag, 4 * C.real, D.imag, -2 * E.real, -F.real))
    lo, hi = _term_boxes(rows, nsigma)
    return float(max(abs(lo[1]), abs(hi[1]))), float(max(abs(lo[0]), abs(hi[0])))


def position_half_width(state: ExpSumState, nsigma: float = DEFAULT_NSIGMA) -> float:
    X, s = rotated_half_widths(state, nsigma)
    return X + s / 2


def nyquist_points(state: ExpSumState, minimum: int = 513, nsigma: float = DEFAULT_NSIGMA, margin: float = 1.5) -> int:
    """Odd point count for a rotated grid whose X spacing resolves every k present in chi."""
    X, _ = rotated_half_widths(state, nsigma)
    k, _ = char_half_widths(state, nsigma)
    n = math.ceil(margin * 2 * X * k / math.pi) + 1
    n = max(n, minimum)
    return n if n % 2 else n + 1


# ---------------------------------------------------------------------------
# moment equations


def _moment_rhs(y, g, M, D_pp, D_xx):
    mx, mp, vx, cxp, vp = y
    return (
        mp / M,
        -g * mp,
        2 * cxp / M + 2 * D_xx,
        vp / M - g * cxp,
        -2 * g * vp + 2 * D_pp,
    )


def _rk4(y, h, n, args):
    for _ in range(n):
        k1 = _moment_rhs(y, *args)
        k2 = _moment_rhs([yi + h / 2 * ki for yi, ki in zip(y, k1)], *args)
        k3 = _moment_rhs([yi + h / 2 * ki for yi, ki in zip(y, k2)], *args)
        k4 = _moment_rhs([yi + h * ki for yi, ki in zip(y, k3)], *args)
        y = [yi + h / 6 * (a + 2 * b + 2 * c + d) for yi, a, b, c, d in zip(y, k1, k2, k3, k4)]
    return y


def _as_moments(y):
    mx, mp, vx, cxp, vp = y
    return MomentSet(mean_x=mx, mean_p=mp, var_x=vx, var_p=vp, cov_xp=cxp)


def _scales(y):
    mx, mp, vx, cxp, vp = y
    sx, sp = math.sqrt(abs(vx)), math.sqrt(abs(vp))
    return (max(abs(mx), sx), max(abs(mp), sp), abs(vx), max(abs(cxp), sx * sp), abs(vp))


def moment_ode_integrate(
    initial: MomentSet,
    params: EvolutionParams,
    times: Sequence[float],
    max_gamma_step: float = 2e-4,
    tol: float = ODE_TOL,
) -> list:
    """Fixed-step RK4 for the closed first- and second-moment equations.

    Each interval is integrated with n and 2n substeps; if the two disagree by
    more than ``tol`` relative to the natural scale of each moment a
    RefinementRequiredError is raised.
    """
    times = [float(t) for t in times]
    if not times or times[0] != 0.0 or any(b <= a for a, b in zip(times, times[1:])):
        raise InvalidSpecError("times must start at 0 and increase strictly")
    args = (params.gamma, params.M, params.D_pp, params.D_xx)
    y = [initial.mean_x, initial.mean_p, initial.var_x, initial.cov_xp, initial.var_p]
    out = [_as_moments(y)]
    for t0, t1 in zip(times, times[1:]):
        dt = t1 - t0
        n = 1 if params.gamma == 0 else max(1, math.ceil(params.gamma * dt / max_gamma_step))
        coarse = _rk4(y, dt / n, n, args)
        fine = _rk4(y, dt / (2 * n), 2 * n, args)
        for c, f, s in zip(coarse, fine, _scales(fine)):
            err = abs(c - f) / s if s > 0 else abs(c - f)
            if err > tol:
                raise RefinementRequiredError(f"RK4 step error {err:.2e} > {tol:.0e} on [{t0:g}, {t1:g}]; reduce max_gamma_step")
        y = fine
        out.append(_as_moments(y))
    return out


# ---------------------------------------------------------------------------
# characteristic-function PDE


def footprint_axis(k_axis, Delta_axis, t: float, params: EvolutionParams, n: int, pad: float = 0.05) -> np.ndarray:
    """An input Delta axis covering the backward footprint of an output (k, Delta) grid."""
    k = np.asarray(k_axis, float)
    D = np.asarray(Delta_axis, float)
    tau = t if params.gamma == 0 else -math.expm1(-params.gamma * t) / params.gamma
    decay = math.exp(-params.gamma * t)
    corners = np.array([D[0] * decay + k[0] * tau / params.M, D[-1] * decay + k[0] * tau / params.M,
                        D[0] * decay + k[-1] * tau / params.M, D[-1] * decay + k[-1] * tau / params.M])
    lo, hi = corners.min(), corners.max()
    width = hi - lo
    half = max(abs(lo), abs(hi)) + pad * width
    return uniform_axis(half, n)


def characteristics_integrate(
    chi0: Grid2D,
    params: EvolutionParams,
    t: float,
    Delta_out: Optional[np.ndarray] = None,
    max_gamma_step: float = 1e-2,
) -> Grid2D:
    """chi(k, Delta, t) by integrating each characteristic backward to t = 0.

    Along dDelta/ds = gamma Delta - k/M the PDE reduces to
    d ln chi/ds = -(D_pp Delta^2 + D_xx k^2).  Both are integrated with RK4
    from s = t down to 0; chi0 is then interpolated with a cubic spline along
    Delta on its own row of k (the k axis is shared between input and output).
    """
    if chi0.kind != "characteristic":
        raise InvalidSpecError("chi0 must be a characteristic-function grid")
    if not (t >= 0 and math.isfinite(t)):
        raise InvalidSpecError(f"time must be finite and >= 0, got {t!r}")
    k = chi0.axis1
    D_out = chi0.axis2 if Delta_out is None else np.asarray(Delta_out, float)
    K, Dl = np.meshgrid(k, D_out, indexing="ij")
    g, M, D_pp, D_xx = params.gamma, params.M, params.D_pp, params.D_xx
    n = max(4, math.ceil(g * t / max_gamma_step)) if t > 0 else 0
    h = -t / n if n else 0.0

    def rhs(Dv):
        return g * Dv - K / M, D_pp * Dv * Dv + D_xx * K * K

    L = np.zeros_like(Dl)
    for _ in range(n):
        d1, l1 = rhs(Dl)
        d2, l2 = rhs(Dl + h / 2 * d1)
        d3, l3 = rhs(Dl + h / 2 * d2)
        d4, l4 = rhs(Dl + h * d3)
        Dl = Dl + h / 6 * (d1 + 2 * d2 + 2 * d3 + d4)
        L = L + h / 6 * (l1 + 2 * l2 + 2 * l3 + l4)
    # L = -integral_0^t (...) ds since we stepped backwards
    D_in = chi0.axis2
    span = D_in[-1] - D_in[0]
    if Dl.min() < D_in[0] - 1e-12 * span or Dl.max() > D_in[-1] + 1e-12 * span:
        raise ExtendGridError(
            f"backward footprint [{Dl.min():.3e}, {Dl.max():.3e}] leaves the input Delta range [{D_in[0]:.3e}, {D_in[-1]:.3e}]"
        )
    out = np.empty(Dl.shape, dtype=complex)
    for i in range(k.size):
        out[i] = CubicSpline(D_in, chi0.values[i])(Dl[i])
    return Grid2D(k, D_out, out * np.exp(L), "characteristic")


# ---------------------------------------------------------------------------
# representation transforms


def _alias_check(values, axis, what):
    spec = np.abs(np.fft.fft(values, axis=axis)) ** 2
    n = spec.shape[axis]
    freqs = np.abs(np.fft.fftfreq(n))
    outer = freqs >= 0.5 * 0.95
    shape = [1, 1]
    shape[axis] = n
    total = spec.sum()
    if total == 0:
        return 0.0
    frac = float((spec * outer.reshape(shape)).sum() / total)
    if frac > ALIAS_TOL:
        raise ResolutionError(f"{what}: {frac:.2e} of the spectral energy lies in the outer 5% band; refine the grid")
    return frac


def _resample_rotated(grid: Grid2D, s_needed: np.ndarray) -> np.ndarray:
    """rho(X, s) at the requested s values, on the grid's X axis."""
    s = grid.axis2
    idx = np.rint((s_needed - s[0]) / grid.h2)
    if np.allclose(s[0] + idx * grid.h2, s_needed, rtol=0, atol=1e-9 * grid.h2) and idx.min() >= 0 and idx.max() < s.size:
        return grid.values[:, idx.astype(int)]
    if s_needed.min() < s[0] or s_needed.max() > s[-1]:
        raise ExtendGridError("requested Delta range exceeds the sampled x - x' range")
    re = RectBivariateSpline(grid.axis1, s, grid.values.real, kx=3, ky=3)
    im = RectBivariateSpline(grid.axis1, s, grid.values.imag, kx=3, ky=3)
    return re(grid.axis1, s_needed) + 1j * im(grid.axis1, s_needed)


def _to_rotated(grid: Grid2D) -> Grid2D:
    """Position grid -> rotated grid without interpolation.

    With identical x and x' axes of spacing h, X on the nodes and s = 2 j h
    put x = X + j h and x' = X - j h back on nodes; entries whose partner
    falls off the grid are zero.
    """
    if grid.kind == "rotated":
        return grid
    if grid.kind != "position":
        raise InvalidSpecError("expected a position or rotated grid")
    x = grid.axis1
    if x.size != grid.axis2.size or not np.allclose(x, grid.axis2):
        raise InvalidSpecError("position grids must have identical x and x' axes")
    n, h = x.size, grid.h1
    half = (n - 1) // 2
    j = np.arange(-half, half + 1)
    vals = np.zeros((n, j.size), dtype=complex)
    for col, jj in enumerate(j):
        i = np.arange(n)
        u, v = i + jj, i - jj
        ok = (u >= 0) & (u < n) & (v >= 0) & (v < n)
        vals[i[ok], col] = grid.values[u[ok], v[ok]]
    return Grid2D(x, 2 * h * j, vals, "rotated")


def grid_transform(
    grid: Grid2D,
    direction: str,
    hbar: float,
    axis1_out: Optional[np.ndarray] = None,
    axis2_out: Optional[np.ndarray] = None,
) -> Grid2D:
    """Direct-quadrature change of representation.

    coord->char: chi(k, Delta) = sum_X h e^{ikX} rho(X, s = hbar Delta) on a
    rotated (or position) grid; Delta nodes that coincide with s nodes are
    read off directly, others are spline-interpolated.
    char->coord: rho(X, s) = (1/2 pi) sum_k h e^{-ikX} chi(k, s/hbar), returned
    as a rotated grid.
    """
    if direction == "coord->char":
        rot = _to_rotated(grid)
        _alias_check(rot.values, 0, "coord->char")
        X = rot.axis1
        k = axis1_out if axis1_out is not None else np.fft.fftshift(np.fft.fftfreq(X.size, rot.h1)) * 2 * np.pi
        k = np.asarray(k, float)
        Delta = np.asarray(axis2_out, float) if axis2_out is not None else rot.axis2 / hbar
        rho = _resample_rotated(rot, Delta * hbar)
        w = np.full(X.size, rot.h1)
        w[0] = w[-1] = rot.h1 / 2
        kernel = np.exp(1j * np.outer(k, X)) * w
        return Grid2D(k, Delta, kernel @ rho, "characteristic")
    if direction == "char->coord":
        if grid.kind != "characteristic":
            raise InvalidSpecError("char->coord needs a characteristic grid")
        _alias_check(grid.values, 0, "char->coord")
        k = grid.axis1
        X = np.asarray(axis1_out, float) if axis1_out is not None else np.fft.fftshift(np.fft.fftfreq(k.size, grid.h1)) * 2 * np.pi
        s_out = np.asarray(axis2_out, float) if axis2_out is not None else grid.axis2 * hbar
        D_needed = s_out / hbar
        # reuse the rotated resampler on the (k, Delta) grid
        tmp = Grid2D(k, grid.axis2, grid.values, "rotated")
        chi = _resample_rotated(tmp, D_needed)
        w = np.full(k.size, grid.h1)
        w[0] = w[-1] = grid.h1 / 2
        kernel = np.exp(-1j * np.outer(X, k)) * w / (2 * np.pi)
        return Grid2D(X, s_out, kernel @ chi, "rotated")
    raise InvalidSpecError(f"direction must be 'coord->char' or 'char->coord', got {direction!r}")


# ---------------------------------------------------------------------------
# quadrature

QUADRATURE_KINDS = ("trace", "purity", "tr_rho2_x", "tr_rho2_x2", "tr_rho_x_rho_x", "diagonal_moment")


def _edge_fraction(mag, h1, h2=None, width=2):
    """Share of the integrated magnitude carried by the outermost ``width`` nodes."""
    total = mag.sum()
    if total == 0:
        return 0.0
    if mag.ndim == 1:
        edge = mag[:width].sum() + mag[-width:].sum()
    else:
        inner = mag[width:-width, width:-width].sum()
        edge = total - inner
    return float(edge / total)


def grid_quadrature(grid: Grid2D, kind: str, order: int = 2) -> float:
    """Trapezoidal quadrature of trace functionals of rho(x, x').

    For smooth, rapidly decaying integrands the trapezoid rule converges
    spectrally, so it is used rather than Simpson (which aliases on the
    interference fringes).  The truncation estimate is the share of the
    integrand on the outermost nodes.
    """
    if kind not in QUADRATURE_KINDS:
        raise InvalidSpecError(f"kind must be one of {QUADRATURE_KINDS}, got {kind!r}")
    if grid.kind == "characteristic":
        raise InvalidSpecError("quadrature needs a position or rotated grid")

    if kind in ("trace", "diagonal_moment"):
        if grid.kind == "position":
            if grid.axis1.size != grid.axis2.size or not np.allclose(grid.axis1, grid.axis2):
                raise InvalidSpecError("diagonal quadrature on a position grid needs identical axes")
            x, diag = grid.axis1, np.diagonal(grid.values)
            h = grid.h1
        else:
            zero = np.flatnonzero(np.isclose(grid.axis2, 0.0, rtol=0, atol=1e-9 * grid.h2))
            if zero.size != 1:
                raise InvalidSpecError("rotated grid must contain s = 0")
            x, diag, h = grid.axis1, grid.values[:, zero[0]], grid.h1
        weight = x**order if kind == "diagonal_moment" else 1.0
        f = diag * weight
        est = _edge_fraction(np.abs(f), h)
        if est > TRUNCATION_TOL:
            raise ExtendGridError(f"{kind}: {est:.2e} of the integrand sits on the grid edge")
        return float(trapezoid(f, dx=h).real)

    if grid.kind == "position":
        U, V = np.meshgrid(grid.axis1, grid.axis2, indexing="ij")
    else:
        X, S = np.meshgrid(grid.axis1, grid.axis2, indexing="ij")
        U, V = X + S / 2, X - S / 2
    # rho(x', x) = conj rho(x, x') for Hermitian states
    w = np.abs(grid.values) ** 2
    if kind == "tr_rho2_x":
        w = w * U
    elif kind == "tr_rho2_x2":
        w = w * U * U
    elif kind == "tr_rho_x_rho_x":
        w = w * U * V
    est = _edge_fraction(np.abs(w), grid.h1, grid.h2)
    if est > TRUNCATION_TOL:
        raise ExtendGridError(f"{kind}: {est:.2e} of the integrand sits on the grid edge")
    return float(trapezoid(trapezoid(w, dx=grid.h2, axis=1), dx=grid.h1))
