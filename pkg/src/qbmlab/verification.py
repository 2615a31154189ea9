"""The acceptance suite: every closed form against its oracle at fixed tolerances.

Each ``criterion_N`` returns a CriterionResult; ``run_all`` collects them.
Used by ``qbmlab verify`` and by the test suite.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import catlab, diagnostics, observables, oracle, presets
from .propagator import EvolutionParams, evolve_state, evolve_term
from .statekit import HBAR, CharTerm, DiffusionCoeffs, ExpSumState, build_cat, build_gaussian, evaluate, to_position, trace_of


@dataclass
class CriterionResult:
    id: int
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""
    runtime: float = 0.0
    extra: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"C{self.id:<2d} {status}  {self.name}: value={self.value:.3e} tol={self.tolerance:.1e}  {self.detail}".rstrip()


def fig1_setup():
    phys = presets.fig1_physical()
    coeffs = diagnostics.measurement_diffusion(phys)
    return phys, coeffs, EvolutionParams(phys.gamma, phys.M, coeffs, phys.hbar)


def fig4_cat_setup():
    """Fig. 4 cat with the Fig. 1 environment."""
    phys, coeffs, _ = fig1_setup()
    spec = presets.fig4_cat()
    return spec, EvolutionParams(phys.gamma, spec.M, coeffs, spec.hbar)


def _rel(x, y, scale):
    return abs(x - y) / scale if scale else abs(x - y)


def moment_errors(closed: observables.MomentSet, ref: observables.MomentSet) -> float:
    """Largest relative moment error, each moment measured against its natural scale."""
    sx, sp = math.sqrt(ref.var_x), math.sqrt(ref.var_p)
    return max(
        _rel(closed.mean_x, ref.mean_x, max(abs(ref.mean_x), sx)),
        _rel(closed.mean_p, ref.mean_p, max(abs(ref.mean_p), sp)),
        _rel(closed.var_x, ref.var_x, ref.var_x),
        _rel(closed.var_p, ref.var_p, ref.var_p),
        _rel(closed.cov_xp, ref.cov_xp, max(abs(ref.cov_xp), sx * sp)),
    )


# ---------------------------------------------------------------------------


def criterion_1() -> CriterionResult:
    _, _, params = fig1_setup()
    state = build_gaussian(presets.fig1_packet())
    times = np.linspace(0.0, 5e-3, 200)
    t0 = time.perf_counter()
    closed = [observables.gaussian_moments(evolve_state(state, t, params)) for t in times]
    ref = oracle.moment_ode_integrate(closed[0], params, times)
    runtime = time.perf_counter() - t0
    err = max(moment_errors(c, r) for c, r in zip(closed, ref))
    return CriterionResult(1, "closed-form moments vs RK4 moment ODE", err <= 1e-8 and runtime < 5, err, 1e-8,
                           f"runtime {runtime:.2f}s (< 5s)", runtime)


def characteristics_deviation(state: ExpSumState, params: EvolutionParams, t: float, n: int = 257, nsigma: float = 6.0) -> float:
    """Peak-relative deviation of the closed-form chi_t from the characteristics oracle."""
    evolved = evolve_state(state, t, params)
    kh, Dh = oracle.char_half_widths(evolved, nsigma)
    k, D = oracle.uniform_axis(kh, n), oracle.uniform_axis(Dh, n)
    D_in = oracle.footprint_axis(k, D, t, params, n)
    chi0 = oracle.sample_state(state, k, D_in, "characteristic")
    numeric = oracle.characteristics_integrate(chi0, params, t, Delta_out=D).values
    exact = oracle.sample_state(evolved, k, D, "characteristic").values
    return float(np.max(np.abs(numeric - exact)) / np.max(np.abs(exact)))


def criterion_2() -> CriterionResult:
    _, _, params = fig1_setup()
    state = build_gaussian(presets.fig1_packet())
    t0 = time.perf_counter()
    devs = {t: characteristics_deviation(state, params, t) for t in (1e-5, 1e-4, 1e-3)}
    runtime = time.perf_counter() - t0
    worst = max(devs.values())
    detail = ", ".join(f"t={t:g}: {d:.1e}" for t, d in devs.items()) + f"; runtime {runtime:.1f}s"
    return CriterionResult(2, "closed-form chi vs characteristics oracle (257x257)", worst <= 1e-6 and runtime < 60,
                           worst, 1e-6, detail, runtime)


def random_admissible_term(rng, hbar=HBAR) -> CharTerm:
    """Normalized Gaussian term with 4ac - b^2 >= hbar^2/4 (a physical state)."""
    a = 10 ** rng.uniform(-18, -12)
    c = hbar**2 / (16 * a) * 10 ** rng.uniform(0, 3)
    b = rng.uniform(-0.9, 0.9) * math.sqrt(4 * a * c - hbar**2 / 4)
    d = rng.normal() * math.sqrt(a)
    e = rng.normal() * math.sqrt(c)
    return CharTerm(a, b, c, d, e, 0.0)


def random_params(rng, M=None) -> EvolutionParams:
    gamma = 10 ** rng.uniform(0, 4)
    M = M or 10 ** rng.uniform(-26, -20)
    D_xx = 10 ** rng.uniform(-34, -30)
    q = 10 ** rng.uniform(0, 1)
    D_pp = q * (HBAR * gamma / 4) ** 2 / D_xx
    return EvolutionParams(gamma, M, DiffusionCoeffs(D_pp, D_xx), HBAR)


def term_distance(x: CharTerm, y: CharTerm) -> float:
    sa, sc = math.sqrt(abs(y.a)), math.sqrt(abs(y.c))
    scales = (abs(y.a), sa * sc, abs(y.c), max(abs(y.d), sa), max(abs(y.e), sc), 1.0)
    return max(abs(p - q) / s for p, q, s in zip(x.astuple(), y.astuple(), scales))


def criterion_3(n: int = 100, seed: int = 20240607) -> CriterionResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        term = random_admissible_term(rng)
        params = random_params(rng)
        # gamma t between 1e-6 and 5 for each leg
        t1, t2 = 10 ** rng.uniform(-6, 0.7, size=2) / params.gamma
        two = evolve_term(evolve_term(term, t1, params), t2, params)
        one = evolve_term(term, t1 + t2, params)
        worst = max(worst, term_distance(two, one))
    return CriterionResult(3, "semigroup composition of coefficient maps", worst <= 1e-12, worst, 1e-12, f"{n} random terms")


def sample_times(stop: float, n: int = 24, start: float = 1e-26):
    return np.concatenate([[0.0], np.geomspace(start, stop, n)])


def criterion_4() -> CriterionResult:
    _, _, params = fig1_setup()
    spec, cparams = fig4_cat_setup()
    worst = 0.0
    for state, p in ((build_gaussian(presets.fig1_packet()), params), (build_cat(spec), cparams)):
        for t in sample_times(5e-3):
            worst = max(worst, abs(trace_of(evolve_state(state, float(t), p)) - 1))
    return CriterionResult(4, "trace preservation (Gaussian and cat)", worst <= 1e-12, worst, 1e-12)


def grid_purity(state: ExpSumState, n: int = 257) -> float:
    X, s = oracle.rotated_half_widths(state)
    grid = oracle.sample_state(state, oracle.uniform_axis(X, n), oracle.uniform_axis(s, n), "rotated")
    return oracle.grid_quadrature(grid, "purity")


def purity_expressions(state: ExpSumState):
    """(closed form, L_x/dx, L_p/dp, grid quadrature) for a single Gaussian."""
    m = observables.gaussian_moments(state)
    return (
        observables.coherence_ratio(state),
        observables.coherence_length(state, "x") / math.sqrt(m.var_x),
        observables.coherence_length(state, "p") / math.sqrt(m.var_p),
        grid_purity(state),
    )


def criterion_5() -> CriterionResult:
    _, _, params = fig1_setup()
    state = build_gaussian(presets.fig1_packet())
    times = np.concatenate([sample_times(5 / params.gamma, 30), np.linspace(5e-4, 5e-3, 10)])
    times.sort()
    spread = 0.0
    purities = []
    for t in times:
        vals = purity_expressions(evolve_state(state, float(t), params))
        spread = max(spread, (max(vals) - min(vals)) / max(vals))
        purities.append(vals[0])
    starts = abs(purities[0] - 1) <= 1e-12
    bounded = all(p <= 1 + 1e-12 for p in purities[1:]) and all(p < 1 for p in purities[1:])
    t_hit = next((t for t, p in zip(times, purities) if p < 0.01), math.inf)
    ok = spread <= 1e-6 and starts and bounded and t_hit < 2e-5
    return CriterionResult(5, "purity identities (closed form, L_x/dx, L_p/dp, grid)", ok, spread, 1e-6,
                           f"purity(0)={purities[0]:.15f}; first t with purity<0.01: {t_hit:.2e}s (< 2e-5s)")


def free_cat_deviation(t: float, n: int = 401) -> float:
    spec = presets.fig4_cat()
    free = EvolutionParams(0.0, spec.M, DiffusionCoeffs(0.0, 0.0), spec.hbar)
    w = math.sqrt(spec.sigma**2 + (spec.hbar * t / (2 * spec.M * spec.sigma)) ** 2)
    x = np.linspace(-1, 1, n) * (abs(spec.l / 2 - spec.v * t) + 8 * w)
    evolved = to_position(evolve_state(build_cat(spec), t, free))
    numeric = evaluate(evolved, x, x).real
    closed = catlab.free_cat_diagonal(spec, t, x)
    return float(np.max(np.abs(numeric - closed)) / np.max(np.abs(closed)))


def criterion_6() -> CriterionResult:
    times = (0.0, 5e-4, 1e-3, 2e-3, 3e-3, 4e-3)
    worst = max(free_cat_deviation(t) for t in times)
    return CriterionResult(6, "free cat diagonal vs closed form (401 points)", worst <= 1e-9, worst, 1e-9,
                           "deviation relative to the profile peak")


def initial_attenuation_slope(spec, params, h: float = 1e-26) -> float:
    """Forward-difference dW/dt at 0, with W(h) - 1 taken from expm1(ln W)."""
    return math.expm1(catlab.attenuation(spec, params, h).log_W) / h


def criterion_7() -> CriterionResult:
    spec, params = fig4_cat_setup()
    w0 = catlab.attenuation(spec, params, 0.0)
    w0_literal = catlab.attenuation(spec, params, 0.0, mode="literal", precision="extended")
    err0 = max(abs(w0.W - 1), abs(w0_literal.W - 1))
    slope = initial_attenuation_slope(spec, params)
    rate = 1 / catlab.decoherence_time(spec, params.D_xx)
    slope_err = abs(-slope - rate) / rate
    free_err = 0.0
    for g in (0.0, params.gamma):
        free = EvolutionParams(g, spec.M, DiffusionCoeffs(0.0, 0.0), spec.hbar)
        for t in sample_times(1e-2, 40):
            free_err = max(free_err, abs(catlab.attenuation(spec, free, float(t)).W - 1))
    ok = err0 <= 1e-14 and slope_err <= 5e-3 and free_err <= 1e-12
    detail = f"|W(0)-1|={err0:.1e} (1e-14); slope rel err={slope_err:.1e} (5e-3); free |W-1|={free_err:.1e} (1e-12)"
    return CriterionResult(7, "attenuation: W(0)=1, initial slope, free W=1", ok, slope_err, 5e-3, detail)


def criterion_8() -> CriterionResult:
    _, _, params = fig1_setup()
    hbar = params.hbar
    g = build_gaussian(presets.fig1_packet())
    worst_gap = math.inf
    worst_eq = 0.0
    for t in sample_times(5e-3, 30):
        u = observables.uncertainty_products(evolve_state(g, float(t), params))
        worst_gap = min(worst_gap, u.Lx_dp - hbar / 2, u.Lp_dx - hbar / 2)
        worst_eq = max(worst_eq, abs(u.Lx_dp - u.Lp_dx) / u.Lx_dp)
    spec, cparams = fig4_cat_setup()
    cat = build_cat(spec)
    for t in sample_times(1e-2, 30):
        u = observables.uncertainty_products(evolve_state(cat, float(t), cparams))
        worst_gap = min(worst_gap, u.Lx_Mp - hbar / 2)
    slack = 1e-10 * hbar
    ok = worst_gap >= -slack and worst_eq <= 1e-8
    return CriterionResult(8, "uncertainty relations L_x dp = L_p dx >= hbar/2, L_x M_p >= hbar/2", ok, worst_gap / hbar,
                           1e-10, f"min (product - hbar/2)/hbar = {worst_gap / hbar:.3e}; max |L_x dp - L_p dx|/L_x dp = {worst_eq:.1e}")


def fitted_var_x_slope(params: EvolutionParams, t_stop: float, n: int = 101) -> float:
    state = build_gaussian(presets.fig1_packet())
    times = np.linspace(0.0, t_stop, n)
    var0 = observables.gaussian_moments(state).var_x
    inc = np.array([observables.gaussian_moments(evolve_state(state, float(t), params)).var_x - var0 for t in times])
    # least-squares line through the increments
    slope, _ = np.polyfit(times, inc, 1)
    return float(slope)


def criterion_9() -> CriterionResult:
    phys, coeffs, params = fig1_setup()
    slope = fitted_var_x_slope(params, 1e-7)
    target = 2 * coeffs.D_xx
    rel = abs(slope - target) / target
    cl = EvolutionParams(phys.gamma, phys.M, diagnostics.caldeira_leggett(phys), phys.hbar)
    cl_ratio = abs(fitted_var_x_slope(cl, 1e-7)) / abs(slope)
    ok = rel <= 1e-2 and cl_ratio <= 1e-2
    detail = f"fitted slope {slope:.3e} m^2/s vs 2 D_xx = {target:.3e} m^2/s; Caldeira-Leggett/measurement slope ratio {cl_ratio:.1e} (1e-2)"
    return CriterionResult(9, "short-time var_x slope = 2 D_xx over [0, 1e-7] s", ok, rel, 1e-2, detail)


def criterion_10() -> CriterionResult:
    _, coeffs, params = fig1_setup()
    rows = diagnostics.q_sweep(coeffs.D_xx, params.gamma, (0.25, 0.81, 1.0, 4.0), params.hbar)
    worst = 0.0
    negative_ok = True
    for q, rate in rows:
        expected = params.gamma * (math.sqrt(q) - 1)
        worst = max(worst, abs(rate - expected) / max(abs(expected), params.gamma))
        if q < 1 and not rate < 0:
            negative_ok = False
    ok = worst <= 1e-9 and negative_ok
    return CriterionResult(10, "q-sweep entropy rate = gamma (sqrt q - 1)", ok, worst, 1e-9,
                           "rate < 0 for q < 1" if negative_ok else "rate not negative for some q < 1")


def hermiticity_violation(state: ExpSumState, n: int = 101):
    half = oracle.position_half_width(state)
    x = oracle.uniform_axis(half, n)
    grid = oracle.sample_state(state, x, x, "position").values
    peak = np.max(np.abs(grid))
    herm = np.max(np.abs(grid - grid.conj().T)) / peak
    diag = np.diagonal(grid)
    neg = max(0.0, -float(np.min(diag.real))) / peak
    imag = float(np.max(np.abs(diag.imag))) / peak
    return float(herm), max(neg, imag)


def criterion_11() -> CriterionResult:
    spec, params = fig4_cat_setup()
    cat = build_cat(spec)
    worst = 0.0
    for t in np.concatenate([[0.0], np.geomspace(1e-24, 1e-3, 9)]):
        h, p = hermiticity_violation(evolve_state(cat, float(t), params))
        worst = max(worst, h, p)
    return CriterionResult(11, "Hermiticity and diagonal positivity of evolved cat (101x101)", worst <= 1e-10, worst, 1e-10,
                           "10 sampled times")


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7,
            criterion_8, criterion_9, criterion_10, criterion_11)


def run_all():
    results = []
    for fn in CRITERIA:
        t0 = time.perf_counter()
        res = fn()
        if not res.runtime:
            res.runtime = time.perf_counter() - t0
        results.append(res)
    return results
