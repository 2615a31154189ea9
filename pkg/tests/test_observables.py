import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import integrate

from qbmlab import diagnostics, oracle
from qbmlab.errors import UnsupportedStateError
from qbmlab.observables import (
    asymptotic_reference,
    coherence_from_traces,
    coherence_length,
    coherence_ratio,
    gaussian_coherence_lengths,
    gaussian_moments,
    purity,
    spread,
    spread_from_traces,
    state_moments,
    trace_moments,
    uncertainty_products,
)
from qbmlab.propagator import EvolutionParams, evolve_state, evolve_term
from qbmlab.statekit import CatSpec, DiffusionCoeffs, ExpSumState, Rep, build_cat, build_gaussian, evaluate, momentum_rep, to_position
from qbmlab.verification import random_admissible_term, random_params


def test_reference_mean_momentum(fig1, packet):
    _, _, params = fig1
    m = gaussian_moments(evolve_state(build_gaussian(packet), 1e-3, params))
    assert_allclose(m.mean_p, packet.p0 * math.exp(-1), rtol=1e-14)
    assert_allclose(m.mean_p, 1.843e-26, rtol=1e-3)
    ode = oracle.moment_ode_integrate(gaussian_moments(build_gaussian(packet)), params, [0.0, 1e-3])[-1]
    assert_allclose(m.mean_p, ode.mean_p, rtol=1e-9)
    assert_allclose(m.var_x, ode.var_x, rtol=1e-9)


def test_initial_moments(packet):
    m = gaussian_moments(build_gaussian(packet))
    assert (m.mean_x, m.mean_p, m.cov_xp) == (0.0, packet.p0, 0.0)
    assert_allclose(m.var_x, packet.dx0**2, rtol=1e-15)
    assert_allclose(m.var_p, packet.dp0**2, rtol=1e-15)


def test_long_time_momentum_variance(fig1, packet):
    _, coeffs, params = fig1
    m = gaussian_moments(evolve_state(build_gaussian(packet), 50 / params.gamma, params))
    assert_allclose(m.var_p, coeffs.D_pp / params.gamma, rtol=1e-12)


def test_gaussian_moments_rejects_superpositions(cat_setup):
    with pytest.raises(UnsupportedStateError):
        gaussian_moments(build_cat(cat_setup[0]))


@pytest.mark.parametrize("t", [0.0, 1e-6, 1e-4, 3e-3])
def test_purity_closed_form(fig1, packet, t):
    state = evolve_state(build_gaussian(packet), t, fig1[2])
    a, b, c = (state.terms[0].a.real, state.terms[0].b.real, state.terms[0].c.real)
    expected = (state.hbar / 2) / math.sqrt(4 * a * c - b * b)
    assert_allclose(trace_moments(state).tr_rho2, expected, rtol=1e-10)
    assert_allclose(purity(state), expected, rtol=1e-10)
    assert_allclose(coherence_ratio(state), expected, rtol=1e-14)
    m = gaussian_moments(state)
    # the two representation ratios
    assert_allclose(coherence_length(state, "x") / math.sqrt(m.var_x), expected, rtol=1e-10)
    assert_allclose(coherence_length(state, "p") / math.sqrt(m.var_p), expected, rtol=1e-10)


def test_pure_gaussian_lengths(packet):
    g = build_gaussian(packet)
    assert_allclose(spread(g, "x"), packet.dx0, rtol=1e-12)
    assert_allclose(coherence_length(g, "x"), packet.dx0, rtol=1e-12)
    assert_allclose(coherence_length(g, "p"), packet.dp0, rtol=1e-12)
    assert_allclose(spread(g, "p"), packet.dp0, rtol=1e-12)
    Lx2, Lp2 = gaussian_coherence_lengths(g)
    assert_allclose((Lx2, Lp2), (packet.dx0**2, packet.dp0**2), rtol=1e-14)
    u = uncertainty_products(g)
    for v in (u.Lx_dp, u.Lp_dx, u.Lx_Mp):
        assert_allclose(v, packet.hbar / 2, rtol=1e-12)


def test_cat_initial_spread_equals_coherence(cat_setup):
    cat = build_cat(cat_setup[0])
    assert_allclose(spread(cat, "x"), coherence_length(cat, "x"), rtol=1e-10)


# toy units, where every grid integral is cheap and well resolved
TOY_CAT = CatSpec(l=3.0, sigma=0.6, v=0.5, M=1.0, hbar=1.0)
TOY_PARAMS = EvolutionParams(0.7, 1.0, DiffusionCoeffs(0.05, 0.02), 1.0)


def _grid(state, n=401):
    X, s = oracle.rotated_half_widths(state)
    return oracle.sample_state(state, oracle.uniform_axis(X, n), oracle.uniform_axis(s, n), "rotated")


@pytest.mark.parametrize("t", [0.0, 0.5, 2.0])
def test_cat_traces_against_grid_quadrature(t):
    rho = to_position(evolve_state(build_cat(TOY_CAT), t, TOY_PARAMS))
    tm = trace_moments(rho)
    gx = _grid(rho)
    for kind, val in [("trace", 1.0), ("purity", tm.tr_rho2), ("tr_rho2_x", tm.tr_rho2_x),
                      ("tr_rho2_x2", tm.tr_rho2_x2), ("tr_rho_x_rho_x", tm.tr_rho_x_rho_x)]:
        assert_allclose(oracle.grid_quadrature(gx, kind), val, rtol=1e-6, atol=1e-9)
    gp = _grid(momentum_rep(rho))
    for kind, val in [("tr_rho2_x", tm.tr_rho2_p), ("tr_rho2_x2", tm.tr_rho2_p2), ("tr_rho_x_rho_x", tm.tr_rho_p_rho_p)]:
        assert_allclose(oracle.grid_quadrature(gp, kind), val, rtol=1e-6, atol=1e-9)


@pytest.mark.parametrize("t", [0.0, 0.4, 3.0])
def test_stable_and_raw_forms_agree(t):
    rho = evolve_state(build_cat(TOY_CAT), t, TOY_PARAMS)
    tm = trace_moments(rho)
    for axis in ("x", "p"):
        assert_allclose(spread(rho, axis), spread_from_traces(tm, axis), rtol=1e-9)
        assert_allclose(coherence_length(rho, axis), coherence_from_traces(tm, axis), rtol=1e-9)


def test_state_moments_against_quadrature():
    rho = evolve_state(build_cat(TOY_CAT), 0.8, TOY_PARAMS)
    pos = to_position(rho)
    diag = lambda x: evaluate(pos, x, x).real
    norm = integrate.quad(diag, -40, 40, limit=200)[0]
    mx = integrate.quad(lambda x: x * diag(x), -40, 40, limit=200)[0] / norm
    vx = integrate.quad(lambda x: (x - mx) ** 2 * diag(x), -40, 40, limit=200)[0] / norm
    m = state_moments(rho)
    assert_allclose(m.mean_x, mx, atol=1e-10)
    assert_allclose(m.var_x, vx, rtol=1e-9)


def test_state_moments_reduce_to_gaussian(fig1, packet):
    state = evolve_state(build_gaussian(packet), 2e-4, fig1[2])
    a, b = state_moments(state), gaussian_moments(state)
    for k, v in b.as_dict().items():
        assert_allclose(getattr(a, k), v, rtol=1e-12)


def test_short_time_coherence_in_momentum(fig1, packet):
    _, _, params = fig1
    g = build_gaussian(packet)
    for t in (1e-12, 1e-11):
        ref = asymptotic_reference(params, packet, "short", t)
        exact = gaussian_coherence_lengths(evolve_state(g, t, params))[1]
        assert_allclose(exact, ref.coherence_p2, rtol=1e-6)


def test_long_time_coherence_in_position(fig1, packet):
    _, coeffs, params = fig1
    g = build_gaussian(packet)
    # leading correction is 1/(2 gamma t)
    t = 1e6 / params.gamma
    ref = asymptotic_reference(params, packet, "long", t)
    Lx2 = gaussian_coherence_lengths(evolve_state(g, t, params))[0]
    assert_allclose(Lx2, packet.hbar**2 * params.gamma / (4 * coeffs.D_pp), rtol=2e-6)
    assert_allclose(Lx2, ref.coherence_x2, rtol=2e-6)
    assert_allclose(coherence_length(evolve_state(g, t, params), "x") ** 2, Lx2, rtol=1e-8)


def test_caldeira_leggett_short_time_slope(fig1, packet):
    phys = fig1[0]
    cl = EvolutionParams(phys.gamma, phys.M, diagnostics.caldeira_leggett(phys), phys.hbar)
    ref = asymptotic_reference(cl, packet, "short", 1e-9)
    assert ref.moments.var_x == packet.dx0**2


def test_short_time_reference_is_second_order():
    # Richardson: halving t quarters the residual
    spec = build_gaussian.__globals__["GaussianSpec"](0.2, 0.4, 0.9, hbar=1.0)
    g = build_gaussian(spec)
    errs = []
    for t in (1e-3, 5e-4, 2.5e-4):
        exact = gaussian_moments(evolve_state(g, t, TOY_PARAMS))
        ref = asymptotic_reference(TOY_PARAMS, spec, "short", t).moments
        errs.append(np.array([exact.var_x - ref.var_x, exact.var_p - ref.var_p, exact.mean_p - ref.mean_p]))
    ratios = errs[0] / errs[1], errs[1] / errs[2]
    for r in ratios:
        assert_allclose(r, 4.0, rtol=2e-3)


def test_long_time_momentum_variance_reference(fig1, packet):
    _, _, params = fig1
    t = 30 / params.gamma
    ref = asymptotic_reference(params, packet, "long", t)
    exact = gaussian_moments(evolve_state(build_gaussian(packet), t, params))
    assert_allclose(exact.var_p, ref.moments.var_p, rtol=1e-12)
    with pytest.raises(ValueError):
        asymptotic_reference(params, packet, "medium", t)


def test_uncertainty_products_cat(cat_setup):
    spec, params = cat_setup
    cat = build_cat(spec)
    for t in np.linspace(0.0, 5e-5, 21):
        u = uncertainty_products(evolve_state(cat, float(t), params))
        assert u.Lx_Mp >= spec.hbar / 2 * (1 - 1e-10)
        assert math.isnan(u.Lx_dp)


def test_gaussian_uncertainty_equality(fig1, packet):
    g = build_gaussian(packet)
    for t in (1e-8, 1e-5, 1e-3):
        u = uncertainty_products(evolve_state(g, t, fig1[2]))
        assert_allclose(u.Lx_dp, u.Lp_dx, rtol=1e-10)
        assert u.Lx_dp >= packet.hbar / 2


@given(st.integers(0, 2**32 - 1))
def test_purity_bounded_for_lindblad_dynamics(seed):
    rng = np.random.default_rng(seed)
    term = random_admissible_term(rng)
    params = random_params(rng)
    t = 10 ** rng.uniform(-4, 1) / params.gamma
    p0 = coherence_ratio(ExpSumState((term,), Rep.CHARACTERISTIC))
    p1 = coherence_ratio(ExpSumState((evolve_term(term, t, params),), Rep.CHARACTERISTIC))
    assert 0 < p1 <= p0 * (1 + 1e-12) <= 1 + 1e-12
