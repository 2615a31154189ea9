import logging
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import integrate

from qbmlab import catlab
from qbmlab.errors import InvalidSpecError, SingularTermError
from qbmlab.observables import coherence_length, spread
from qbmlab.propagator import EvolutionParams, evolve_state, evolve_term
from qbmlab.statekit import (
    CatSpec,
    DiffusionCoeffs,
    GaussianSpec,
    build_cat,
    build_gaussian,
    char_to_coord,
    coord_to_momentum,
    evaluate,
    momentum_rep,
    to_position,
)


def free_params(spec, gamma=0.0):
    return EvolutionParams(gamma, spec.M, DiffusionCoeffs(0.0, 0.0), spec.hbar)


def test_initial_coefficients(cat_setup):
    spec, params = cat_setup
    co = catlab.cat_coefficients(spec, params, 0.0)
    assert co.d_bar == -spec.l / 2
    assert_allclose(co.e_bar.real, spec.M * spec.v, rtol=1e-15)


@pytest.mark.parametrize("t", [0.0, 1e-9, 1e-5, 1e-3, 0.1])
def test_coefficients_match_propagator(cat_setup, t):
    spec, params = cat_setup
    co = catlab.cat_coefficients(spec, params, t)
    terms = build_cat(spec).terms
    t1, t3 = evolve_term(terms[0], t, params), evolve_term(terms[2], t, params)
    assert_allclose([co.a_bar, co.b_bar, co.c_bar], [t1.a, t1.b, t1.c], rtol=1e-12)
    assert_allclose([co.d_bar, co.e_bar, co.f_bar], [t1.d, t1.e, t1.f], rtol=1e-12, atol=1e-300)
    assert_allclose([co.d_tilde, co.e_tilde, co.f_tilde], [t3.d, t3.e, t3.f], rtol=1e-12)
    caps = catlab.cat_capitals(co, spec.hbar)
    c1, c3 = char_to_coord(t1, spec.hbar), char_to_coord(t3, spec.hbar)
    assert_allclose([caps.A, caps.B, caps.C], [c1.A, c1.B, c1.C], rtol=1e-10)
    assert_allclose([caps.D_bar, caps.E_bar, caps.F_bar], [c1.D, c1.E, c1.F], rtol=1e-10)
    assert_allclose([caps.D_tilde, caps.E_tilde, caps.F_tilde], [c3.D, c3.E, c3.F], rtol=1e-10)


def test_free_packet_centres(cat_setup):
    spec, _ = cat_setup
    for t in (1e-4, 1e-3):
        co = catlab.cat_coefficients(spec, free_params(spec), t)
        assert_allclose(-co.d_bar.real, spec.l / 2 - spec.v * t, rtol=1e-14)


@pytest.mark.parametrize("t", [0.0, 1e-8, 1e-5, 1e-3])
def test_diagonal_normalized_and_consistent(cat_setup, t):
    spec, params = cat_setup
    co = catlab.cat_coefficients(spec, params, t)
    half = abs(co.d_bar.real) + 12 * math.sqrt(2 * co.a_bar.real)
    val = integrate.quad(lambda x: catlab.cat_diagonal(spec, params, t, x), -half, half, limit=400, points=[0.0])[0]
    assert_allclose(val, 1.0, rtol=1e-8)
    x = np.linspace(-half, half, 801)
    closed = catlab.cat_diagonal(spec, params, t, x)
    direct = evaluate(to_position(evolve_state(build_cat(spec), t, params)), x, x).real
    assert np.max(np.abs(closed - direct)) <= 1e-10 * np.max(direct)


def test_free_diagonal_is_zero_damping_limit(cat_setup):
    spec, _ = cat_setup
    for t in (0.0, 1e-4, 2e-3):
        x = np.linspace(-1.5e-6, 1.5e-6, 301)
        a = catlab.free_cat_diagonal(spec, t, x)
        b = catlab.cat_diagonal(spec, free_params(spec), t, x)
        assert np.max(np.abs(a - b)) <= 1e-12 * np.max(a)


def test_free_diagonal_fringe_wavenumber():
    # the fringe at the origin has wavenumber (4Mv sigma^2/hbar + hbar l t/2 sigma^2 M)/(2 w^2)
    spec = CatSpec(l=5.0, sigma=0.5, v=0.3, M=1.0, hbar=1.0)
    t = 0.4
    w2 = spec.sigma**2 + t**2 / (4 * spec.sigma**2)
    k = (4 * spec.v * spec.sigma**2 + spec.l * t / (2 * spec.sigma**2)) / (2 * w2)
    centre = spec.l / 2 - spec.v * t
    norm = 2 * (1 + math.exp(-spec.overlap_exponent)) * math.sqrt(2 * math.pi * w2)
    x = np.linspace(-0.3, 0.3, 7)
    background = (np.exp(-((x - centre) ** 2) / (2 * w2)) + np.exp(-((x + centre) ** 2) / (2 * w2))) / norm
    fringe = (catlab.free_cat_diagonal(spec, t, x) - background) * norm / (2 * np.exp(-(x * x + centre**2) / (2 * w2)))
    assert_allclose(fringe, np.cos(k * x), atol=1e-12)


def test_attenuation_initial_value(cat_setup):
    spec, params = cat_setup
    assert catlab.attenuation(spec, params, 0.0).W == 1.0
    assert abs(catlab.attenuation(spec, params, 0.0, mode="literal", precision="extended").W - 1) <= 1e-14


@pytest.mark.parametrize("gamma", [0.0, 1000.0])
def test_free_attenuation_is_one(cat_setup, gamma):
    spec, _ = cat_setup
    for t in np.geomspace(1e-12, 1.0, 13):
        assert abs(catlab.attenuation(spec, free_params(spec, gamma), float(t)).W - 1) <= 1e-12


def test_initial_slope(cat_setup):
    spec, params = cat_setup
    h = 1e-26
    slope = math.expm1(catlab.attenuation(spec, params, h).log_W) / h
    expected = -params.D_xx * (spec.l**2 / (4 * spec.sigma**4) + 4 * spec.M**2 * spec.v**2 / spec.hbar**2)
    assert_allclose(slope, expected, rtol=5e-3)
    assert_allclose(1 / catlab.decoherence_time(spec, params.D_xx), -expected, rtol=1e-14)


def test_initial_slope_static_cat():
    # v = 0: tau_D = 4 sigma^4 / (D_xx l^2)
    spec = CatSpec(l=4e-7, sigma=0.73e-7, v=0.0, M=5.01e-22)
    params = EvolutionParams(0.0, spec.M, DiffusionCoeffs(0.0, 1e-20), spec.hbar)
    tau = catlab.decoherence_time(spec, 1e-20)
    assert_allclose(tau, 4 * spec.sigma**4 / (1e-20 * spec.l**2), rtol=1e-14)
    # |d_tilde| grows like t, so keep h far below tau
    h = tau * 1e-14
    slope = math.expm1(catlab.attenuation(spec, params, h).log_W) / h
    assert_allclose(-slope, 1 / tau, rtol=1e-6)


def test_decoherence_time_edge_cases(cat_setup):
    spec, _ = cat_setup
    assert catlab.decoherence_time(CatSpec(0.0, 1e-7, 0.0, 1e-22), 1e-30) == math.inf
    assert catlab.decoherence_time(spec, 0.0) == math.inf
    with pytest.raises(InvalidSpecError):
        catlab.decoherence_time(spec, -1.0)
    # the printed bracket differs from the consistent one by powers of sigma
    ratio = catlab.decoherence_bracket(spec, "printed") / catlab.decoherence_bracket(spec, "consistent")
    assert_allclose(ratio, spec.sigma**2, rtol=1e-14)


def test_stable_and_extended_literal_agree(cat_setup):
    spec, params = cat_setup
    for t in (1e-12, 1e-9, 1e-7, 1e-5, 1e-3):
        s = catlab.attenuation(spec, params, t)
        e = catlab.attenuation(spec, params, t, mode="literal", precision="extended")
        assert abs(s.log_W - e.log_W) <= 1e-12 * max(1.0, abs(e.log_W))


@given(st.floats(-14, -2), st.floats(0.01, 1.0))
def test_attenuation_monotone(log_t, frac):
    from qbmlab.presets import fig4_cat, fig1_physical
    from qbmlab.diagnostics import measurement_diffusion

    spec = fig4_cat()
    phys = fig1_physical()
    params = EvolutionParams(phys.gamma, spec.M, measurement_diffusion(phys), spec.hbar)
    t2 = 10**log_t
    t1 = t2 * frac
    w1, w2 = catlab.attenuation(spec, params, t1).log_W, catlab.attenuation(spec, params, t2).log_W
    # ln W saturates at late times; allow rounding on the plateau
    assert w2 <= w1 + 1e-12 * abs(w1)
    assert w1 <= 0


def test_interference_excess_matches_diagonal(cat_setup):
    spec, params = cat_setup
    t = 1e-6
    co = catlab.cat_coefficients(spec, params, t)
    a, db = co.a_bar.real, co.d_bar.real
    pref = math.exp(-spec.norm_log) / (2 * math.sqrt(math.pi * a))
    background = pref * 2 * math.exp(-db * db / (4 * a))
    assert_allclose(catlab.interference_excess(spec, params, t), catlab.cat_diagonal(spec, params, t, 0.0) - background, rtol=1e-10)


def test_large_time_growth_matches_single_gaussian(cat_setup):
    spec, params = cat_setup
    g = build_gaussian(GaussianSpec(0.0, 0.0, spec.sigma, spec.hbar))
    cat = build_cat(spec)
    t = 10 / params.gamma
    h = t * 1e-3

    def slope(s, f):
        return (f(evolve_state(s, t + h, params)) ** 2 - f(evolve_state(s, t - h, params)) ** 2) / (2 * h)

    assert_allclose(slope(cat, spread), slope(g, spread), rtol=1e-6)
    assert_allclose(slope(cat, coherence_length), slope(g, coherence_length), rtol=1e-6)


def test_printed_formula_mode_is_reported(cat_setup, caplog):
    spec, params = cat_setup
    with caplog.at_level(logging.INFO, logger="qbmlab"):
        rows = catlab.printed_discrepancy_report(spec, params, [0.0, 1e-6])
    assert len(rows) == 2
    for row in rows:
        assert row["M_x"] > 0 and row["L_p"] > 0
        assert set(k for k in row if k.endswith("_reldev")) == {"M_x_reldev", "L_x_reldev", "M_p_reldev", "L_p_reldev"}
    # reference path: M_x(0) = L_x(0)
    assert_allclose(rows[0]["M_x"], rows[0]["L_x"], rtol=1e-10)
    assert any("literal" in r.getMessage() for r in caplog.records)


@pytest.mark.parametrize("t", [0.0, 1e-6, 1e-3])
def test_momentum_coefficients_match_transform(cat_setup, t):
    spec, params = cat_setup
    caps = catlab.cat_capitals(catlab.cat_coefficients(spec, params, t), spec.hbar)
    mom = catlab.cat_momentum_coefficients(caps, spec.hbar)
    pos = to_position(evolve_state(build_cat(spec), t, params)).terms
    m1, m3 = coord_to_momentum(pos[0], spec.hbar), coord_to_momentum(pos[2], spec.hbar)
    assert_allclose([mom.A, mom.B, mom.C], [m1.A, m1.B, m1.C], rtol=1e-10)
    assert_allclose([mom.D_bar, mom.E_bar], [m1.D, m1.E], rtol=1e-10, atol=1e-300)
    assert_allclose([mom.D_tilde, mom.E_tilde], [m3.D, m3.E], rtol=1e-10)
    assert_allclose([mom.F_bar, mom.F_tilde], [m1.F, m3.F], rtol=1e-10)
    # the printed table agrees on D_tilde and flips the sign of the other three
    printed = catlab.cat_momentum_coefficients(caps, spec.hbar, form="printed")
    assert_allclose(printed.D_tilde, mom.D_tilde, rtol=1e-12)
    assert_allclose([printed.D_bar, printed.E_bar, printed.E_tilde], [-mom.D_bar, -mom.E_bar, -mom.E_tilde], rtol=1e-12, atol=1e-300)


def test_momentum_packets_centred_at_plus_minus_Mv(cat_setup):
    spec, _ = cat_setup
    mom = momentum_rep(to_position(build_cat(spec)))
    Mv = spec.M * spec.v
    p = np.linspace(-2 * Mv, 2 * Mv, 4001)
    diag = evaluate(mom, p, p).real
    left, right = p[p < 0][np.argmax(diag[p < 0])], p[p > 0][np.argmax(diag[p > 0])]
    step = p[1] - p[0]
    assert abs(right - Mv) <= step and abs(left + Mv) <= step


def test_momentum_coefficients_singular():
    caps = catlab.CatCapitals(0, 0, 1, 0, 0, 0, 0, 0, 0)
    with pytest.raises(SingularTermError):
        catlab.cat_momentum_coefficients(caps, 1.0)


def test_bad_arguments(cat_setup):
    spec, params = cat_setup
    with pytest.raises(InvalidSpecError):
        catlab.attenuation(spec, params, -1.0)
    with pytest.raises(ValueError):
        catlab.attenuation(spec, params, 1.0, mode="exact")
    with pytest.raises(ValueError):
        catlab.attenuation(spec, params, 1.0, mode="literal", precision="quad")
