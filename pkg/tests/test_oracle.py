import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from qbmlab import oracle
from qbmlab.errors import ExtendGridError, InvalidSpecError, RefinementRequiredError, ResolutionError
from qbmlab.observables import MomentSet, coherence_ratio, gaussian_moments
from qbmlab.propagator import EvolutionParams, evolve_state
from qbmlab.statekit import CatSpec, DiffusionCoeffs, GaussianSpec, build_cat, build_gaussian, to_position
from qbmlab.verification import characteristics_deviation

TOY = EvolutionParams(0.7, 1.0, DiffusionCoeffs(0.05, 0.02), 1.0)
TOY_CAT = CatSpec(l=3.0, sigma=0.6, v=0.5, M=1.0, hbar=1.0)


def node_deltas(grid, Dh, hbar, count=41):
    """Delta values on the grid's s nodes (no interpolation), spanning about +-Dh."""
    s = grid.axis2
    inside = s[np.abs(s) <= Dh * hbar]
    step = max(1, inside.size // count)
    half = inside.size // 2
    idx = np.arange(half % step, inside.size, step)
    return inside[idx] / hbar


def rotated_grid(state, n=None):
    n = n or oracle.nyquist_points(state, minimum=257)
    X, s = oracle.rotated_half_widths(state)
    return oracle.sample_state(state, oracle.uniform_axis(X, n), oracle.uniform_axis(s, n), "rotated")


def test_uniform_axis():
    x = oracle.uniform_axis(2.0, 5, centre=1.0)
    assert_allclose(x, [-1.0, 0.0, 1.0, 2.0, 3.0])
    with pytest.raises(InvalidSpecError):
        oracle.uniform_axis(1.0, 4)


# moment equations

def test_free_flight():
    free = EvolutionParams(0.0, 2.0, DiffusionCoeffs(0.0, 0.0), 1.0)
    out = oracle.moment_ode_integrate(MomentSet(0.0, 3.0, 1.0, 1.0, 0.0), free, [0.0, 0.5, 4.0])
    assert_allclose([m.mean_x for m in out], [0.0, 0.75, 6.0], rtol=1e-14)
    assert_allclose(out[-1].var_x, 1.0 + 16.0 / 4, rtol=1e-14)


def test_moments_match_closed_form(fig1, packet):
    _, _, params = fig1
    g = build_gaussian(packet)
    times = [0.0, 1e-5, 1e-4, 1e-3, 5e-3]
    for t, m in zip(times, oracle.moment_ode_integrate(gaussian_moments(g), params, times)):
        exact = gaussian_moments(evolve_state(g, t, params))
        for k, v in exact.as_dict().items():
            ref = getattr(m, k)
            scale = max(abs(v), math.sqrt(exact.var_x) if k in ("mean_x",) else abs(v)) or 1.0
            assert abs(ref - v) <= 1e-8 * scale


def test_stationary_momentum_variance():
    vp = TOY.D_pp / TOY.gamma
    out = oracle.moment_ode_integrate(MomentSet(0.0, 0.0, 1.0, vp, 0.0), TOY, [0.0, 2.0, 10.0])
    for m in out:
        assert_allclose(m.var_p, vp, rtol=1e-13)


def test_refinement_required():
    with pytest.raises(RefinementRequiredError):
        oracle.moment_ode_integrate(MomentSet(0.0, 1.0, 1.0, 1.0, 0.0), TOY, [0.0, 50.0], max_gamma_step=20.0)
    with pytest.raises(InvalidSpecError):
        oracle.moment_ode_integrate(MomentSet(0.0, 1.0, 1.0, 1.0, 0.0), TOY, [1.0, 2.0])


# characteristics

def test_characteristics_identity_at_zero():
    state = build_gaussian(GaussianSpec(0.2, 0.5, 0.8, 1.0))
    k, D = oracle.uniform_axis(5.0, 65), oracle.uniform_axis(5.0, 65)
    chi0 = oracle.sample_state(state, k, D, "characteristic")
    out = oracle.characteristics_integrate(chi0, TOY, 0.0)
    assert_allclose(out.values, chi0.values, rtol=0, atol=1e-15)


def test_characteristics_gaussian_reference(fig1, packet):
    dev = characteristics_deviation(build_gaussian(packet), fig1[2], 1e-4)
    assert dev <= 1e-6


def test_characteristics_pure_transport():
    # without diffusion chi is carried unchanged along each characteristic
    state = build_cat(TOY_CAT)
    params = EvolutionParams(0.7, 1.0, DiffusionCoeffs(0.0, 0.0), 1.0)
    t = 0.8
    dev = characteristics_deviation(state, params, t, n=513)
    assert dev <= 1e-6


def test_characteristics_extend_grid():
    state = build_gaussian(GaussianSpec(0.0, 0.0, 0.8, 1.0))
    k, D = oracle.uniform_axis(5.0, 33), oracle.uniform_axis(1.0, 33)
    chi0 = oracle.sample_state(state, k, D, "characteristic")
    with pytest.raises(ExtendGridError):
        oracle.characteristics_integrate(chi0, TOY, 2.0)
    with pytest.raises(InvalidSpecError):
        oracle.characteristics_integrate(oracle.sample_state(state, k, D, "position"), TOY, 1.0)


# transforms

def test_gaussian_transform_matches_analytic():
    state = evolve_state(build_gaussian(GaussianSpec(0.3, 0.8, 0.7, 1.0)), 0.5, TOY)
    grid = rotated_grid(to_position(state))
    kh, Dh = oracle.char_half_widths(state)
    k, D = oracle.uniform_axis(kh, 41), node_deltas(grid, Dh, 1.0)
    chi = oracle.grid_transform(grid, "coord->char", 1.0, k, D)
    exact = oracle.sample_state(state, k, D, "characteristic").values
    assert np.max(np.abs(chi.values - exact)) <= 1e-8 * np.max(np.abs(exact))


def test_cat_transform_matches_analytic():
    state = build_cat(TOY_CAT)
    grid = rotated_grid(to_position(state))
    kh, Dh = oracle.char_half_widths(state)
    k, D = oracle.uniform_axis(kh, 41), node_deltas(grid, Dh, 1.0)
    chi = oracle.grid_transform(grid, "coord->char", 1.0, k, D)
    exact = oracle.sample_state(state, k, D, "characteristic").values
    assert np.max(np.abs(chi.values - exact)) <= 1e-7 * np.max(np.abs(exact))


def test_reference_cat_transform(cat_setup):
    spec, _ = cat_setup
    state = build_cat(spec)
    grid = rotated_grid(to_position(state))
    kh, Dh = oracle.char_half_widths(state)
    k, D = oracle.uniform_axis(kh, 31), node_deltas(grid, Dh, spec.hbar, 31)
    chi = oracle.grid_transform(grid, "coord->char", spec.hbar, k, D)
    exact = oracle.sample_state(state, k, D, "characteristic").values
    assert np.max(np.abs(chi.values - exact)) <= 1e-7 * np.max(np.abs(exact))


def test_transform_round_trip():
    state = to_position(evolve_state(build_cat(TOY_CAT), 0.3, TOY))
    grid = rotated_grid(state)
    kh, Dh = oracle.char_half_widths(state)
    n = 401
    k = oracle.uniform_axis(kh, n)
    chi = oracle.grid_transform(grid, "coord->char", 1.0, k, grid.axis2)
    back = oracle.grid_transform(chi, "char->coord", 1.0, grid.axis1, grid.axis2)
    assert np.max(np.abs(back.values - grid.values)) <= 1e-8 * np.max(np.abs(grid.values))


def test_transform_detects_aliasing():
    # fringes far finer than the grid spacing
    spec = CatSpec(l=3.0, sigma=0.6, v=40.0, M=1.0, hbar=1.0)
    rho = to_position(build_cat(spec))
    X, s = oracle.rotated_half_widths(rho)
    grid = oracle.sample_state(rho, oracle.uniform_axis(X, 65), oracle.uniform_axis(s, 65), "rotated")
    with pytest.raises(ResolutionError):
        oracle.grid_transform(grid, "coord->char", 1.0)


def test_position_grid_is_rotated_exactly():
    rho = to_position(build_cat(TOY_CAT))
    half = oracle.position_half_width(rho)
    x = oracle.uniform_axis(half, 201)
    pos = oracle.sample_state(rho, x, x, "position")
    kh, Dh = oracle.char_half_widths(rho)
    k = oracle.uniform_axis(kh, 21)
    D = np.array([-2.0, 0.0, 2.0]) * (x[1] - x[0])
    from_pos = oracle.grid_transform(pos, "coord->char", 1.0, k, D)
    exact = oracle.sample_state(rho, k, D, "characteristic").values
    assert_allclose(from_pos.values, exact, atol=1e-8)


# quadrature

def test_pure_gaussian_purity():
    g = to_position(build_gaussian(GaussianSpec(0.1, 0.4, 0.9, 1.0)))
    assert abs(oracle.grid_quadrature(rotated_grid(g), "purity") - 1) <= 1e-8


def test_evolved_gaussian_purity(fig1, packet):
    for t in (1e-6, 1e-4):
        state = evolve_state(build_gaussian(packet), t, fig1[2])
        grid = rotated_grid(to_position(state), 257)
        assert_allclose(oracle.grid_quadrature(grid, "purity"), coherence_ratio(state), rtol=1e-6)


def test_evolved_cat_trace(cat_setup):
    spec, params = cat_setup
    for t in (0.0, 1e-6, 1e-3):
        rho = to_position(evolve_state(build_cat(spec), t, params))
        assert abs(oracle.grid_quadrature(rotated_grid(rho), "trace") - 1) <= 1e-7


def test_diagonal_moments():
    g = to_position(build_gaussian(GaussianSpec(0.3, 0.0, 0.5, 1.0)))
    grid = rotated_grid(g)
    assert_allclose(oracle.grid_quadrature(grid, "diagonal_moment", 1), 0.3, rtol=1e-10)
    assert_allclose(oracle.grid_quadrature(grid, "diagonal_moment", 2), 0.25 + 0.09, rtol=1e-10)


def test_quadrature_truncation_and_kinds():
    g = to_position(build_gaussian(GaussianSpec(0.0, 0.0, 1.0, 1.0)))
    x = oracle.uniform_axis(1.5, 101)
    narrow = oracle.sample_state(g, x, x, "position")
    with pytest.raises(ExtendGridError):
        oracle.grid_quadrature(narrow, "trace")
    with pytest.raises(ExtendGridError):
        oracle.grid_quadrature(narrow, "purity")
    with pytest.raises(InvalidSpecError):
        oracle.grid_quadrature(narrow, "entropy")
    chi = oracle.sample_state(g, x, x, "characteristic")
    with pytest.raises(InvalidSpecError):
        oracle.grid_quadrature(chi, "trace")


def test_nyquist_points_odd_and_sufficient(cat_setup):
    spec, _ = cat_setup
    n = oracle.nyquist_points(to_position(build_cat(spec)))
    assert n % 2 == 1 and n >= 513
