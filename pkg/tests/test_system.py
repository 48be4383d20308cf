import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mosersys import (
    FiberCoords,
    ModelParams,
    ParameterError,
    ProjectionError,
    RegimeError,
    SolverOptions,
    build_domain,
    solve_large_beta,
    solve_negative_beta,
    solve_scalar_ground_state,
    solve_small_beta,
)
from mosersys.grid import best_sobolev_s4, h1_inner, integrate, lp_norm, shifted_solve
from mosersys.nonlin import energy, energy_grad, nehari_pairing
from mosersys.scalar import fiber_root_scalar
from mosersys.system import (
    constraints_g,
    d_tilde,
    det_lower_bound,
    energy_tilde,
    fiber_root_diag,
    grad_tilde,
    product_fiber_start,
    matrix_j,
    project_m_beta,
)

import oracles


def _smooth(grid, seed, scale=1.0):
    u = shifted_solve(grid, np.random.default_rng(seed).standard_normal(grid.size))
    return scale * np.abs(u) / np.max(np.abs(u))


@pytest.fixture(scope="module")
def sym_small(square63, gs_square63, sym_params):
    return solve_small_beta(square63, sym_params.with_beta(0.1), (gs_square63, gs_square63))


# -- constraints -------------------------------------------------------------------


def test_constraints_of_zero(square31):
    z = np.zeros(square31.size)
    assert constraints_g(square31, ModelParams(0, 0, 1, 1, 0.3), z, z) == (0.0, 0.0)


def test_constraints_at_semitrivial_pair(square63, gs_square63):
    p = ModelParams(0, 0, 1, 1, 0.4)
    g1, g2 = constraints_g(square63, p, gs_square63.u, np.zeros(square63.size))
    assert abs(g1) <= 1e-9 * gs_square63.quadratic
    assert g2 == 0.0


@pytest.mark.parametrize("t,s", [(0.5, 2.0), (1.3, 0.7)])
def test_constraints_decouple_at_zero_beta(square31, t, s):
    p = ModelParams(1.0, 2.0, 1.5, 0.5, 0.0)
    u, v = _smooth(square31, 1, 1.2), _smooth(square31, 2, 0.8)
    g1, g2 = constraints_g(square31, p, math.sqrt(t) * u, math.sqrt(s) * v)
    ref1 = t * h1_inner(square31, u, u, 1.0) - 1.5 * integrate(square31, t * u * u * np.expm1(t * u * u))
    ref2 = s * h1_inner(square31, v, v, 2.0) - 0.5 * integrate(square31, s * v * v * np.expm1(s * v * v))
    assert g1 == pytest.approx(ref1, rel=1e-12)
    assert g2 == pytest.approx(ref2, rel=1e-12)


# -- matrix J ---------------------------------------------------------------------


def test_matrix_j_zero_beta(square31):
    p = ModelParams(0, 0, 1.2, 0.7, 0.0)
    u, v = _smooth(square31, 3, 1.4), _smooth(square31, 4, 1.1)
    M = matrix_j(square31, p, u, v)
    assert M[0, 1] == M[1, 0] == 0.0
    assert np.linalg.det(M) == pytest.approx(det_lower_bound(square31, p, u, v), rel=1e-14)


def test_matrix_j_with_zero_component(square31):
    u = _smooth(square31, 5)
    M = matrix_j(square31, ModelParams(0, 0, 1, 1, 0.5), u, np.zeros_like(u))
    assert M[0, 1] == 0 and M[1, 1] == 0
    assert np.linalg.det(M) == 0


def test_matrix_j_needs_nonnegative(square31):
    u = _smooth(square31, 5)
    with pytest.raises(ValueError):
        matrix_j(square31, ModelParams(0, 0, 1, 1, 0.5), -u, u)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.1, 2.0), st.floats(0.1, 2.0), st.floats(0.2, 3.0), st.floats(0.2, 3.0))
def test_det_bound_random_pairs(seed, a, b, mu1, mu2):
    g = build_domain("unit-square", 11)
    p = ModelParams(0, 0, mu1, mu2, 0.5 * math.sqrt(mu1 * mu2))
    u, v = _smooth(g, seed, a), _smooth(g, seed + 7, b)
    M = matrix_j(g, p, u, v)
    assert np.allclose(M, M.T)
    bound = det_lower_bound(g, p, u, v)
    assert np.linalg.det(M) >= bound - 1e-10 * abs(M[0, 0] * M[1, 1])


# -- projection onto M_beta ----------------------------------------------------------


def test_projection_fixed_point(sym_small, square63):
    fc = project_m_beta(square63, sym_small.params, sym_small.u, sym_small.v)
    assert abs(fc.t - 1) <= 1e-10 and abs(fc.s - 1) <= 1e-10


@pytest.mark.parametrize("seed", range(4))
def test_projection_decouples_at_zero_beta(square31, seed):
    p = ModelParams(0.5, -2.0, 1.0, 3.0, 0.0)
    u, v = _smooth(square31, seed, 2.0), _smooth(square31, seed + 10, 0.3)
    fc = project_m_beta(square31, p, u, v)
    assert fc.t == pytest.approx(fiber_root_scalar(square31, 0.5, 1.0, u), rel=1e-10)
    assert fc.s == pytest.approx(fiber_root_scalar(square31, -2.0, 3.0, v), rel=1e-10)


def test_projection_disjoint_supports(square31):
    p = ModelParams(0, 0, 1, 1, 0.6)
    base = _smooth(square31, 9, 1.0)
    u = np.where(square31.x < 0.45, base, 0.0)
    v = np.where(square31.x > 0.55, base, 0.0)
    fc = project_m_beta(square31, p, u, v)
    assert fc.t == pytest.approx(fiber_root_scalar(square31, 0, 1, u), rel=1e-10)
    assert fc.s == pytest.approx(fiber_root_scalar(square31, 0, 1, v), rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.05, 2.5), st.floats(0.05, 2.5), st.floats(-0.9, 0.9))
def test_projection_lands_on_m_beta(seed, a, b, frac):
    g = build_domain("unit-square", 11)
    p = ModelParams(0, 0, 1, 2, frac * math.sqrt(2))
    u, v = _smooth(g, seed, a), _smooth(g, seed + 3, b)
    fc = project_m_beta(g, p, u, v)
    assert 1e-8 <= fc.t <= 1e8 and 1e-8 <= fc.s <= 1e8
    U, V = math.sqrt(fc.t) * u, math.sqrt(fc.s) * v
    g1, g2 = constraints_g(g, p, U, V)
    A1, A2 = h1_inner(g, U, U), h1_inner(g, V, V)
    assert abs(g1) <= 1e-10 * A1 and abs(g2) <= 1e-10 * A2


def test_projection_needs_both_components(square31):
    u = _smooth(square31, 1)
    with pytest.raises(ProjectionError):
        project_m_beta(square31, ModelParams(0, 0, 1, 1, 0.2), u, np.zeros_like(u))


def test_fiber_coords_positive():
    with pytest.raises(ValueError):
        FiberCoords(0.0, 1.0)
    assert FiberCoords(1.0, 2.0).s == 2.0


# -- diagonal fiber ---------------------------------------------------------------


def test_diag_root_on_nehari_set(square31):
    p = ModelParams(0, 0, 1, 1, 2.0)
    u, v = _smooth(square31, 1, 1.0), _smooth(square31, 2, 1.5)
    t = fiber_root_diag(square31, p, u, v)
    w, z = math.sqrt(t) * u, math.sqrt(t) * v
    assert abs(nehari_pairing(square31, p, w, z)) <= 1e-11 * h1_inner(square31, w, w)
    assert fiber_root_diag(square31, p, w, z) == pytest.approx(1.0, abs=1e-10)


def test_diag_root_reduces_to_scalar(square31):
    p = ModelParams(0.7, 0, 1.3, 1, 2.0)
    u = _smooth(square31, 4, 1.2)
    assert fiber_root_diag(square31, p, u, np.zeros_like(u)) == pytest.approx(
        fiber_root_scalar(square31, 0.7, 1.3, u), rel=1e-12
    )


def test_diag_root_needs_positive_beta(square31):
    u = _smooth(square31, 4)
    with pytest.raises(ParameterError):
        fiber_root_diag(square31, ModelParams(0, 0, 1, 1, -0.1), u, u)


def test_diag_root_is_fiber_maximum(square31):
    p = ModelParams(0, 0, 1, 1, 3.0)
    u, v = _smooth(square31, 6, 0.9), _smooth(square31, 7, 1.3)
    t = fiber_root_diag(square31, p, u, v)

    def f(s):
        return energy(square31, p, math.sqrt(s) * u, math.sqrt(s) * v)

    assert f(t) >= max(f(t * 0.99), f(t * 1.01))


# -- positive-part energy ---------------------------------------------------------


def test_tilde_equals_energy_on_nonnegative_pairs(square31):
    p = ModelParams(0, 0, 1, 1, -0.1)
    u, v = _smooth(square31, 1, 1.1), _smooth(square31, 2, 1.2)
    assert energy_tilde(square31, p, u, v) == pytest.approx(energy(square31, p, u, v), rel=1e-14)
    gu, gv = grad_tilde(square31, p, u, v)
    eu, ev = energy_grad(square31, p, u, v)
    assert np.allclose(gu, eu, rtol=1e-13, atol=1e-12) and np.allclose(gv, ev, rtol=1e-13, atol=1e-12)


def test_tilde_decouples_for_nonpositive_u(square31):
    p = ModelParams(0.5, 0.2, 1, 1.4, -0.15)
    u, v = -_smooth(square31, 3, 1.0), _smooth(square31, 4, 1.2)
    expect = 0.5 * h1_inner(square31, u, u, 0.5) + (
        0.5 * h1_inner(square31, v, v, 0.2) - integrate(square31, 0.7 * (np.expm1(v * v) - v * v))
    )
    assert energy_tilde(square31, p, u, v) == pytest.approx(expect, rel=1e-13)


def test_grad_tilde_central_differences(square31):
    p = ModelParams(0, 0, 1, 1, -0.15)
    u = _smooth(square31, 5, 1.2) * np.where(square31.y < 0.3, -1.0, 1.0)
    v = _smooth(square31, 6, 1.0)
    gu, gv = grad_tilde(square31, p, u, v)
    rng = np.random.default_rng(0)
    for _ in range(10):
        # directions proportional to the fields keep every node on its side of zero
        phi = u * (1 + rng.random(u.size))
        psi = v * (1 + rng.random(v.size))
        exact = integrate(square31, gu * phi + gv * psi)
        errs = []
        for e in (1e-2, 5e-3):
            fd = (energy_tilde(square31, p, u + e * phi, v + e * psi) - energy_tilde(square31, p, u - e * phi, v - e * psi)) / (2 * e)
            errs.append(abs(fd - exact))
        assert 3.5 <= errs[0] / errs[1] <= 4.5, errs


# -- small beta ---------------------------------------------------------------------


def test_small_beta_symmetric_certificates(sym_small, gs_square63):
    sol = sym_small
    assert sol.regime == "small-positive"
    assert sol.ok, sol.certificates
    assert sol.level < 2 * gs_square63.energy
    assert sol.level <= sol.diagnostics["start_level"]
    assert max(sol.constraint_residuals) <= 1e-8


def test_small_beta_components_agree_up_to_symmetry(square63, sym_small):
    U, V = square63.to_array(sym_small.u), square63.to_array(sym_small.v)
    best = min(np.max(np.abs(U - W)) for W in oracles.square_symmetries(V))
    assert best <= 1e-6 * np.max(U)


def test_product_fiber_start_is_fiber_maximum(square63, gs_square63, sym_params):
    p = sym_params.with_beta(0.1)
    u0, v0, fc = product_fiber_start(square63, p, gs_square63.u, gs_square63.u)
    f0 = energy(square63, p, u0, v0)
    for dt, ds in ((0.01, 0), (0, 0.01), (-0.01, 0.01), (0.01, 0.01), (-0.01, -0.01)):
        t, s = fc.t * (1 + dt), fc.s * (1 + ds)
        assert energy(square63, p, math.sqrt(t) * gs_square63.u, math.sqrt(s) * gs_square63.u) <= f0
    assert f0 < 2 * gs_square63.energy


def test_small_beta_asymmetric_data():
    g = build_domain("unit-square", 31)
    p = ModelParams(0.0, 3.0, 1.0, 1.5, 0.0)
    gs1 = solve_scalar_ground_state(g, p.lam1, p.mu1)
    gs2 = solve_scalar_ground_state(g, p.lam2, p.mu2)
    sol = solve_small_beta(g, p.with_beta(0.1), (gs1, gs2))
    assert sol.ok, sol.certificates
    assert sol.level < gs1.energy + gs2.energy


def test_small_beta_range_checked(square63, gs_square63, sym_params):
    with pytest.raises(ParameterError):
        solve_small_beta(square63, sym_params.with_beta(1.5), (gs_square63, gs_square63))
    with pytest.raises(ParameterError):
        solve_small_beta(square63, sym_params.with_beta(-0.1), (gs_square63, gs_square63))


def test_small_beta_rejects_mismatched_seeds(square63, gs_square63):
    p = ModelParams(1.0, 0.0, 1.0, 1.0, 0.1)
    with pytest.raises(ParameterError):
        solve_small_beta(square63, p, (gs_square63, gs_square63))


# -- large beta ---------------------------------------------------------------------


def test_large_beta_single_solve(square63, gs_square63, sym_params, thresholds63):
    b0 = thresholds63["beta_bar0"]
    sol = solve_large_beta(
        square63, sym_params.with_beta(2 * b0), seeds=(gs_square63, gs_square63),
        beta_bar0=b0, beta56=(thresholds63["beta5"], thresholds63["beta6"]),
    )
    assert sol.regime == "large-positive"
    assert sol.ok, sol.certificates
    assert sol.level < gs_square63.energy
    assert abs(nehari_pairing(square63, sol.params, sol.u, sol.v)) <= 1e-8 * h1_inner(square63, sol.u, sol.u)


def test_large_beta_below_threshold_still_runs(square63, gs_square63, sym_params, thresholds63):
    sol = solve_large_beta(square63, sym_params.with_beta(5.0), seeds=(gs_square63, gs_square63))
    assert "beta_level_bound" not in sol.certificates
    assert sol.certificates["level_below_diag_seed"]


def test_large_beta_needs_positive_beta(square63, sym_params):
    with pytest.raises(ParameterError):
        solve_large_beta(square63, sym_params.with_beta(-1.0))


# -- negative beta ------------------------------------------------------------------


def test_negative_beta_range_checked(square63, gs_square63, sym_params):
    with pytest.raises(ParameterError):
        solve_negative_beta(square63, sym_params.with_beta(-0.5), (gs_square63, gs_square63))
    with pytest.raises(ParameterError):
        solve_negative_beta(square63, sym_params.with_beta(0.05), (gs_square63, gs_square63))


def test_negative_beta_leaves_tiny_ball(square63, gs_square63, sym_params):
    with pytest.raises(RegimeError):
        solve_negative_beta(square63, sym_params.with_beta(-0.1), (gs_square63, gs_square63), SolverOptions(delta=1e-6))


def test_d_tilde_box_and_value(square63, gs_square63, sym_params):
    p = sym_params.with_beta(-0.05)
    dt = d_tilde(square63, p, gs_square63.u, gs_square63.u)
    assert dt["value"] >= dt["lattice_max"]
    s, t = dt["argmax"]
    assert dt["t0"] <= s <= dt["s0"] and dt["t0"] <= t <= dt["s0"]
    # the scalar pair itself lies in the box, so the max is at least its energy
    assert dt["value"] >= energy(square63, p, gs_square63.u, gs_square63.u)


# -- small-amplitude limit of the exponential quotient ---------------------------------


def test_small_amplitude_quotient_tends_to_sobolev_ratio(square63, gs_square63):
    u = gs_square63.u
    s4, _ = best_sobolev_s4(square63)
    limit = h1_inner(square63, u, u) / lp_norm(square63, u, 4) ** 2
    assert limit >= s4 * (1 - 1e-9)
    gaps = []
    for s in (1e-1, 1e-2, 1e-3):
        w = s * u
        q = h1_inner(square63, w, w) / math.sqrt(integrate(square63, w * w * np.expm1(w * w)))
        gaps.append(abs(q - limit))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] <= 1e-5 * limit
