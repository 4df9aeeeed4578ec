import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from isoshell.hofid import (Mesh, MeshError, NewtonConfig, NoConvergence, RightCondition,
                            assemble_residual, build_scheme, condition_estimate, error_indicator,
                            initial_guess, newton_solve, refine_mesh, solve_bvp, stencil_extent)
from isoshell.representation import reconstruct, roots_of_W


@pytest.fixture(scope="module")
def sol19():
    return solve_bvp(1.9)


def test_mesh_validation():
    with pytest.raises(MeshError):
        Mesh([0.0, 0.5, 0.5, 1.0])
    with pytest.raises(MeshError):
        Mesh([0.1, 0.5, 1.0])
    m = Mesh.uniform(11)
    assert m.n == 10 and m.h_min == pytest.approx(0.1)
    with pytest.raises(MeshError):
        build_scheme(Mesh.uniform(6), p=6)
    with pytest.raises(ValueError):
        build_scheme(Mesh.uniform(21), p=5)


def test_stencil_extent_rules():
    n = 20
    # interior: symmetric second derivative, right-leaning first derivative
    assert stencil_extent(10, n, 6, 2) == (3, 3)
    assert stencil_extent(10, n, 6, 1) == (3, 4)
    assert stencil_extent(10, n, 6, 1, upwind=False) == (3, 3)
    # left boundary rule s = i, r = p - s + nu - 1
    assert stencil_extent(1, n, 6, 1) == (1, 6 - 1 + 1 - 1)
    assert stencil_extent(1, n, 6, 2) == (1, 6 - 1 + 2 - 1)
    # right boundary mirror
    assert stencil_extent(n - 1, n, 4, 1) == (4 - 1 + 1 - 1, 1)
    assert stencil_extent(n - 1, n, 4, 2) == (4 - 1 + 2 - 1, 1)


def test_p2_classical_variant():
    scheme = build_scheme(Mesh.uniform(11), p=2, upwind=False)
    h = 0.1
    row1 = scheme.A1[5].toarray().ravel()
    row2 = scheme.A2[5].toarray().ravel()
    np.testing.assert_allclose(row1[4:7], [-0.5 / h, 0.0, 0.5 / h], atol=1e-10)
    np.testing.assert_allclose(row2[4:7], [1 / h**2, -2 / h**2, 1 / h**2], atol=1e-8)
    assert np.sum(np.abs(row1) > 1e-8) == 2 and np.sum(np.abs(row2) > 1e-6) == 3


@pytest.mark.parametrize("p", [2, 4, 6, 8, 10])
def test_weight_rows_exact_for_polynomials(p):
    rng = np.random.default_rng(p)
    nodes = np.sort(np.r_[0.0, rng.uniform(0.01, 0.99, 30), 1.0])
    scheme = build_scheme(Mesh(nodes), p=p)
    for k in range(p + 1):
        f = nodes**k
        d1 = k * nodes ** max(k - 1, 0) if k else 0 * nodes
        d2 = k * (k - 1) * nodes ** max(k - 2, 0) if k > 1 else 0 * nodes
        np.testing.assert_allclose(scheme.A1 @ f, d1, atol=1e-6 * max(1, k**2))
        np.testing.assert_allclose(scheme.A2 @ f, d2, atol=1e-5 * max(1, k**3))


def test_initial_guess():
    g = initial_guess(1.9, "midpoint")
    assert g.c == pytest.approx(1.9 / 8 + math.log(5.7))
    assert g.c == pytest.approx(1.97797, abs=1e-5)
    ref = quad(lambda e: e**2 * math.exp(-e**2 / 2), 0, 1, epsabs=1e-14)[0]
    assert initial_guess(1.0, "integral").c == pytest.approx(math.log(1.0 / ref), abs=1e-10)
    for strategy in ("midpoint", "integral"):
        g = initial_guess(2.3, strategy)
        assert g.b == 0 and g.a == -1.15
        # P'(0) = 0 and P'(1) = -N
        assert 2 * g.a + g.b == pytest.approx(-2.3)
    with pytest.raises(ValueError):
        initial_guess(-1.0)
    with pytest.raises(ValueError):
        initial_guess(1.0, "other")


def test_residual_of_exact_solution_is_small():
    sigma = roots_of_W(1.5)[0].sigma
    exact = reconstruct(sigma)
    norms = []
    for m in (41, 81):
        scheme = build_scheme(Mesh.uniform(m), p=4)
        norms.append(np.max(np.abs(assemble_residual(exact(scheme.nodes), 1.5, scheme))))
    assert norms[1] < norms[0] / 8
    assert norms[1] < 1e-5


def test_residual_constant_profile():
    scheme = build_scheme(Mesh.uniform(21), p=4)
    F = assemble_residual(np.full(21, 0.3), 0.0, scheme)
    assert abs(F[0]) < 1e-12 and abs(F[-1]) < 1e-12
    np.testing.assert_allclose(F[1:-1], math.exp(0.3), rtol=1e-10)


def test_test1_lowest_solution(sol19):
    assert sol19.y0 == pytest.approx(2.6618, abs=1e-4)
    assert abs(sol19.y_prime[0]) < 1e-8
    assert abs(sol19.y_prime[-1] + 1.9) < 1e-8
    assert np.all(np.diff(sol19.y) < 0)
    assert sol19.stats.residual < 1e-8
    assert 20 <= sol19.stats.nodes <= 200
    exact = reconstruct(roots_of_W(1.9)[0].sigma)
    assert np.max(np.abs(sol19.y - exact(sol19.nodes))) < 1e-7


def test_interpolant_matches_oracle(sol19):
    exact = reconstruct(roots_of_W(1.9)[0].sigma)
    eta = np.linspace(0, 1, 97)
    assert np.max(np.abs(sol19(eta) - exact(eta))) < 1e-6
    assert np.max(np.abs(sol19.derivative(eta) - exact.derivative(eta))) < 1e-5
    assert isinstance(sol19(0.5), float)


def test_no_solution_for_zero_N():
    scheme = build_scheme(Mesh.uniform(21), p=6)
    with pytest.raises(NoConvergence) as info:
        newton_solve(np.zeros(21), 0.0, scheme, NewtonConfig(max_iter=15))
    assert info.value.history


def test_newton_config_validation():
    with pytest.raises(ValueError):
        NewtonConfig(tol=0)
    with pytest.raises(ValueError):
        NewtonConfig(max_iter=0)


def test_guess_shape_checked():
    scheme = build_scheme(Mesh.uniform(21), p=6)
    with pytest.raises(ValueError):
        newton_solve(np.zeros(5), 1.0, scheme)


def test_refinement_reaches_tolerance():
    sol = solve_bvp(1.9, tol=1e-8)
    assert np.max(error_indicator(sol)) <= 1e-8
    # already within tolerance: mesh returned unchanged
    assert refine_mesh(sol, 1e-8) is sol.mesh


def test_upper_branch_boundary_layer():
    sigma = roots_of_W(1.9)[-1].sigma
    exact = reconstruct(sigma)
    # start on a mesh graded toward eta = 0 so the guess resolves the layer
    sol = solve_bvp(1.9, mesh=Mesh(np.linspace(0, 1, 201) ** 2), guess=exact)
    assert sol.y0 == pytest.approx(10.6086, abs=1e-3)
    assert sol.stats.h_min < 1e-3
    assert np.max(np.abs(sol.y - exact(sol.nodes))) < 1e-6


def test_right_conditions(sol19):
    fixed = solve_bvp(RightCondition.fixed_y0(3.0), guess=sol19)
    assert fixed.y0 == pytest.approx(3.0, abs=1e-12)
    exact = reconstruct(math.exp(1.5))
    assert fixed.N == pytest.approx(exact.N, abs=1e-7)
    v = np.array([0.6, 0.8])
    w = np.array([2.0, 3.0])
    hyp = solve_bvp(RightCondition.hyperplane(w, v), guess=sol19)
    assert abs(np.dot(v, [hyp.N, hyp.y0]) - np.dot(v, w)) < 1e-8
    assert RightCondition.neumann(1.0).is_neumann
    with pytest.raises(ValueError):
        solve_bvp(RightCondition.fixed_y0(3.0))


def test_condition_estimate():
    assert condition_estimate(sp.identity(10, format="csc")) == pytest.approx(1.0)
    assert condition_estimate(sp.identity(3, format="csc")) == pytest.approx(1.0)
    # Poisson-like rows on a 20-node mesh against a dense computation
    n = 20
    A = sp.diags([np.ones(n - 1), -2 * np.ones(n), np.ones(n - 1)], [-1, 0, 1], format="csc")
    for norm, order in (("inf", np.inf), (1, 1)):
        dense = np.linalg.cond(A.toarray(), order)
        assert condition_estimate(A, norm=norm) == pytest.approx(dense, rel=0.1)
    with pytest.raises(ValueError):
        condition_estimate(A, norm=2)


def test_condition_estimate_reproducible_and_growing():
    mesh = Mesh.uniform(81)
    a = solve_bvp(1.5, mesh=mesh, refine=False)
    b = solve_bvp(2.5, mesh=mesh, refine=False)
    state = np.random.get_state()[1].copy()
    ka = condition_estimate(a)
    assert condition_estimate(a) == ka
    np.testing.assert_array_equal(np.random.get_state()[1], state)
    assert condition_estimate(b) > 3 * ka


def test_solution_csv(tmp_path, sol19):
    path = tmp_path / "s.csv"
    sol19.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "eta,y,yprime"
    assert len(lines) == sol19.nodes.size + 1
    assert sol19.stats.as_dict(1.0).keys() == {"nodes", "h_min", "newton_iters", "residual",
                                              "condition_estimate"}


@given(st.floats(0.3, 2.4))
@settings(max_examples=10, deadline=None)
def test_lower_branch_boundary_rows(N):
    sol = solve_bvp(N)
    assert abs(sol.y_prime[0]) < 1e-8
    assert abs(sol.N - N) < 1e-8
    assert np.all(np.diff(sol.y) < 0)
