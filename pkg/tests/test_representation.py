import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isoshell.ivp import extrema_of_W
from isoshell.representation import (count_solutions, critical_thresholds, default_profile,
                                     reconstruct, rescale_solution, roots_of_W)


@pytest.mark.parametrize("N, count", [(0.5, 1), (1.0, 1), (1.5, 1), (1.9, 3), (2.1, 2),
                                      (2.0001, 8), (2.6, 0), (3.0, 0)])
def test_counts(N, count):
    res = count_solutions(N)
    assert res.count == count
    assert not res.truncated


def test_near_two_is_truncated():
    res = count_solutions(2.0 + 1e-7)
    assert res.truncated
    assert res.count >= 10


def test_table_values_from_roots():
    y0 = [2 * math.log(r.sigma) for r in roots_of_W(1.9)]
    np.testing.assert_allclose(y0, [2.6618, 7.9906, 10.6086], atol=1e-4)
    y0 = [2 * math.log(r.sigma) for r in roots_of_W(2.0001)]
    assert y0[6] == pytest.approx(31.3246, abs=1e-3)
    assert y0[7] == pytest.approx(35.2218, abs=1e-3)


def test_roots_satisfy_equation():
    prof = default_profile()
    for N in (0.7, 1.9, 2.05):
        for r in roots_of_W(N):
            assert abs(prof.w(r.sigma) + N) < 1e-10
            assert r.residual < 1e-10


def test_conditioning_warning_for_large_sigma():
    roots = roots_of_W(2.0001)
    small = [r for r in roots if r.sigma <= 1e3]
    large = [r for r in roots if r.sigma > 1e3]
    assert large and all(r.warning and r.amplification > 0 for r in large)
    assert all(r.warning is None for r in small)


def test_fold_level_reported_once():
    e = extrema_of_W(default_profile())[0]
    roots = roots_of_W(-e.w_star)
    folds = [r for r in roots if r.fold]
    assert len(folds) == 1
    assert folds[0].sigma == pytest.approx(e.t_star, rel=1e-9)


def test_thresholds():
    th = critical_thresholds()
    assert th.n2 == pytest.approx(2.51755148, abs=1e-6)
    assert th.n1 == pytest.approx(1.8427, abs=1e-4)
    assert th.sigma_n2 < th.sigma_n1


def test_invalid_N():
    with pytest.raises(ValueError):
        roots_of_W(0.0)


def _ode_residual(sol, eta, pi1):
    h = 1e-5
    ypp = (sol.derivative(eta + h) - sol.derivative(eta - h)) / (2 * h)
    return ypp + 2.0 / eta * sol.derivative(eta) + pi1 * np.exp(sol(eta))


def test_reconstruct_solves_bvp():
    for r in roots_of_W(1.9):
        sol = reconstruct(r.sigma)
        eta = np.linspace(0.05, 0.95, 19)
        res = _ode_residual(sol, eta, 1.0)
        assert np.max(np.abs(res)) < 1e-5 * max(1.0, math.exp(sol.y0))
        assert sol.derivative(0.0) == 0.0
        assert sol.derivative(1.0) == pytest.approx(-1.9, abs=1e-9)
        assert sol.y0 == pytest.approx(2 * math.log(r.sigma))
        assert sol.N == pytest.approx(1.9, abs=1e-10)


@given(st.floats(0.2, 5.0), st.floats(0.2, 5.0))
@settings(max_examples=20, deadline=None)
def test_rescaling_property(pi1, pi4):
    sigma = roots_of_W(1.5)[0].sigma
    base = reconstruct(sigma)
    y = rescale_solution(base, pi1, pi4)
    direct = reconstruct(sigma, pi1, pi4)
    eta = np.linspace(0.0, pi4, 7)
    np.testing.assert_allclose(y(eta), direct(eta), atol=1e-12)
    # boundary slope -N / pi4 and the equation with pi1 in front of exp(y)
    assert y.derivative(pi4) == pytest.approx(-1.5 / pi4, rel=1e-9)
    res = _ode_residual(y, np.linspace(0.1, 0.9, 5) * pi4, pi1)
    assert np.max(np.abs(res)) < 1e-4 * max(1.0, pi1 * math.exp(float(y(0.0))))


def test_reconstruct_validation():
    with pytest.raises(ValueError):
        reconstruct(-1.0)
    with pytest.raises(ValueError):
        reconstruct(1e13)
