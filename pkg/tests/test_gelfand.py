import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isoshell.gelfand import (CountQuery, DimensionalProfile, count_radial_solutions,
                              dimension_profile, dirichlet_maximum, dirichlet_multiplier,
                              dirichlet_solution, exact_oracle, multiplier_samples,
                              neumann_infimum, neumann_multiplier, neumann_solution,
                              rescale_dirichlet, rescale_neumann)
from isoshell.representation import default_profile

SIGMA = np.logspace(-3, 4.5, 60)


def count(kind, level, n, **kw):
    return count_radial_solutions(CountQuery(kind, level, n, **kw))


def test_exact_multipliers_low_dimensions():
    np.testing.assert_allclose(neumann_multiplier(2, SIGMA), -4 * SIGMA**2 / (8 + SIGMA**2),
                               rtol=1e-9, atol=1e-11)
    np.testing.assert_allclose(neumann_multiplier(1, SIGMA),
                               -math.sqrt(2) * SIGMA * np.tanh(SIGMA / math.sqrt(2)),
                               rtol=1e-9, atol=1e-11)
    np.testing.assert_allclose(dirichlet_multiplier(2, SIGMA), SIGMA**2 / (1 + SIGMA**2 / 8) ** 2,
                               rtol=1e-9, atol=1e-14)
    assert dirichlet_maximum(2) == pytest.approx(2.0, abs=1e-9)


def test_small_sigma_limits():
    for n in (1, 3, 7):
        assert abs(neumann_multiplier(n, 1e-6)) < 1e-11
        assert abs(dirichlet_multiplier(n, 1e-6)) < 1e-11


def test_out_of_range():
    with pytest.raises(ValueError):
        neumann_multiplier(3, 0.0)
    with pytest.raises(ValueError):
        dirichlet_multiplier(3, 2e5, dimension_profile(3))


@pytest.mark.parametrize("n", [3, 5])
def test_asymptotes(n):
    sigma = np.logspace(4.01, 5, 30)
    assert np.max(np.abs(dirichlet_multiplier(n, sigma) - 2 * (n - 2))) < 0.1
    assert np.max(np.abs(neumann_multiplier(n, sigma) + 2)) < 0.1


def test_neumann_asymptote_all_middle_dimensions():
    sigma = np.logspace(4.01, 5, 10)
    for n in range(3, 10):
        assert np.max(np.abs(neumann_multiplier(n, sigma) + 2)) < 0.1


def test_n3_multiplier_is_W():
    prof = default_profile()
    t = np.logspace(-2, 4, 40)
    np.testing.assert_array_equal(neumann_multiplier(3, t, prof), prof.w(t))
    np.testing.assert_allclose(neumann_multiplier(3, t), prof.w(t), rtol=1e-8, atol=1e-10)


def test_counts_from_the_lists():
    assert count("neumann", -3.0, 2).count == 1
    assert count("neumann", -5.0, 2).count == 0
    assert count("dirichlet", 15.0, 10).count == 1
    assert count("dirichlet", 16.0, 10).count == 0
    for gamma in (-1.9, -1.0, -0.5):
        assert count("neumann", gamma, 10).count == 1
    # n = 2 Dirichlet: two solutions below the maximum 2
    assert count("dirichlet", 1.5, 2).count == 2
    assert count("dirichlet", 2.5, 2).count == 0


def test_n3_neumann_counts_match_representation():
    # gamma = -N reproduces the shell problem
    res = count("neumann", -1.9, 3)
    assert res.count == 3
    np.testing.assert_allclose(2 * np.log(res.sigmas), [2.6618, 7.9906, 10.6086], atol=1e-4)


def test_multiplicity_growth():
    for sign in (1, -1):
        counts = [count("neumann", -2 + sign * 10.0**-k, 3).count for k in (1, 2, 3)]
        assert counts == sorted(counts)
        assert counts[-1] > counts[0]


def test_truncation_flag():
    assert count("neumann", -2.0005, 3).truncated
    assert not count("neumann", -2.0005, 10).truncated
    assert count("dirichlet", 2.0005, 3).truncated
    assert not count("neumann", -1.9, 3).truncated


def test_roots_satisfy_equation():
    for kind, level, n in (("neumann", -1.95, 4), ("dirichlet", 4.1, 4), ("dirichlet", 0.5, 1)):
        res = count(kind, level, n)
        assert res.sigmas == sorted(res.sigmas)
        f = neumann_multiplier if kind == "neumann" else dirichlet_multiplier
        for s in res.sigmas:
            assert f(n, s) == pytest.approx(level, abs=1e-9)


def test_query_validation():
    with pytest.raises(ValueError):
        CountQuery("neumann", 1.0, 3)
    with pytest.raises(ValueError):
        CountQuery("dirichlet", -1.0, 3)
    with pytest.raises(ValueError):
        CountQuery("neumann", -1.0, 2.5)
    with pytest.raises(ValueError):
        CountQuery("robin", -1.0, 3)
    assert CountQuery("dirichlet", 1.0, 7).asymptote == 10.0


def test_extremes():
    assert neumann_infimum(2) == pytest.approx(-4.0, abs=1e-6)
    assert neumann_infimum(3) == pytest.approx(-2.5175513244, abs=1e-8)
    assert neumann_infimum(1) < -1e4


def test_samples_shape():
    s, v = multiplier_samples(3, "dirichlet", sigma_max=1e3)
    assert s.shape == v.shape and s[-1] == pytest.approx(1e3)
    assert np.all(np.diff(s) > 0)


def test_lower_bound():
    prof = DimensionalProfile.build(4)
    t = np.logspace(-2, 5, 50)
    assert np.all(prof.profile(t) >= prof.lower_bound(t) - 1e-12)


def test_rescale_neumann():
    u = neumann_solution(3, 5.0)
    same = rescale_neumann(u, 1.0)
    r = np.linspace(0.01, 1, 9)
    np.testing.assert_array_equal(same(r), u(r))
    v = rescale_neumann(u, 2.0)
    assert v(0.0) == pytest.approx(u(0.0) + math.log(0.25), abs=1e-14)
    assert v.gamma == pytest.approx(u.gamma / 2, rel=1e-12)
    radii = np.linspace(0.02, 2.0, 100)
    assert np.max(np.abs(v.residual(radii))) < 1e-8 * max(1.0, math.exp(v(0.0)))


def test_rescale_dirichlet():
    sigma = count("dirichlet", 1.0, 3).sigmas[0]
    u = dirichlet_solution(3, sigma, 1.0)
    assert u.c == pytest.approx(0.0, abs=1e-12)
    same, c2 = rescale_dirichlet(u, 1.0, 1.0)
    assert c2 == pytest.approx(u.c, abs=1e-15)
    assert same(0.3) == pytest.approx(u(0.3), abs=1e-15)
    _, c2 = rescale_dirichlet(u, 4.0, 1.0)
    assert c2 == pytest.approx(u.c + math.log(0.25), abs=1e-14)
    w, c2 = rescale_dirichlet(u, 2.0, 1.0)
    assert w.c == pytest.approx(c2, abs=1e-14)
    r = np.linspace(0.02, 1.0, 50)
    assert np.max(np.abs(w.residual(r))) < 1e-7
    # the same sigma solves the Dirichlet multiplier equation for the shifted problem
    assert dirichlet_multiplier(3, sigma) == pytest.approx(1.0 * math.exp(-u.c), abs=1e-9)


@given(st.floats(0.01, 50.0))
def test_exact_oracle_solves_ode(t):
    h = 1e-5 * max(1.0, t)
    for n in (1, 2):
        u, up = exact_oracle(n, t)
        upp = (exact_oracle(n, t + h)[1] - exact_oracle(n, t - h)[1]) / (2 * h)
        assert abs(upp + (n - 1) / t * up + math.exp(u)) < 1e-7


def test_exact_oracle_values():
    assert exact_oracle(1, 0.0) == (0.0, 0.0)
    assert exact_oracle(2, 0.0) == (0.0, 0.0)
    with pytest.raises(ValueError):
        exact_oracle(3, 1.0)
    with pytest.raises(ValueError):
        exact_oracle(1, -1.0)
