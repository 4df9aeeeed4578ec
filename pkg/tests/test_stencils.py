import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isoshell import stencils
from isoshell.stencils import StencilError, fd_weights, stencil_rows, stencil_weights


def test_classical_weights():
    np.testing.assert_allclose(stencil_weights([-2, -1, 0, 1, 2], 2),
                               [-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12], atol=1e-13)
    np.testing.assert_allclose(stencil_weights([-1, 0, 1], 1, h=0.1), [-5.0, 0.0, 5.0], atol=1e-12)
    np.testing.assert_allclose(stencil_weights([0, 1, 2], 1), [-1.5, 2.0, -0.5], atol=1e-13)


@pytest.mark.parametrize("m", [3, 5, 7, 9, 11])
@pytest.mark.parametrize("nu", [1, 2])
def test_monomial_exactness(m, nu):
    # uniform spacing h = 0.1, derivative at the centre node
    h = 0.1
    offs = np.arange(m) - m // 2
    x = offs * h
    w = fd_weights(x, 0.0, nu)
    for k in range(m):
        exact = math.factorial(k) if k == nu else 0.0
        approx = float(np.dot(w, x**k))
        assert abs(approx - exact) <= 1e-10 * max(1.0, abs(exact))


def _nodes(seed, size):
    rng = np.random.default_rng(seed)
    # clustered near zero, like refined meshes
    return np.sort(np.concatenate(([0.0], rng.uniform(0, 1, size - 1) ** 3)))


@given(st.integers(0, 10_000), st.sampled_from([3, 5, 7, 9]), st.sampled_from([0, 1, 2]))
@settings(max_examples=40, deadline=None)
def test_numba_and_numpy_paths_agree(seed, width, nu):
    x = _nodes(seed, 40)
    if np.min(np.diff(x)) < 1e-9:
        return
    starts = np.arange(0, x.size - width + 1)
    widths = np.full(starts.size, width)
    targets = x[starts + width // 2]
    a = stencil_rows(x, starts, widths, targets, nu, use_numba=True)
    b = stencil_rows(x, starts, widths, targets, nu, use_numba=False)
    scale = np.max(np.abs(b), axis=1)
    # the moment solve is only good to ~ eps * cond of its scaled system
    for i, s in enumerate(starts):
        d = x[s:s + width] - targets[i]
        cond = np.linalg.cond(stencils._moment_matrix(d, 0.0, np.max(np.abs(d))))
        assert np.max(np.abs(a[i] - b[i])) <= 1e-12 + 100 * np.finfo(float).eps * cond * scale[i]


@given(st.integers(0, 10_000), st.sampled_from([1, 2]))
@settings(max_examples=30, deadline=None)
def test_polynomial_reproduction_on_random_nodes(seed, nu):
    x = np.sort(np.random.default_rng(seed).uniform(-1, 1, 6))
    if np.min(np.diff(x)) < 1e-3:
        return
    z = 0.1
    w = fd_weights(x, z, nu)
    coef = np.random.default_rng(seed + 1).normal(size=6)
    p = np.polynomial.Polynomial(coef)
    assert float(np.dot(w, p(x))) == pytest.approx(float(p.deriv(nu)(z)), rel=1e-7, abs=1e-7)


def test_interpolation_rows():
    x = np.linspace(0, 1, 8)
    w = stencil_rows(x, np.array([2]), np.array([5]), np.array([0.37]), 0)
    f = lambda t: 1 + t - 2 * t**3 + t**4
    assert float(w[0] @ f(x[2:7])) == pytest.approx(f(0.37), abs=1e-13)


def test_errors():
    with pytest.raises(StencilError):
        stencil_weights([0, 0, 1], 1)
    with pytest.raises(ValueError):
        fd_weights([0.0, 1.0], 0.0, 2)
    with pytest.raises(StencilError) as info:
        fd_weights(np.array([0.0, 1e-14, 2e-14, 1.0]), 0.0, 1)
    assert info.value.condition > stencils.COND_LIMIT


def test_env_flag_selects_numpy_path():
    import os
    import subprocess
    import sys

    code = ("from isoshell import _accel, hofid; import numpy as np;"
            "s = hofid.solve_bvp(1.9); print(_accel.ENABLE_NUMBA, repr(s.y0))")
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, ISOSHELL_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                             text=True, check=True)
        enabled, y0 = res.stdout.split()
        out[flag] = (enabled, float(y0))
    assert out["1"][0] == "False"
    assert out["0"][1] == pytest.approx(out["1"][1], abs=1e-9)
