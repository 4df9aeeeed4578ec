"""
Singular initial value problem

    u'' + (n-1)/t u' + exp(u) = 0,   u(0) = u'(0) = 0,

and the multiplier function W(t) = t u'(t).

The solution is started from its Taylor series on [0, t_series] and then
integrated in logarithmic time s = ln t.  With v = u + 2s and w = du/ds = W
the equation becomes the autonomous system

    v' = w + 2,    w' = -(n-2) w - exp(v),

whose right-hand side is bounded along the whole trajectory, so t can be
pushed to 1e12 without the accuracy loss seen when integrating in t.  The
state variable w *is* W, and w' = t W'(t), which is what the extremum and
root finders use.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import List

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq


class IvpError(RuntimeError):
    """Integration stopped before ``t_max``; ``last_t`` is the reached time."""

    def __init__(self, message, last_t):
        super().__init__(message)
        self.last_t = last_t


@dataclass(frozen=True)
class IvpConfig:
    n: int = 3
    t_max: float = 1e5
    rel_tol: float = 1e-10
    abs_tol: float = 1e-10
    t_series: float = 1e-3
    series_terms: int = 3

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"dimension n must be an integer >= 1, got {self.n}")
        if not 0.0 < self.t_series < self.t_max:
            raise ValueError("need 0 < t_series < t_max")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.series_terms < 1:
            raise ValueError("series_terms must be >= 1")


def series_coefficients(n, terms=3):
    """Coefficients c_k of u(t) = sum_k c_k t^(2k), k = 0..terms.

    Substituting the even series into the ODE gives
    2k(2k+n-2) c_k = -e_(k-1), where e_k are the coefficients of exp(u)
    in powers of t^2 (computed with the usual exp-of-series recurrence).
    """
    c = [0.0]
    e = [1.0]
    for k in range(1, terms + 1):
        c.append(-e[k - 1] / (2.0 * k * (2.0 * k + n - 2.0)))
        e.append(sum(j * c[j] * e[k - j] for j in range(1, k + 1)) / k)
    return np.array(c)


def series_start(n, t, terms=3):
    """Truncated Taylor expansion (u, u') of U_n about t = 0.

    With the default three terms, u = -t^2/(2n) + t^4/(8n(n+2)) + c_3 t^6
    and the truncation error is O(t^8).
    """
    c = series_coefficients(n, terms)
    t = np.asarray(t, dtype=float)
    x = t * t
    u = np.zeros_like(t)
    up = np.zeros_like(t)
    for k in range(terms, 0, -1):
        u = (u + c[k]) * x
    for k in range(terms, 0, -1):
        up = up * x + 2 * k * c[k]
    up = up * t
    if u.ndim == 0:
        return float(u), float(up)
    return u, up


def _log_rhs(n):
    def rhs(s, z):
        v, w = z
        return [w + 2.0, -(n - 2.0) * w - math.exp(v)]
    return rhs


class UProfile:
    """Dense trajectory of U_n on [0, t_max].

    Calling the profile returns U_n(t); ``derivative`` returns U_n'(t) and
    ``w`` the multiplier t U_n'(t).  Everything is vectorized over t.
    """

    def __init__(self, config, dense, s_nodes, v_nodes, w_nodes):
        self.config = config
        self.n = config.n
        self.t_max = config.t_max
        self.t_series = config.t_series
        self._dense = dense
        self._coeffs = series_coefficients(config.n, config.series_terms)

        t = np.concatenate(([0.0], np.exp(s_nodes)))
        t[1] = config.t_series  # exp(log(x)) may differ from x by an ulp
        t[-1] = config.t_max
        u = np.concatenate(([0.0], v_nodes - 2.0 * s_nodes))
        w = np.concatenate(([0.0], w_nodes))
        up = np.zeros_like(t)
        up[1:] = w[1:] / t[1:]
        for arr in (t, u, up, w):
            arr.setflags(write=False)
        self.nodes, self.u, self.u_prime, self.w_nodes = t, u, up, w

    def __repr__(self):
        return f"UProfile(n={self.n}, t_max={self.t_max:g}, nodes={self.nodes.size})"

    def _check(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.t_max * (1 + 1e-14)):
            raise ValueError(f"t outside profile range [0, {self.t_max:g}]")
        return t

    def log_state(self, s):
        """(v, w) at log-time s, for s >= ln(t_series)."""
        return self._dense(s)

    def evaluate(self, t):
        """Return (U(t), U'(t))."""
        t = self._check(t)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        u = np.empty_like(t)
        up = np.empty_like(t)
        small = t <= self.t_series
        if np.any(small):
            u[small], up[small] = series_start(self.n, t[small], self.config.series_terms)
        big = ~small
        if np.any(big):
            s = np.log(t[big])
            v, w = self._dense(s)
            u[big] = v - 2.0 * s
            up[big] = w / t[big]
        if scalar:
            return float(u[0]), float(up[0])
        return u, up

    def __call__(self, t):
        return self.evaluate(t)[0]

    def derivative(self, t):
        return self.evaluate(t)[1]

    def second_derivative(self, t):
        """U'' taken from the ODE itself (valid for t > 0)."""
        u, up = self.evaluate(t)
        return -(self.n - 1) * up / np.asarray(t) - np.exp(u)

    def w(self, t):
        t = self._check(t)
        u, up = self.evaluate(t)
        return np.asarray(t) * up if np.ndim(t) else float(t * up)

    def w_slope(self, t):
        """W'(t) = (d w / d s) / t, for t > t_series."""
        t = np.asarray(self._check(t), dtype=float)
        v, w = self._dense(np.log(t))
        return (-(self.n - 2.0) * w - np.exp(v)) / t

    def to_csv(self, path):
        """Write one row per node: ``t,u,uprime,w`` with 17 significant digits."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "u", "uprime", "w"])
            for row in zip(self.nodes, self.u, self.u_prime, self.w_nodes):
                writer.writerow([f"{x:.17g}" for x in row])


def integrate_U(config=None, **kwargs):
    """Integrate the singular IVP for U_n and return a dense ``UProfile``.

    Raises
    ------
    IvpError
        If the integrator stops early (step-size underflow or tolerance
        that cannot be met); ``last_t`` gives the time reached.
    """
    if config is None:
        config = IvpConfig(**kwargs)
    elif kwargs:
        raise TypeError("pass either a config or keyword fields, not both")
    n = config.n
    u0, up0 = series_start(n, config.t_series, config.series_terms)
    s0 = math.log(config.t_series)
    s1 = math.log(config.t_max)
    y0 = [u0 + 2.0 * s0, config.t_series * up0]
    sol = solve_ivp(_log_rhs(n), (s0, s1), y0, method="DOP853",
                    rtol=config.rel_tol, atol=config.abs_tol, dense_output=True)
    if sol.status != 0:
        raise IvpError(f"integration failed: {sol.message}", math.exp(sol.t[-1]))
    return UProfile(config, sol.sol, sol.t, sol.y[0], sol.y[1])


def eval_W(profile, t):
    """W(t) = t U'(t) for 0 < t <= t_max."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0) or np.any(t_arr > profile.t_max * (1 + 1e-14)):
        raise ValueError(f"t must lie in (0, {profile.t_max:g}]")
    return profile.w(t)


@dataclass(frozen=True)
class WExtremum:
    t_star: float
    w_star: float
    kind: str  # "minimum" | "maximum"
    index: int


def _scan_grid(profile, per_step=8):
    """Log-time sample points: every integrator node subdivided ``per_step`` times."""
    s_nodes = np.log(profile.nodes[1:])
    pieces = [np.linspace(a, b, per_step, endpoint=False) for a, b in zip(s_nodes[:-1], s_nodes[1:])]
    pieces.append(s_nodes[-1:])
    return np.concatenate(pieces)


def extrema_of_W(profile, root_tol=1e-13):
    """All interior stationary points of W on (t_series, t_max], in order.

    W is monotone on the series segment, so the search starts at t_series.
    """
    n = profile.n

    def slope(s):
        v, w = profile.log_state(s)
        return -(n - 2.0) * w - np.exp(v)

    grid = _scan_grid(profile)
    g = slope(grid)
    out: List[WExtremum] = []
    for i in np.flatnonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0):
        s_star = brentq(slope, grid[i], grid[i + 1], xtol=root_tol, rtol=4 * np.finfo(float).eps)
        t_star = math.exp(s_star)
        w_star = float(profile.log_state(s_star)[1])
        kind = "minimum" if g[i] < 0 else "maximum"
        out.append(WExtremum(t_star, w_star, kind, len(out)))
    return out
