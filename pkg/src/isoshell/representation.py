"""
Closed-form solutions of the shell problem

    y'' + (2/eta) y' + pi1 exp(y) = 0,  y'(0) = 0,  y'(pi4) = -N/pi4,

built from the n = 3 profile U.  Every solution is

    y(eta) = U(sigma eta / pi4) + ln(sigma^2 / (pi1 pi4^2)),

with sigma > 0 a root of W(sigma) = -N, so counting solutions is counting
roots of W + N.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional

import numpy as np
from scipy.optimize import brentq

from .ivp import IvpConfig, extrema_of_W, integrate_U

ROOT_TOL = 1e-10
CONDITIONING_T = 1e3
NEAR_TWO_MARGIN = 1e-6
SCAN_POINTS = 2000


@lru_cache(maxsize=4)
def default_profile(t_max=1e12, tol=1e-12):
    """Shared n = 3 profile used as the representation oracle.

    The log-time integration stays accurate far beyond t = 1e5, which is
    needed for N close to 2 (the eighth root for N = 2.0001 sits near
    sigma = 4e7).
    """
    return integrate_U(IvpConfig(n=3, t_max=t_max, rel_tol=tol, abs_tol=tol))


@dataclass(frozen=True)
class WRoot:
    sigma: float
    residual: float
    fold: bool = False
    amplification: Optional[float] = None
    warning: Optional[str] = None


@dataclass(frozen=True)
class Thresholds:
    n1: float
    n2: float
    sigma_n2: float
    sigma_n1: float


@dataclass(frozen=True)
class SolutionCount:
    count: int
    truncated: bool
    roots: List[WRoot] = field(default_factory=list)


def _conditioning(profile, sigma):
    amp = warning = None
    if sigma > CONDITIONING_T:
        slope = float(profile.w_slope(sigma))
        amp = math.inf if slope == 0 else abs(1.0 / slope)
        warning = f"ill-conditioned root: |1/W'| = {amp:.3g} at t = {sigma:.3g}"
    return amp, warning


def roots_of_W(N, profile=None, root_tol=ROOT_TOL, scan_points=SCAN_POINTS):
    """Sorted roots sigma of W(sigma) = -N on (0, t_max].

    Sign changes of W + N are bracketed on a log grid and refined with
    Brent's method in s = ln t.  A level that touches an extremum of W to
    within ``root_tol`` is reported once, with ``fold=True``.
    """
    if N <= 0:
        raise ValueError("N must be positive")
    if profile is None:
        profile = default_profile()
    lo = math.log(max(profile.t_series, 1e-2))
    s_grid = np.linspace(lo, math.log(profile.t_max), scan_points)
    s_small = np.linspace(math.log(1e-6), lo, 60, endpoint=False)

    def g(s):
        return profile.w(np.exp(s)) + N

    grid = np.concatenate((s_small, s_grid))
    vals = g(grid)
    sigmas = []
    for i in np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0):
        s = brentq(g, grid[i], grid[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps)
        sigmas.append(math.exp(s))

    folds = [e for e in extrema_of_W(profile) if abs(e.w_star + N) <= root_tol]
    out = []
    for e in folds:
        # a touching level may or may not produce a bracketed pair nearby
        sigmas = [x for x in sigmas if abs(math.log(x / e.t_star)) > 1e-3]
        amp, warn = _conditioning(profile, e.t_star)
        out.append(WRoot(e.t_star, abs(e.w_star + N), True, amp, warn))
    for x in sigmas:
        amp, warn = _conditioning(profile, x)
        out.append(WRoot(x, abs(float(profile.w(x)) + N), False, amp, warn))
    out.sort(key=lambda r: r.sigma)
    return out


def count_solutions(N, profile=None, margin=NEAR_TWO_MARGIN):
    """Number of solutions for Pi1 = Pi4 = 1.

    ``truncated`` marks a lower bound: either N is within ``margin`` of 2,
    or the oscillation of W left at t_max is still wide enough to reach
    -N, so roots beyond the profile cannot be excluded.
    """
    if profile is None:
        profile = default_profile()
    if profile.n != 3:
        raise ValueError("solution counting uses the n = 3 profile")
    roots = roots_of_W(N, profile)
    ext = extrema_of_W(profile)
    tail = abs(ext[-1].w_star + 2.0) if ext else math.inf
    truncated = abs(N - 2.0) < max(margin, tail)
    return SolutionCount(len(roots), truncated, roots)


def critical_thresholds(profile=None):
    """N2 = -(first minimum of W) and N1 = -(the maximum following it)."""
    if profile is None:
        profile = default_profile()
    ext = extrema_of_W(profile)
    first_min = next((e for e in ext if e.kind == "minimum"), None)
    if first_min is None:
        raise ValueError("profile too short: no minimum of W found")
    first_max = next((e for e in ext if e.kind == "maximum" and e.index > first_min.index), None)
    if first_max is None:
        raise ValueError("profile too short: no maximum of W after the first minimum")
    return Thresholds(n1=-first_max.w_star, n2=-first_min.w_star,
                      sigma_n2=first_min.t_star, sigma_n1=first_max.t_star)


class ClosedFormSolution:
    """y(eta) = U(sigma eta / pi4) + ln(sigma^2 / (pi1 pi4^2)) on [0, pi4]."""

    def __init__(self, sigma, pi1, pi4, profile):
        if sigma <= 0 or pi1 <= 0 or pi4 <= 0:
            raise ValueError("sigma, pi1 and pi4 must be positive")
        if sigma > profile.t_max:
            raise ValueError(f"sigma = {sigma:g} exceeds the profile range {profile.t_max:g}")
        self.sigma, self.pi1, self.pi4 = float(sigma), float(pi1), float(pi4)
        self.profile = profile
        self.shift = math.log(sigma**2 / (pi1 * pi4**2))

    def __repr__(self):
        return f"ClosedFormSolution(sigma={self.sigma:.12g}, pi1={self.pi1:g}, pi4={self.pi4:g})"

    @property
    def y0(self):
        return self.shift

    @property
    def N(self):
        return -float(self.profile.w(self.sigma))

    def __call__(self, eta):
        return self.profile(self.sigma / self.pi4 * np.asarray(eta, dtype=float)) + self.shift

    def derivative(self, eta):
        k = self.sigma / self.pi4
        return k * self.profile.derivative(k * np.asarray(eta, dtype=float))


def reconstruct(sigma, pi1=1.0, pi4=1.0, profile=None):
    if profile is None:
        profile = default_profile()
    return ClosedFormSolution(sigma, pi1, pi4, profile)


class RescaledSolution:
    """y~(eta) = y(eta / pi4) - ln(pi1 pi4^2), mapping a Pi1 = Pi4 = 1 solution."""

    def __init__(self, base, pi1, pi4):
        if pi1 <= 0 or pi4 <= 0:
            raise ValueError("pi1 and pi4 must be positive")
        self.base, self.pi1, self.pi4 = base, float(pi1), float(pi4)
        self.shift = -math.log(pi1 * pi4**2)

    def __call__(self, eta):
        return self.base(np.asarray(eta, dtype=float) / self.pi4) + self.shift

    def derivative(self, eta):
        return self.base.derivative(np.asarray(eta, dtype=float) / self.pi4) / self.pi4


def rescale_solution(y, pi1, pi4):
    return RescaledSolution(y, pi1, pi4)
