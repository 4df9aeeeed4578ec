"""
Radial solutions of the Gelfand problem  Delta u + lambda exp(u) = 0  in R^n.

All radial solutions come from the single profile U_n of the singular IVP.
On the unit ball:

* Neumann, lambda = 1, du/dr = gamma:  u(r) = U_n(sigma r) + 2 ln sigma with
  sigma U_n'(sigma) = gamma;
* Dirichlet, u = 0 on the sphere:  u(r) = U_n(sigma r) - U_n(sigma) with
  sigma^2 exp(U_n(sigma)) = lambda.

So the number of solutions is the number of times a horizontal line meets
the Neumann or Dirichlet multiplier curve.  In log-time, with
v = U_n + 2 ln t and w = t U_n', the two multipliers are w and exp(v).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List

import numpy as np
from scipy.optimize import brentq

from .ivp import IvpConfig, _scan_grid, extrema_of_W, integrate_U

SIGMA_MAX = 1e5
TRUNCATION_MARGIN = 1e-3
# relative accuracy of the integrated multipliers; smaller gaps carry no sign
NOISE_FLOOR = 1e-9
SMALL_SIGMA = 1e-8


@lru_cache(maxsize=16)
def dimension_profile(n, sigma_max=SIGMA_MAX, tol=1e-12):
    """Cached U_n integrated to ``sigma_max``."""
    return integrate_U(IvpConfig(n=int(n), t_max=float(sigma_max), rel_tol=tol, abs_tol=tol))


@dataclass(frozen=True)
class DimensionalProfile:
    n: int
    profile: object

    @classmethod
    def build(cls, n, sigma_max=SIGMA_MAX):
        return cls(int(n), dimension_profile(int(n), float(sigma_max)))

    def lower_bound(self, t):
        """-t^2/(2n), which U_n never falls below."""
        return -np.asarray(t, dtype=float) ** 2 / (2.0 * self.n)


def _profile(n, sigma, profile):
    if profile is None:
        profile = dimension_profile(int(n), max(SIGMA_MAX, float(np.max(sigma))))
    if profile.n != n:
        raise ValueError(f"profile is for n = {profile.n}, not n = {n}")
    s = np.asarray(sigma, dtype=float)
    if np.any(s <= 0) or np.any(s > profile.t_max * (1 + 1e-14)):
        raise ValueError(f"sigma must lie in (0, {profile.t_max:g}]")
    return profile


def neumann_multiplier(n, sigma, profile=None):
    """sigma U_n'(sigma)."""
    return _profile(n, sigma, profile).w(sigma)


def dirichlet_multiplier(n, sigma, profile=None):
    """sigma^2 exp(U_n(sigma))."""
    profile = _profile(n, sigma, profile)
    s = np.asarray(sigma, dtype=float)
    val = s**2 * np.exp(profile(s))
    return float(val) if val.ndim == 0 else val


@dataclass(frozen=True)
class CountQuery:
    kind: str  # "neumann" (level gamma < 0) | "dirichlet" (level lambda > 0)
    level: float
    n: int
    sigma_max: float = SIGMA_MAX
    margin: float = TRUNCATION_MARGIN

    def __post_init__(self):
        if self.kind not in ("neumann", "dirichlet"):
            raise ValueError("kind must be 'neumann' or 'dirichlet'")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be an integer >= 1")
        if self.kind == "neumann" and not self.level < 0:
            raise ValueError("Neumann level gamma must be negative")
        if self.kind == "dirichlet" and not self.level > 0:
            raise ValueError("Dirichlet level lambda must be positive")
        if self.sigma_max <= 0:
            raise ValueError("sigma_max must be positive")

    @property
    def asymptote(self):
        return -2.0 if self.kind == "neumann" else 2.0 * (self.n - 2)


@dataclass(frozen=True)
class CountResult:
    count: int
    truncated: bool
    sigmas: List[float] = field(default_factory=list)

    def as_dict(self):
        return {"count": self.count, "truncated": self.truncated, "sigmas": list(self.sigmas)}


def _multiplier_in_log_time(profile, kind):
    t_series = profile.t_series

    def f(s):
        s = np.asarray(s, dtype=float)
        t = np.exp(s)
        out = np.empty_like(t)
        small = t <= t_series
        if np.any(small):
            u, up = profile.evaluate(t[small])
            out[small] = t[small] * up if kind == "neumann" else t[small] ** 2 * np.exp(u)
        if np.any(~small):
            v, w = profile.log_state(s[~small])
            out[~small] = w if kind == "neumann" else np.exp(v)
        return float(out) if out.ndim == 0 else out

    return f


def multiplier_samples(n, kind, sigma_max=SIGMA_MAX, profile=None):
    """(sigma, value) on the log-time scan grid, for plotting."""
    profile = _profile(n, sigma_max, profile)
    f = _multiplier_in_log_time(profile, kind)
    s = _grid(profile, sigma_max)
    return np.exp(s), f(s)


def _grid(profile, sigma_max):
    lo = math.log(profile.t_series)
    small = np.linspace(math.log(SMALL_SIGMA), lo, 80, endpoint=False)
    big = _scan_grid(profile)
    big = big[big <= math.log(sigma_max)]
    if big[-1] < math.log(sigma_max):
        big = np.append(big, math.log(sigma_max))
    return np.concatenate((small, big))


def count_radial_solutions(query, profile=None):
    """Roots of the multiplier equation on (0, sigma_max] by scan and bracket.

    Samples closer to the level than 1e-9 (relative) carry no sign
    information and are skipped, so a curve that creeps up on the level
    without crossing it is not counted.  ``truncated`` marks levels within ``margin`` of the
    asymptote in dimensions 3..9, where the true count is unbounded.
    """
    profile = _profile(query.n, query.sigma_max, profile)
    f = _multiplier_in_log_time(profile, query.kind)
    s = _grid(profile, query.sigma_max)
    g = f(s) - query.level
    keep = np.abs(g) >= NOISE_FLOOR * max(1.0, abs(query.level))
    s, g = s[keep], g[keep]
    sigmas = []
    for i in np.flatnonzero(np.sign(g[:-1]) != np.sign(g[1:])):
        root = brentq(lambda x: f(x) - query.level, s[i], s[i + 1],
                      xtol=1e-15, rtol=4 * np.finfo(float).eps)
        sigmas.append(math.exp(root))
    truncated = 3 <= query.n <= 9 and abs(query.level - query.asymptote) < query.margin
    return CountResult(len(sigmas), bool(truncated), sigmas)


def neumann_infimum(n, profile=None, sigma_max=SIGMA_MAX):
    """Smallest value of sigma U_n'(sigma) over (0, sigma_max]."""
    profile = _profile(n, sigma_max, profile)
    values = [float(profile.w(profile.t_max))]
    values += [e.w_star for e in extrema_of_W(profile) if e.kind == "minimum"]
    return min(values)


def dirichlet_maximum(n, profile=None, sigma_max=SIGMA_MAX):
    """Largest value of sigma^2 exp(U_n) over (0, sigma_max].

    Stationary points satisfy d/ds exp(v) = (w + 2) exp(v) = 0, i.e. W = -2.
    """
    profile = _profile(n, sigma_max, profile)
    f = _multiplier_in_log_time(profile, "dirichlet")
    s = _scan_grid(profile)
    w = profile.log_state(s)[1] + 2.0
    values = [f(s[-1])]
    for i in np.flatnonzero(np.sign(w[:-1]) * np.sign(w[1:]) < 0):
        root = brentq(lambda x: profile.log_state(x)[1] + 2.0, s[i], s[i + 1], xtol=1e-14)
        values.append(f(root))
    return float(max(values))


class RadialSolution:
    """u(r) = U_n(sigma r / R) + shift on the ball of radius R."""

    def __init__(self, profile, sigma, R=1.0, shift=0.0, lam=1.0):
        if sigma <= 0 or R <= 0 or lam <= 0:
            raise ValueError("sigma, R and lambda must be positive")
        self.profile, self.sigma, self.R, self.shift, self.lam = profile, float(sigma), float(R), float(shift), float(lam)
        self.n = profile.n

    def __repr__(self):
        return f"RadialSolution(n={self.n}, sigma={self.sigma:.10g}, R={self.R:g}, lam={self.lam:g})"

    @property
    def k(self):
        return self.sigma / self.R

    def __call__(self, r):
        return self.profile(self.k * np.asarray(r, dtype=float)) + self.shift

    def derivative(self, r):
        return self.k * self.profile.derivative(self.k * np.asarray(r, dtype=float))

    def second_derivative(self, r):
        r = np.asarray(r, dtype=float)
        return self.k**2 * self.profile.second_derivative(self.k * r)

    @property
    def gamma(self):
        """Boundary slope u'(R)."""
        return float(self.derivative(self.R))

    @property
    def c(self):
        """Boundary value u(R)."""
        return float(self(self.R))

    def residual(self, r):
        """u'' + (n-1)/r u' + lambda exp(u) at radii r > 0."""
        r = np.asarray(r, dtype=float)
        return (self.second_derivative(r) + (self.n - 1) / r * self.derivative(r)
                + self.lam * np.exp(self(r)))


def neumann_solution(n, sigma, R=1.0, profile=None):
    """Radial solution of Delta u + exp(u) = 0 on B_R with u'(R) = sigma U_n'(sigma) / R."""
    profile = _profile(n, sigma, profile)
    return RadialSolution(profile, sigma, R, math.log(sigma**2 / R**2), 1.0)


def dirichlet_solution(n, sigma, lam, R=1.0, profile=None):
    """Radial solution of Delta u + lam exp(u) = 0 on B_R."""
    profile = _profile(n, sigma, profile)
    return RadialSolution(profile, sigma, R, math.log(sigma**2 / (lam * R**2)), lam)


def rescale_neumann(u, R2):
    """Map a Neumann solution on B_R1 to B_R2: u((R1/R2) x) + ln(R1^2/R2^2).

    The boundary slope becomes gamma1 R1 / R2.
    """
    if R2 <= 0:
        raise ValueError("R2 must be positive")
    return RadialSolution(u.profile, u.sigma, R2, u.shift + math.log(u.R**2 / R2**2), u.lam)


def rescale_dirichlet(u, lam2, R2):
    """Map a solution for (lam1, R1, c1) to (lam2, R2, c2).

    Returns ``(solution, c2)`` with c2 = c1 + ln(lam1 R1^2 / (lam2 R2^2)).
    """
    if lam2 <= 0 or R2 <= 0:
        raise ValueError("lambda and R must be positive")
    shift = math.log(u.lam * u.R**2 / (lam2 * R2**2))
    new = RadialSolution(u.profile, u.sigma, R2, u.shift + shift, lam2)
    return new, u.c + shift


def exact_oracle(n, t):
    """Closed-form (U_n, U_n') for n = 1 and n = 2."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    if n == 1:
        x = t / math.sqrt(2.0)
        # log cosh without overflow: |x| + log1p(exp(-2|x|)) - log 2
        u = -2.0 * (x + np.log1p(np.exp(-2.0 * x)) - math.log(2.0))
        up = -math.sqrt(2.0) * np.tanh(x)
    elif n == 2:
        u = -2.0 * np.log1p(t**2 / 8.0)
        up = -4.0 * t / (8.0 + t**2)
    else:
        raise ValueError("closed forms exist only for n = 1 and n = 2")
    if u.ndim == 0:
        return float(u), float(up)
    return u, up
