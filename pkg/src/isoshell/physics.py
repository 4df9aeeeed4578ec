"""
Dimensional isothermal gas in a rigid spherical shell.

With r = r_scale * eta and rho = rho_scale * exp(y), hydrostatic equilibrium
of a self-gravitating isothermal gas reduces to

    y'' + (2/eta) y' + pi1 exp(y) = 0,   y'(0) = 0,   y'(pi4) = -N/pi4,

where

    pi1 = 4 pi G r_scale^2 rho_scale / (R T),   pi4 = a / r_scale,
    N   = G m_g / (a R T).

Integrating the equation against eta^2 gives the mass identity

    int_0^pi4 eta^2 exp(y) d eta = N pi4 / pi1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

G_NEWTON = 6.67428e-11


@dataclass(frozen=True)
class PhysicalParams:
    """SI inputs; ``r_scale``/``rho_scale`` default to a and the Pi1 = 1 density."""

    R: float
    T: float
    a: float
    m_g: float
    G: float = G_NEWTON
    r_scale: Optional[float] = None
    rho_scale: Optional[float] = None

    def __post_init__(self):
        if self.r_scale is None:
            object.__setattr__(self, "r_scale", self.a)
        if self.rho_scale is None:
            rho = self.R * self.T / (4.0 * math.pi * self.G * self.r_scale**2)
            object.__setattr__(self, "rho_scale", rho)
        for name in ("G", "R", "T", "a", "m_g", "r_scale", "rho_scale"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")


@dataclass(frozen=True)
class CharacteristicNumbers:
    pi1: float
    pi4: float
    N: float

    def __post_init__(self):
        if min(self.pi1, self.pi4, self.N) <= 0:
            raise ValueError("characteristic numbers must be positive")


@dataclass(frozen=True)
class FieldProfiles:
    r: np.ndarray
    rho: np.ndarray
    p: np.ndarray
    g: np.ndarray


def characteristic_numbers(params):
    rt = params.R * params.T
    return CharacteristicNumbers(
        pi1=4.0 * math.pi * params.G * params.r_scale**2 * params.rho_scale / rt,
        pi4=params.a / params.r_scale,
        N=params.G * params.m_g / (params.a * rt),
    )


def _nodes_of(sol, pi4, points=201):
    nodes = getattr(sol, "nodes", None)
    if nodes is None:
        return np.linspace(0.0, pi4, points)
    nodes = np.asarray(nodes, dtype=float)
    if abs(nodes[-1] - pi4) > 1e-12 * max(1.0, pi4):
        # solutions computed for pi4 = 1 and mapped to [0, pi4]
        nodes = nodes * (pi4 / nodes[-1])
    return nodes


def fields_from_solution(sol, params, numbers=None, slope_tol=1e-6):
    """Density, pressure and gravity at r = r_scale * eta on the solution nodes.

    ``sol`` is any nondimensional solution on [0, pi4] exposing ``__call__``
    and ``derivative`` (node values are taken from ``sol.nodes`` when
    present).

    Raises
    ------
    ValueError
        If the solution's boundary slope disagrees with -N/pi4.
    """
    numbers = numbers or characteristic_numbers(params)
    eta = _nodes_of(sol, numbers.pi4)
    slope = float(np.atleast_1d(sol.derivative(eta[-1:]))[0])
    expected = -numbers.N / numbers.pi4
    if abs(slope - expected) > slope_tol * max(1.0, abs(expected)):
        raise ValueError(f"solution slope y'(pi4) = {slope:.10g} is inconsistent with "
                         f"-N/pi4 = {expected:.10g}")
    rt = params.R * params.T
    rho = params.rho_scale * np.exp(sol(eta))
    yp = np.asarray(sol.derivative(eta), dtype=float).copy()
    yp[0] = 0.0 if eta[0] == 0.0 else yp[0]
    return FieldProfiles(r=params.r_scale * eta, rho=rho, p=rho * rt, g=rt / params.r_scale * yp)


def mass_integral(sol, pi4=1.0, order=6):
    """int_0^pi4 eta^2 exp(y) by composite Gauss-Legendre on the solution mesh.

    Each interval gets order/2 + 1 points (exact for polynomials of degree
    order + 1), with y evaluated by the solution's own interpolant.
    """
    nodes = _nodes_of(sol, pi4)
    x, w = np.polynomial.legendre.leggauss(order // 2 + 1)
    a, b = nodes[:-1, None], nodes[1:, None]
    eta = 0.5 * (a + b) + 0.5 * (b - a) * x[None, :]
    vals = eta**2 * np.exp(sol(eta.ravel()).reshape(eta.shape))
    return float(np.sum(0.5 * (b - a) * w[None, :] * vals))


def mass_residual(sol, numbers=None, order=None):
    """|int_0^pi4 eta^2 exp(y) - N pi4 / pi1|."""
    if numbers is None:
        numbers = CharacteristicNumbers(1.0, 1.0, float(sol.N))
    if order is None:
        order = getattr(sol, "p", 6)
    return abs(mass_integral(sol, numbers.pi4, order) - numbers.N * numbers.pi4 / numbers.pi1)
