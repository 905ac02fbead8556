"""Constitutive laws and discrete right-hand sides of the mass-coordinate system.

Stencils are two-point centered differences on the staggered grid: divergences
of node fluxes land on cells, gradients of cell quantities land on nodes.  The
coupling source is assembled from the cumulative mass defect so that it
vanishes identically (to the last bit) on the constant state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .admissibility import ExponentPair
from .state import FluidState


@dataclass(frozen=True)
class Coefficients:
    """Exponents plus the background density entering the coupling source."""

    alpha: float
    gamma: float
    kappa: int
    dim: int
    rho_bar: float = 1.0

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim!r}")
        if self.kappa not in (-1, 1):
            raise ValueError(f"kappa must be -1 or +1, got {self.kappa!r}")
        if self.rho_bar <= 0.0:
            raise ValueError("rho_bar must be positive")

    def as_pair(self) -> ExponentPair:
        return ExponentPair(self.alpha, self.gamma, self.dim, self.kappa)

    def _positive(self, rho):
        rho = np.asarray(rho, dtype=float)
        if np.any(rho <= 0.0):
            raise ValueError("density must be positive")
        return rho

    def pressure(self, rho):
        return self._positive(rho) ** self.gamma

    def mu(self, rho):
        return self._positive(rho) ** self.alpha

    def lambda_(self, rho):
        return (self.alpha - 1.0) * self._positive(rho) ** self.alpha

    def sound_speed(self, rho):
        rho = self._positive(rho)
        return np.sqrt(self.gamma * rho ** (self.gamma - 1.0))


def velocity_divergence(state: FluidState, dim: int) -> np.ndarray:
    """Per-cell (r^{N-1} u)_x; this is also the rate of change of 1/rho."""
    flux = state.r ** (dim - 1) * state.u
    return np.diff(flux) / state.dx


def continuity_rhs(state: FluidState, coeffs: Coefficients) -> np.ndarray:
    """Per-cell d(rho)/dtau = -rho^2 (r^{N-1} u)_x."""
    return -state.rho ** 2 * velocity_divergence(state, coeffs.dim)


def mass_defect(state: FluidState, coeffs: Coefficients) -> np.ndarray:
    """Node values of x - rho_bar * r^N / N, accumulated cell by cell.

    Each cell contributes dx * (1 - rho_bar/rho_i), so the defect is exactly
    zero on the state rho == rho_bar.
    """
    out = np.empty(state.cells + 1)
    out[0] = 0.0
    np.cumsum(state.dx * (1.0 - coeffs.rho_bar / state.rho), out=out[1:])
    return out


def source_term(state: FluidState, coeffs: Coefficients) -> np.ndarray:
    """Coupling acceleration -kappa*x/r^{N-1} + kappa*rho_bar*r/N per node.

    The value at the center node is the analytic limit 0.
    """
    defect = mass_defect(state, coeffs)
    out = np.zeros(state.cells + 1)
    out[1:] = -coeffs.kappa * defect[1:] / state.r[1:] ** (coeffs.dim - 1)
    return out


def momentum_terms(state: FluidState, coeffs: Coefficients) -> dict[str, np.ndarray]:
    """Node-based acceleration split: pressure, viscous, cross, source.

    All arrays carry zeros at the pinned boundary nodes.
    """
    dim, dx = coeffs.dim, state.dx
    rho, u, r = state.rho, state.u, state.r
    rn1_int = r[1:-1] ** (dim - 1)

    def interior(values):
        out = np.zeros(state.cells + 1)
        out[1:-1] = values
        return out

    pgrad = np.diff(coeffs.pressure(rho)) / dx
    pressure = interior(-rn1_int * pgrad)

    div = velocity_divergence(state, dim)
    visc_flux = coeffs.alpha * rho ** (1.0 + coeffs.alpha) * div
    viscous = interior(rn1_int * np.diff(visc_flux) / dx)

    agrad = np.diff(rho ** coeffs.alpha) / dx
    cross = interior(-(dim - 1) * u[1:-1] * r[1:-1] ** (dim - 2) * agrad)

    source = source_term(state, coeffs)
    source[0] = 0.0
    source[-1] = 0.0
    return {"pressure": pressure, "viscous": viscous, "cross": cross, "source": source}


def momentum_rhs(state: FluidState, coeffs: Coefficients) -> np.ndarray:
    """Per-node du/dtau; boundary nodes are pinned to zero."""
    terms = momentum_terms(state, coeffs)
    return terms["pressure"] + terms["viscous"] + terms["cross"] + terms["source"]


def effective_velocity(state: FluidState, coeffs: Coefficients) -> np.ndarray:
    """w = u + r^{N-1} (rho^alpha)_x per node; one-sided differences at the ends."""
    dim, dx = coeffs.dim, state.dx
    rhoa = state.rho ** coeffs.alpha
    w = state.u.copy()
    rn1 = state.r ** (dim - 1)
    w[1:-1] += rn1[1:-1] * np.diff(rhoa) / dx
    w[0] += rn1[0] * (rhoa[1] - rhoa[0]) / dx
    w[-1] += rn1[-1] * (rhoa[-1] - rhoa[-2]) / dx
    return w


def w_rhs(state: FluidState, coeffs: Coefficients) -> np.ndarray:
    """dw/dtau = -r^{N-1}(rho^gamma)_x + source; free of the viscous operator."""
    dim, dx = coeffs.dim, state.dx
    P = coeffs.pressure(state.rho)
    rn1 = state.r ** (dim - 1)
    out = source_term(state, coeffs)
    out[1:-1] -= rn1[1:-1] * np.diff(P) / dx
    out[-1] -= rn1[-1] * (P[-1] - P[-2]) / dx
    # center node: r^{N-1} and the source limit both vanish
    out[0] = 0.0
    return out
