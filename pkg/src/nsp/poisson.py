"""Radial potential reconstruction with Neumann ends and zero volume mean.

In radial symmetry the first integral of the potential equation is exact in
mass coordinates: r^{N-1} Phi_r = kappa * (x - rho_bar r^N / N).  The field is
therefore reconstructed by quadrature; the Lagrangian elliptic form is kept
only as a residual check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .physics import Coefficients, mass_defect
from .state import FluidState

_SPHERE_AREA = {2: 2.0 * np.pi, 3: 4.0 * np.pi}


class CompatibilityError(RuntimeError):
    """Total mass does not match the background density times the volume."""


@dataclass(frozen=True)
class PotentialField:
    phi: np.ndarray
    phi_r: np.ndarray
    mean_residual: float


def cell_volumes(state: FluidState, dim: int) -> np.ndarray:
    """Exact shell volumes (r_{i+1}^N - r_i^N)/N of the radial quadrature."""
    return np.diff(state.r ** dim) / dim


def solve_phi(state: FluidState, coeffs: Coefficients, compat_tol: float = 1e-8) -> PotentialField:
    """Reconstruct (phi, phi_r) by quadrature; raises on mass/background mismatch."""
    defect = mass_defect(state, coeffs)
    if abs(defect[-1]) > compat_tol:
        raise CompatibilityError(
            f"net source integral {defect[-1]:.3e} exceeds {compat_tol:.1e}; "
            "background density is incompatible with the total mass")
    phi_r = np.zeros(state.cells + 1)
    phi_r[1:] = coeffs.kappa * defect[1:] / state.r[1:] ** (coeffs.dim - 1)

    phi = np.empty(state.cells + 1)
    phi[0] = 0.0
    np.cumsum(0.5 * (phi_r[1:] + phi_r[:-1]) * np.diff(state.r), out=phi[1:])

    vols = cell_volumes(state, coeffs.dim)
    phi_mid = 0.5 * (phi[1:] + phi[:-1])
    phi = phi - np.sum(phi_mid * vols) / np.sum(vols)
    phi_mid = 0.5 * (phi[1:] + phi[:-1])
    residual = float(np.sum(phi_mid * vols) / np.sum(vols))
    return PotentialField(phi, phi_r, residual)


def grad_phi_l2_squared(state: FluidState, field: PotentialField, coeffs: Coefficients) -> float:
    """Squared L^2(Omega) norm of the potential gradient."""
    mid = 0.5 * (field.phi_r[1:] + field.phi_r[:-1])
    vols = cell_volumes(state, coeffs.dim)
    return float(_SPHERE_AREA[coeffs.dim] * np.sum(mid ** 2 * vols))


def phi_energy_check(state: FluidState, field: PotentialField,
                     coeffs: Coefficients) -> tuple[float, float]:
    """(lhs, rhs) of the gradient-energy bound; the constant is monitored, not assumed.

    lhs = |grad phi|_{L^2}^2, rhs = |rho - rho_bar|_{L^{6/5}} * |grad phi|_{L^2}.
    """
    if coeffs.dim != 3:
        raise ValueError("gradient-energy bound is stated for N = 3 only")
    lhs = grad_phi_l2_squared(state, field, coeffs)
    vols = cell_volumes(state, 3)
    l65 = (_SPHERE_AREA[3] * np.sum(np.abs(state.rho - coeffs.rho_bar) ** 1.2 * vols)) ** (5.0 / 6.0)
    return lhs, float(l65 * np.sqrt(lhs))


def elliptic_residual(state: FluidState, field: PotentialField,
                      coeffs: Coefficients) -> np.ndarray:
    """Per-cell residual of (rho r^{2N-2} phi_x)_x = kappa (1 - rho_bar/rho).

    The quadrature reconstruction satisfies this flux form exactly, so the
    residual is a roundoff-level regression quantity.
    """
    flux = state.r ** (coeffs.dim - 1) * field.phi_r  # equals kappa * mass defect
    return np.diff(flux) / state.dx - coeffs.kappa * (1.0 - coeffs.rho_bar / state.rho)
