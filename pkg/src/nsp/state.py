"""Mass-coordinate grid, discrete fluid state, and Eulerian reconstruction.

The computational domain is the unit mass interval: M uniform cells carry the
density, the M+1 nodes carry velocity and radius.  Node radii are never
integrated in time; they are reconstructed from the density so that the total
mass identity sum(rho_i * (r_{i+1}^N - r_i^N) / N) = 1 telescopes exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class NonPositiveDensityError(ValueError):
    pass


class InitialDataError(ValueError):
    pass


@dataclass(frozen=True)
class MassGrid:
    """Uniform grid on [0, 1] in the cumulative-mass coordinate."""

    cells: int

    def __post_init__(self):
        if self.cells < 2:
            raise ValueError(f"need at least 2 cells, got {self.cells}")

    @property
    def dx(self) -> float:
        return 1.0 / self.cells

    def nodes(self) -> np.ndarray:
        return np.arange(self.cells + 1) * self.dx

    def cell_centers(self) -> np.ndarray:
        return (np.arange(self.cells) + 0.5) * self.dx


def radius_from_density(rho: np.ndarray, dim: int) -> np.ndarray:
    """Node radii from cell densities: r_{j+1}^N = r_j^N + N*dx/rho_j, r_0 = 0."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0.0) or not np.all(np.isfinite(rho)):
        raise NonPositiveDensityError("density must be positive and finite")
    dx = 1.0 / rho.size
    shells = np.empty(rho.size + 1)
    shells[0] = 0.0
    np.cumsum(dim * dx / rho, out=shells[1:])
    return shells ** (1.0 / dim)


@dataclass
class FluidState:
    """Cell densities, node velocities, node radii, Lagrangian time."""

    rho: np.ndarray
    u: np.ndarray
    r: np.ndarray
    tau: float = 0.0

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.r = np.asarray(self.r, dtype=float)
        if self.u.size != self.rho.size + 1 or self.r.size != self.rho.size + 1:
            raise ValueError("u and r must be node arrays (len(rho) + 1)")

    @property
    def cells(self) -> int:
        return self.rho.size

    @property
    def dx(self) -> float:
        return 1.0 / self.rho.size

    def x_nodes(self) -> np.ndarray:
        return np.arange(self.cells + 1) * self.dx

    def copy(self) -> "FluidState":
        return FluidState(self.rho.copy(), self.u.copy(), self.r.copy(), self.tau)

    def validate(self) -> None:
        if np.any(self.rho <= 0.0):
            raise NonPositiveDensityError("non-positive density cell")
        if self.u[0] != 0.0 or self.u[-1] != 0.0:
            raise ValueError("boundary velocities must vanish")
        if self.r[0] != 0.0 or np.any(np.diff(self.r) <= 0.0):
            raise ValueError("radii must start at 0 and increase strictly")


@dataclass(frozen=True)
class EulerianProfile:
    """Samples (r, rho(r), u(r)) at the node radii."""

    r: np.ndarray
    rho: np.ndarray
    u: np.ndarray


def node_average(cell_values: np.ndarray) -> np.ndarray:
    """Cell field averaged to nodes; end nodes copy the adjacent cell."""
    out = np.empty(cell_values.size + 1)
    out[1:-1] = 0.5 * (cell_values[1:] + cell_values[:-1])
    out[0] = cell_values[0]
    out[-1] = cell_values[-1]
    return out


def to_eulerian(state: FluidState) -> EulerianProfile:
    return EulerianProfile(state.r.copy(), node_average(state.rho), state.u.copy())


def specific_volume_integral(state: FluidState) -> float:
    """Discrete integral of 1/rho over the mass interval; conserved by the flow."""
    return float(np.sum(state.dx / state.rho))


@dataclass(frozen=True)
class InitialDataSpec:
    """Generator parameters for the starting profile.

    kind: constant | gaussian-bump | polynomial | tabulated.
    Profiles are functions of the mass coordinate x in [0, 1] except for
    tabulated files with an 'r' abscissa, which are converted (and mass
    rescaled) first.
    """

    kind: str = "constant"
    amplitude: float = 1.0
    center: float = 0.5
    width: float = 0.15
    floor: float = 1e-3
    coeffs: tuple = ()
    file: str | None = None
    velocity_amplitude: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "gaussian-bump", "polynomial", "tabulated"):
            raise InitialDataError(f"unknown profile kind {self.kind!r}")
        if self.floor <= 0.0:
            raise InitialDataError("density floor must be positive")


def load_tabulated(path) -> tuple[str, np.ndarray, np.ndarray]:
    """Two-column whitespace profile with a one-line header naming the abscissa."""
    lines = [ln.split("#", 1)[0].strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise InitialDataError(f"{path}: empty profile file")
    header = lines[0].split()
    if not header or header[0] not in ("r", "x"):
        raise InitialDataError(f"{path}: header must name the abscissa ('r' or 'x')")
    rows = [ln.split() for ln in lines[1:]]
    if not rows or any(len(row) != 2 for row in rows):
        raise InitialDataError(f"{path}: expected two whitespace-separated columns")
    data = np.array(rows, dtype=float)
    absc, dens = data[:, 0], data[:, 1]
    if np.any(np.diff(absc) <= 0.0):
        raise InitialDataError(f"{path}: abscissa must be strictly increasing")
    return header[0], absc, dens


def _tabulated_on_mass_grid(spec: InitialDataSpec, xc: np.ndarray, dim: int) -> np.ndarray:
    if spec.file is None:
        raise InitialDataError("tabulated profile needs a file")
    absc_kind, absc, dens = load_tabulated(spec.file)
    if np.any(dens <= 0.0):
        raise InitialDataError(f"{spec.file}: non-positive density entry")
    if absc_kind == "x":
        if absc[0] > 0.0 or absc[-1] < 1.0:
            raise InitialDataError(f"{spec.file}: x-profile must cover [0, 1]")
        return np.interp(xc, absc, dens)
    # physical profile rho(r): rescale so total mass is 1, then invert the mass map
    grid_r = absc
    if grid_r[0] > 0.0:
        grid_r = np.concatenate([[0.0], grid_r])
        dens = np.concatenate([[dens[0]], dens])
    integrand = dens * grid_r ** (dim - 1)
    mass = np.concatenate([[0.0], np.cumsum(
        0.5 * (integrand[1:] + integrand[:-1]) * np.diff(grid_r))])
    total = mass[-1]
    if total <= 0.0:
        raise InitialDataError(f"{spec.file}: profile carries no mass")
    r_of_x = np.interp(xc * total, mass, grid_r)
    return np.interp(r_of_x, grid_r, dens) / total


def make_initial(spec: InitialDataSpec, grid: MassGrid, dim: int) -> tuple[FluidState, float]:
    """Build the starting state; returns (state, background density rho_bar).

    rho_bar is the mean density N/R^N so the potential's compatibility
    condition holds for the generated state.
    """
    xc = grid.cell_centers()
    if spec.kind == "constant":
        rho0 = np.full(grid.cells, float(spec.amplitude))
    elif spec.kind == "gaussian-bump":
        rho0 = spec.floor + (spec.amplitude - spec.floor) * np.exp(
            -(((xc - spec.center) / spec.width) ** 2))
    elif spec.kind == "polynomial":
        if not spec.coeffs:
            raise InitialDataError("polynomial profile needs coeffs")
        rho0 = np.polynomial.polynomial.polyval(xc, np.asarray(spec.coeffs, dtype=float))
    else:
        rho0 = _tabulated_on_mass_grid(spec, xc, dim)
    if np.any(rho0 < spec.floor):
        raise InitialDataError(
            f"profile dips below the floor {spec.floor} (min {rho0.min():.6g})")
    xn = grid.nodes()
    u0 = spec.velocity_amplitude * np.sin(np.pi * xn)
    u0[0] = 0.0
    u0[-1] = 0.0
    r0 = radius_from_density(rho0, dim)
    # mean density N/R^N, written as 1/sum(dx/rho) so the compatibility
    # defect 1 - rho_bar*sum(dx/rho) is a one-ulp quantity
    rho_bar = 1.0 / float(np.sum(grid.dx / rho0))
    return FluidState(rho0, u0, r0, 0.0), rho_bar
