"""Runtime evaluation of the monitored estimate functionals.

Each simulation step can be summarized into one DiagnosticsRecord holding the
energy, the entropy of the effective velocity, weighted density norms, the
mass/radius relation constants, density extrema and the discrete power budget.
The running suprema live in an EstimateLedger: the quantities the global
bounds control are reported, never asserted against a hardcoded constant.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import physics, poisson
from .physics import Coefficients
from .state import FluidState, node_average, specific_volume_integral


def cell_average(node_values: np.ndarray) -> np.ndarray:
    return 0.5 * (node_values[1:] + node_values[:-1])


def basic_energy(state: FluidState, coeffs: Coefficients) -> float:
    """Kinetic plus pressure potential: sum of (u^2/2 + rho^(g-1)/(g-1)) dx."""
    ubar = cell_average(state.u)
    g = coeffs.gamma
    return float(np.sum((0.5 * ubar ** 2 + state.rho ** (g - 1.0) / (g - 1.0)) * state.dx))


def kappa_xr_integral(state: FluidState, coeffs: Coefficients) -> float:
    """Bookkeeping term kappa * integral of x/r dx tracked alongside the energy."""
    xmid = cell_average(state.x_nodes())
    rmid = cell_average(state.r)
    return float(coeffs.kappa * np.sum(xmid / rmid * state.dx))


def basic_dissipation(state: FluidState, coeffs: Coefficients) -> float:
    """Quadrature of rho^(a-1) u^2/r^2 + rho^(1+a) (r^{N-1} u_x)^2.

    The u/r factor at the center uses the one-sided limit value u_1/r_1.
    """
    a, dim, dx = coeffs.alpha, coeffs.dim, state.dx
    ratio = np.empty(state.cells + 1)
    ratio[1:] = state.u[1:] / state.r[1:]
    ratio[0] = ratio[1]
    rho_nodes = node_average(state.rho)
    integrand = rho_nodes ** (a - 1.0) * ratio ** 2
    part1 = np.sum(integrand * dx) - 0.5 * dx * (integrand[0] + integrand[-1])

    rmid = cell_average(state.r)
    ux = np.diff(state.u) / dx
    part2 = np.sum(state.rho ** (1.0 + a) * (rmid ** (dim - 1) * ux) ** 2 * dx)
    return float(part1 + part2)


def bd_entropy(state: FluidState, coeffs: Coefficients) -> float:
    """Half the squared mass-weighted L^2 norm of the effective velocity."""
    wbar = cell_average(physics.effective_velocity(state, coeffs))
    return float(0.5 * np.sum(wbar ** 2 * state.dx))


def bd_dissipation(state: FluidState, coeffs: Coefficients) -> float:
    """Trapezoid quadrature of ((rho^{(g+a)/2})_x r^{N-1})^2 over the nodes.

    Ends use one-sided gradients; the center weight vanishes with r^{N-1}.
    """
    g = state.rho ** (0.5 * (coeffs.gamma + coeffs.alpha))
    dx = state.dx
    rn1 = state.r ** (coeffs.dim - 1)
    f = np.empty(state.cells + 1)
    f[1:-1] = (np.diff(g) / dx * rn1[1:-1]) ** 2
    f[0] = ((g[1] - g[0]) / dx * rn1[0]) ** 2
    f[-1] = ((g[-1] - g[-2]) / dx * rn1[-1]) ** 2
    return float(np.sum(f * dx) - 0.5 * dx * (f[0] + f[-1]))


def weighted_density_norm(state: FluidState, coeffs: Coefficients, xi: float = 1e-2) -> float:
    """Max of rho^(a-1/2) r^e with e = xi (N=2) or 1/2 + xi (N=3)."""
    if xi <= 0.0:
        raise ValueError("xi must be positive")
    e = xi if coeffs.dim == 2 else 0.5 + xi
    rmid = cell_average(state.r)
    return float(np.max(state.rho ** (coeffs.alpha - 0.5) * rmid ** e))


def xr_exponents(coeffs: Coefficients) -> dict[str, float]:
    """Monitored exponents of the x <= C r^e relations, gated by (N, alpha)."""
    g = coeffs.gamma
    out = {"energy": coeffs.dim * (g - 1.0) / g}
    if coeffs.dim == 3 and coeffs.alpha > 2.0 / 3.0:
        out["bd"] = 3.0 * (1.0 - 1.0 / (6.0 * coeffs.alpha - 3.0))
    return out


def xr_relation_constant(state: FluidState, exponent: float) -> float:
    """Max over interior nodes of x / r^e (node 0 is the 0/0 limit, excluded)."""
    x = state.x_nodes()[1:]
    return float(np.max(x / state.r[1:] ** exponent))


def lp_norm(field_nodes: np.ndarray, order: int, state: FluidState,
            coeffs: Coefficients, weight: str = "lagrangian") -> float:
    """Raw integral of f^order (order even >= 2), mass or volume weighted.

    "lagrangian" integrates against dx, "eulerian" against rho r^{N-1} dr;
    the two agree analytically and differ only in quadrature.
    """
    if order < 2 or order % 2 != 0:
        raise ValueError(f"order must be even and >= 2, got {order}")
    fbar = cell_average(np.asarray(field_nodes, dtype=float))
    if weight == "lagrangian":
        return float(np.sum(fbar ** order * state.dx))
    if weight == "eulerian":
        rmid = cell_average(state.r)
        dr = np.diff(state.r)
        return float(np.sum(fbar ** order * state.rho * rmid ** (coeffs.dim - 1) * dr))
    raise ValueError(f"unknown weight {weight!r}")


def max_velocity_gradient(state: FluidState) -> float:
    return float(np.max(np.abs(np.diff(state.u) / state.dx)))


@dataclass(frozen=True)
class DiagnosticOptions:
    xi: float = 1e-2
    lp_orders: tuple[int, ...] = (2, 4)
    compat_tol: float = 1e-8


@dataclass(frozen=True)
class DiagnosticsRecord:
    tau: float
    energy: float
    kappa_xr_integral: float
    dissipation_rate: float
    bd_entropy: float
    bd_dissipation_rate: float
    weighted_density_norm: float
    xr_constants: dict
    lp_u: dict
    lp_w: dict
    rho_max: float
    rho_min: float
    v_integral: float
    phi_grad_l2: float
    visc_power: float
    source_power: float
    energy_balance_residual: float
    max_velocity_gradient: float

    def as_dict(self) -> dict:
        return {
            "tau": self.tau,
            "energy": self.energy,
            "kappa_xr_integral": self.kappa_xr_integral,
            "dissipation_rate": self.dissipation_rate,
            "bd_entropy": self.bd_entropy,
            "bd_dissipation_rate": self.bd_dissipation_rate,
            "weighted_density_norm": self.weighted_density_norm,
            "xr_constants": dict(self.xr_constants),
            "lp_u": dict(self.lp_u),
            "lp_w": dict(self.lp_w),
            "rho_max": self.rho_max,
            "rho_min": self.rho_min,
            "v_integral": self.v_integral,
            "phi_grad_l2": self.phi_grad_l2,
            "visc_power": self.visc_power,
            "source_power": self.source_power,
            "energy_balance_residual": self.energy_balance_residual,
            "max_velocity_gradient": self.max_velocity_gradient,
        }

    def to_ndjson(self) -> str:
        return json.dumps(self.as_dict())


def power_budget(state: FluidState, coeffs: Coefficients) -> tuple[float, float]:
    """(viscous drain, everything else) of the exact discrete energy rate.

    dE/dtau along the semidiscrete flow equals source_power - visc_power by
    construction, so the balance residual isolates the time-stepping error.
    """
    terms = physics.momentum_terms(state, coeffs)
    ubar = cell_average(state.u)
    dx = state.dx

    def cell_power(acc):
        return float(np.sum(ubar * cell_average(acc) * dx))

    visc_power = -(cell_power(terms["viscous"]) + cell_power(terms["cross"]))
    rho_dot = physics.continuity_rhs(state, coeffs)
    compression = float(np.sum(state.rho ** (coeffs.gamma - 2.0) * rho_dot * dx))
    source_power = cell_power(terms["source"]) + cell_power(terms["pressure"]) + compression
    return visc_power, source_power


def compute_record(state: FluidState, coeffs: Coefficients,
                   opts: DiagnosticOptions = DiagnosticOptions(),
                   prev: DiagnosticsRecord | None = None) -> DiagnosticsRecord:
    w = physics.effective_velocity(state, coeffs)
    field = poisson.solve_phi(state, coeffs, compat_tol=opts.compat_tol)
    xr = {name: xr_relation_constant(state, e) for name, e in xr_exponents(coeffs).items()}
    lp_u = {str(p): lp_norm(state.u, p, state, coeffs) for p in opts.lp_orders}
    lp_w = {str(p): lp_norm(w, p, state, coeffs) for p in opts.lp_orders}
    visc_power, source_power = power_budget(state, coeffs)
    energy = basic_energy(state, coeffs)
    if prev is None or state.tau <= prev.tau:
        residual = 0.0
    else:
        residual = abs((energy - prev.energy) / (state.tau - prev.tau)
                       + prev.visc_power - prev.source_power)
    return DiagnosticsRecord(
        tau=state.tau,
        energy=energy,
        kappa_xr_integral=kappa_xr_integral(state, coeffs),
        dissipation_rate=basic_dissipation(state, coeffs),
        bd_entropy=bd_entropy(state, coeffs),
        bd_dissipation_rate=bd_dissipation(state, coeffs),
        weighted_density_norm=weighted_density_norm(state, coeffs, opts.xi),
        xr_constants=xr,
        lp_u=lp_u,
        lp_w=lp_w,
        rho_max=float(state.rho.max()),
        rho_min=float(state.rho.min()),
        v_integral=specific_volume_integral(state),
        phi_grad_l2=poisson.grad_phi_l2_squared(state, field, coeffs),
        visc_power=visc_power,
        source_power=source_power,
        energy_balance_residual=residual,
        max_velocity_gradient=max_velocity_gradient(state),
    )


def energy_balance_residual(prev: DiagnosticsRecord, next_: DiagnosticsRecord,
                            dt: float, sources: float | None = None) -> float:
    """|dE/dt + D - S| with D, S taken from the earlier record.

    Left-endpoint evaluation keeps the residual first order in dt, which is
    the contract the dt-halving check relies on.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    s = prev.source_power if sources is None else float(sources)
    return abs((next_.energy - prev.energy) / dt + prev.visc_power - s)


_LEDGER_TRACKED = (
    "energy", "bd_entropy", "weighted_density_norm", "phi_grad_l2",
    "dissipation_rate", "bd_dissipation_rate", "max_velocity_gradient",
)


@dataclass(frozen=True)
class EstimateLedger:
    """Running suprema of the monitored quantities; merge is an associative max."""

    r_t: float = -math.inf
    v_t: float = -math.inf
    suprema: dict = field(default_factory=dict)
    violations: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {"R_T": self.r_t, "V_T": self.v_t,
                "suprema": dict(sorted(self.suprema.items())),
                "violations": list(self.violations)}


def update_ledger(ledger: EstimateLedger, record: DiagnosticsRecord) -> EstimateLedger:
    sup = dict(ledger.suprema)
    flat = record.as_dict()
    for key in _LEDGER_TRACKED:
        sup[key] = max(sup.get(key, -math.inf), flat[key])
    for group in ("xr_constants", "lp_u", "lp_w"):
        for sub, val in flat[group].items():
            key = f"{group}.{sub}"
            sup[key] = max(sup.get(key, -math.inf), val)
    violations = ledger.violations
    bad = [k for k, v in _iter_scalars(flat) if not math.isfinite(v)]
    if bad:
        violations = violations + tuple(
            f"non-finite {k} at tau={record.tau:.6g}" for k in bad)
    return EstimateLedger(
        r_t=max(ledger.r_t, record.rho_max + 1.0),
        v_t=max(ledger.v_t, 1.0 / record.rho_min + 1.0),
        suprema=sup,
        violations=violations,
    )


def merge_ledgers(a: EstimateLedger, b: EstimateLedger) -> EstimateLedger:
    sup = dict(a.suprema)
    for k, v in b.suprema.items():
        sup[k] = max(sup.get(k, -math.inf), v)
    return EstimateLedger(max(a.r_t, b.r_t), max(a.v_t, b.v_t), sup,
                          a.violations + b.violations)


def _iter_scalars(obj: dict, prefix: str = ""):
    for k, v in obj.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _iter_scalars(v, f"{key}.")
        elif isinstance(v, (int, float)):
            yield key, float(v)


def flatten_record(record_dict: dict) -> dict:
    """Dotted-key view of a record used by the CSV projection and plotting."""
    return dict(_iter_scalars(record_dict))


def csv_projection(records: list[dict], headers: list[str]) -> str:
    """CSV text of the selected (dotted) fields, one row per record."""
    rows = [",".join(headers)]
    for rec in records:
        flat = flatten_record(rec)
        rows.append(",".join(repr(flat[h]) if h in flat else "" for h in headers))
    return "\n".join(rows) + "\n"
