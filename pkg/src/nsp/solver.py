"""Time integration of the mass-coordinate system.

Two schemes: a two-stage strong-stability-preserving explicit update, and a
semi-implicit variant that treats the stiff viscous operator backward in time
through a tridiagonal solve.  The continuity equation is advanced in the
specific volume v = 1/rho, whose update is linear, so the volume integral
(equivalently the outer radius) is conserved to roundoff.  Radii are always
reconstructed from the density, never integrated.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import solve_banded

from . import diagnostics, physics
from .admissibility import validate_params
from .diagnostics import DiagnosticOptions, DiagnosticsRecord, EstimateLedger
from .physics import Coefficients
from .state import FluidState, radius_from_density

SCHEMES = ("explicit-ssp2", "semi-implicit-viscous")


class DtCollapseError(RuntimeError):
    pass


class StepBlowupError(RuntimeError):
    def __init__(self, cause: str, location: int, tau: float):
        super().__init__(f"{cause} at cell/node {location}, tau={tau:.6g}")
        self.cause = cause
        self.location = location
        self.tau = tau


class ParamValidationError(RuntimeError):
    pass


class SinkError(RuntimeError):
    pass


class CheckpointError(RuntimeError):
    pass


@dataclass(frozen=True)
class StepperConfig:
    scheme: str = "semi-implicit-viscous"
    cfl_safety: float = 0.8
    dt_min: float = 1e-12
    dt_max: float = 0.1
    t_end: float = 1.0
    viscous_theta: float = 1.0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not 0.0 < self.cfl_safety <= 1.0:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if self.dt_min > self.dt_max:
            raise ValueError("dt_min must not exceed dt_max")
        if self.t_end < 0.0:
            raise ValueError("t_end must be nonnegative")
        if not 0.5 <= self.viscous_theta <= 1.0:
            raise ValueError("viscous_theta must lie in [1/2, 1]")


@dataclass(frozen=True)
class BlowupThresholds:
    ceiling: float = 1e8
    floor: float = 1e-8


@dataclass(frozen=True)
class BlowupReport:
    triggered: bool = False
    cause: str | None = None
    time: float | None = None
    location: int | None = None

    def as_dict(self) -> dict:
        return {"triggered": self.triggered, "cause": self.cause,
                "time": self.time, "location": self.location}


@dataclass(frozen=True)
class Forcing:
    """Extra sources injected into the equations (manufactured-solution runs).

    rho(x_cells, tau) adds to d(rho)/dtau, u(x_nodes, tau) to du/dtau.
    """

    rho: object = None
    u: object = None

    def rho_at(self, x, tau):
        return 0.0 if self.rho is None else self.rho(x, tau)

    def u_at(self, x, tau):
        return 0.0 if self.u is None else self.u(x, tau)


def stable_dt(state: FluidState, coeffs: Coefficients, config: StepperConfig) -> float:
    """CFL bound: acoustic always, explicit viscous only for the explicit scheme."""
    dx = state.dx
    r_out = state.r[1:] ** (coeffs.dim - 1)
    acoustic = dx / (state.rho * r_out * coeffs.sound_speed(state.rho))
    bound = float(acoustic.min())
    if config.scheme == "explicit-ssp2":
        visc = dx * dx / (2.0 * coeffs.alpha * state.rho ** (1.0 + coeffs.alpha) * r_out ** 2)
        bound = min(bound, float(visc.min()))
    dt = config.cfl_safety * bound
    if dt < config.dt_min:
        raise DtCollapseError(
            f"stable step {dt:.3e} fell below dt_min {config.dt_min:.3e} at tau={state.tau:.6g}")
    return min(dt, config.dt_max)


def _check_finite(rho: np.ndarray, u: np.ndarray, tau: float) -> None:
    bad = ~np.isfinite(rho) | (rho <= 0.0)
    if np.any(bad):
        raise StepBlowupError("non-finite", int(np.argmax(bad)), tau)
    bad_u = ~np.isfinite(u)
    if np.any(bad_u):
        raise StepBlowupError("non-finite", int(np.argmax(bad_u)), tau)


def _forced_momentum(state: FluidState, coeffs: Coefficients, forcing: Forcing | None,
                     tau: float) -> np.ndarray:
    acc = physics.momentum_rhs(state, coeffs)
    if forcing is not None and forcing.u is not None:
        xn = state.x_nodes()
        extra = np.asarray(forcing.u_at(xn, tau), dtype=float)
        acc[1:-1] += extra[1:-1]
    return acc


def _vdot(state: FluidState, coeffs: Coefficients, forcing: Forcing | None,
          tau: float) -> np.ndarray:
    # v = 1/rho, v_tau = (r^{N-1}u)_x - F_rho / rho^2
    vdot = physics.velocity_divergence(state, coeffs.dim)
    if forcing is not None and forcing.rho is not None:
        xc = (np.arange(state.cells) + 0.5) * state.dx
        vdot = vdot - np.asarray(forcing.rho_at(xc, tau), dtype=float) / state.rho ** 2
    return vdot


def _euler_stage(state: FluidState, coeffs: Coefficients, dt: float,
                 forcing: Forcing | None) -> FluidState:
    v = 1.0 / state.rho + dt * _vdot(state, coeffs, forcing, state.tau)
    u = state.u + dt * _forced_momentum(state, coeffs, forcing, state.tau)
    u[0] = 0.0
    u[-1] = 0.0
    tau = state.tau + dt
    if np.any(v <= 0.0) or not np.all(np.isfinite(v)):
        bad = (~np.isfinite(v)) | (v <= 0.0)
        raise StepBlowupError("non-finite", int(np.argmax(bad)), tau)
    rho = 1.0 / v
    _check_finite(rho, u, tau)
    return FluidState(rho, u, radius_from_density(rho, coeffs.dim), tau)


def _step_ssp2(state: FluidState, coeffs: Coefficients, dt: float,
               forcing: Forcing | None) -> FluidState:
    stage1 = _euler_stage(state, coeffs, dt, forcing)
    stage2 = _euler_stage(stage1, coeffs, dt, forcing)
    v = 0.5 * (1.0 / state.rho + 1.0 / stage2.rho)
    u = 0.5 * (state.u + stage2.u)
    u[0] = 0.0
    u[-1] = 0.0
    tau = state.tau + dt
    if np.any(v <= 0.0) or not np.all(np.isfinite(v)):
        bad = (~np.isfinite(v)) | (v <= 0.0)
        raise StepBlowupError("non-finite", int(np.argmax(bad)), tau)
    rho = 1.0 / v
    _check_finite(rho, u, tau)
    return FluidState(rho, u, radius_from_density(rho, coeffs.dim), tau)


def _viscous_bands(state: FluidState, coeffs: Coefficients) -> tuple[np.ndarray, ...]:
    """Tridiagonal coefficients of the linear-in-u viscous operator at interior nodes."""
    dim, dx = coeffs.dim, state.dx
    rn1 = state.r ** (dim - 1)
    rc = coeffs.alpha * state.rho ** (1.0 + coeffs.alpha) / dx ** 2  # per cell
    mid = rn1[1:-1]
    lower = mid * rc[:-1] * rn1[:-2]      # couples u_{j-1}
    diag = -mid * (rc[1:] + rc[:-1]) * rn1[1:-1]
    upper = mid * rc[1:] * rn1[2:]        # couples u_{j+1}
    return lower, diag, upper


def _apply_tridiag(lower, diag, upper, u):
    return lower * u[:-2] + diag * u[1:-1] + upper * u[2:]


def _step_semi_implicit(state: FluidState, coeffs: Coefficients, dt: float,
                        config: StepperConfig, forcing: Forcing | None) -> FluidState:
    theta = config.viscous_theta
    terms = physics.momentum_terms(state, coeffs)
    explicit = terms["pressure"] + terms["cross"] + terms["source"]
    if forcing is not None and forcing.u is not None:
        xn = state.x_nodes()
        explicit = explicit + np.asarray(forcing.u_at(xn, state.tau + dt), dtype=float)
    lower, diag, upper = _viscous_bands(state, coeffs)

    n = state.cells - 1
    rhs = state.u[1:-1] + dt * explicit[1:-1]
    if theta < 1.0:
        rhs = rhs + dt * (1.0 - theta) * _apply_tridiag(lower, diag, upper, state.u)
    ab = np.zeros((3, n))
    ab[0, 1:] = -dt * theta * upper[:-1]
    ab[1, :] = 1.0 - dt * theta * diag
    ab[2, :-1] = -dt * theta * lower[1:]
    try:
        u_int = solve_banded((1, 1), ab, rhs)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - singular system
        raise RuntimeError(f"viscous tridiagonal solve failed: {exc}") from exc
    u = np.zeros_like(state.u)
    u[1:-1] = u_int

    tau = state.tau + dt
    shifted = FluidState(state.rho, u, state.r, state.tau)
    v = 1.0 / state.rho + dt * _vdot(shifted, coeffs, forcing, tau)
    if np.any(v <= 0.0) or not np.all(np.isfinite(v)):
        bad = (~np.isfinite(v)) | (v <= 0.0)
        raise StepBlowupError("non-finite", int(np.argmax(bad)), tau)
    rho = 1.0 / v
    _check_finite(rho, u, tau)
    return FluidState(rho, u, radius_from_density(rho, coeffs.dim), tau)


def step(state: FluidState, coeffs: Coefficients, dt: float, config: StepperConfig,
         forcing: Forcing | None = None) -> FluidState:
    """Advance the state by dt with boundary velocities re-pinned each stage."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if config.scheme == "explicit-ssp2":
        return _step_ssp2(state, coeffs, dt, forcing)
    return _step_semi_implicit(state, coeffs, dt, config, forcing)


def detect_blowup(state: FluidState, thresholds: BlowupThresholds = BlowupThresholds()) -> BlowupReport:
    """Density ceiling/floor and non-finite checks with the first offending index."""
    for arr in (state.rho, state.u, state.r):
        finite = np.isfinite(arr)
        if not finite.all():
            return BlowupReport(True, "non-finite", state.tau, int(np.argmax(~finite)))
    over = state.rho > thresholds.ceiling
    if over.any():
        return BlowupReport(True, "density-ceiling", state.tau, int(np.argmax(over)))
    under = state.rho < thresholds.floor
    if under.any():
        return BlowupReport(True, "vacuum-floor", state.tau, int(np.argmax(under)))
    return BlowupReport()


@dataclass
class RunResult:
    state: FluidState
    report: BlowupReport
    ledger: EstimateLedger
    records: int
    w_evolved: np.ndarray | None = None
    max_dt: float = 0.0

    def w_consistency_l2(self, coeffs: Coefficients) -> float | None:
        """L^2 mismatch between the evolved w and w computed from the final state."""
        if self.w_evolved is None:
            return None
        diff = physics.effective_velocity(self.state, coeffs) - self.w_evolved
        dbar = 0.5 * (diff[1:] + diff[:-1])
        return float(np.sqrt(np.sum(dbar ** 2) * self.state.dx))


def run(initial: FluidState, coeffs: Coefficients, config: StepperConfig,
        sinks=(), *, thresholds: BlowupThresholds = BlowupThresholds(),
        diag: DiagnosticOptions = DiagnosticOptions(), record_every: int = 1,
        forcing: Forcing | None = None, track_w: bool = False,
        allow_inadmissible: bool = False) -> RunResult:
    """March to t_end with adaptive steps, emitting records at the given cadence."""
    violations = validate_params(coeffs.as_pair())
    if violations and not allow_inadmissible:
        raise ParamValidationError("; ".join(str(v) for v in violations))

    state = initial.copy()
    ledger = EstimateLedger()
    record = diagnostics.compute_record(state, coeffs, diag)
    ledger = diagnostics.update_ledger(ledger, record)
    _emit(sinks, record)
    emitted = 1

    w_evolved = physics.effective_velocity(state, coeffs) if track_w else None
    report = BlowupReport()
    steps = 0
    max_dt = 0.0
    while state.tau < config.t_end and not report.triggered:
        try:
            dt = stable_dt(state, coeffs, config)
        except DtCollapseError:
            report = BlowupReport(True, "dt-collapse", state.tau, None)
            break
        dt = min(dt, config.t_end - state.tau)
        max_dt = max(max_dt, dt)
        try:
            new_state = step(state, coeffs, dt, config, forcing)
        except StepBlowupError as exc:
            report = BlowupReport(True, exc.cause, exc.tau, exc.location)
            break
        if track_w:
            w_evolved = w_evolved + 0.5 * dt * (physics.w_rhs(state, coeffs)
                                                + physics.w_rhs(new_state, coeffs))
        state = new_state
        steps += 1
        report = detect_blowup(state, thresholds)
        if steps % record_every == 0 or state.tau >= config.t_end or report.triggered:
            record = diagnostics.compute_record(state, coeffs, diag, prev=record)
            ledger = diagnostics.update_ledger(ledger, record)
            _emit(sinks, record)
            emitted += 1
    return RunResult(state, report, ledger, emitted, w_evolved, max_dt)


def _emit(sinks, record: DiagnosticsRecord) -> None:
    for sink in sinks:
        try:
            sink(record)
        except Exception as exc:
            raise SinkError(f"diagnostics sink failed: {exc}") from exc


_CHECKPOINT_MAGIC = "nsp-checkpoint"
_CHECKPOINT_VERSION = 1


def save_checkpoint(path, state: FluidState) -> None:
    """Text dump of (M, tau, rho[], u[]) at 17 significant digits."""
    lines = [f"{_CHECKPOINT_MAGIC} {_CHECKPOINT_VERSION}",
             f"M {state.cells}",
             f"tau {state.tau:.17g}",
             "rho"]
    lines += [f"{v:.17g}" for v in state.rho]
    lines.append("u")
    lines += [f"{v:.17g}" for v in state.u]
    Path(path).write_text("\n".join(lines) + "\n")


def load_checkpoint(path, dim: int) -> FluidState:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith(_CHECKPOINT_MAGIC):
        raise CheckpointError(f"{path}: not a checkpoint file")
    version = int(lines[0].split()[1])
    if version != _CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    cells = int(lines[1].split()[1])
    tau = float(lines[2].split()[1])
    if lines[3] != "rho":
        raise CheckpointError(f"{path}: malformed rho block")
    rho = np.array(lines[4:4 + cells], dtype=float)
    if lines[4 + cells] != "u":
        raise CheckpointError(f"{path}: malformed u block")
    u = np.array(lines[5 + cells:5 + cells + cells + 1], dtype=float)
    return FluidState(rho, u, radius_from_density(rho, dim), tau)
