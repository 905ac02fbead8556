"""Run configuration: TOML ingestion, validation, canonical serialization.

A run is described by four tables (params, initial, grid, stepper) plus a run
table for output controls.  Parsing either produces a fully validated
RunConfig or fails with an error naming the offending table and key.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .admissibility import ExponentPair
from .physics import Coefficients
from .solver import BlowupThresholds, StepperConfig
from .state import InitialDataError, InitialDataSpec


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    pair: ExponentPair
    rho_bar_override: float | None
    initial: InitialDataSpec
    cells: int
    stepper: StepperConfig
    record_every: int
    out_dir: str | None
    label: str
    allow_inadmissible: bool
    track_effective_velocity: bool
    xi: float
    lp_orders: tuple[int, ...]
    thresholds: BlowupThresholds

    def coefficients(self, rho_bar: float) -> Coefficients:
        if self.rho_bar_override is not None:
            rho_bar = self.rho_bar_override
        return Coefficients(self.pair.alpha, self.pair.gamma, self.pair.kappa,
                            self.pair.dim, rho_bar)


_SCHEMA = {
    "params": {"dim": int, "alpha": float, "gamma": float, "kappa": int,
               "rho_bar": float},
    "initial": {"kind": str, "amplitude": float, "center": float, "width": float,
                "floor": float, "coeffs": list, "file": str,
                "velocity_amplitude": float},
    "grid": {"cells": int},
    "stepper": {"scheme": str, "cfl_safety": float, "dt_min": float,
                "dt_max": float, "t_end": float, "viscous_theta": float},
    "run": {"record_every": int, "out_dir": str, "label": str,
            "allow_inadmissible": bool, "track_effective_velocity": bool,
            "xi": float, "lp_orders": list, "blowup_ceiling": float,
            "blowup_floor": float},
}

_REQUIRED = {"params": ("dim", "alpha", "gamma", "kappa"),
             "grid": ("cells",), "initial": ("kind",)}


def _coerce(section: str, key: str, value, want):
    if want is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, want) or (want is int and isinstance(value, bool)):
        raise ConfigError(f"[{section}] {key}: expected {want.__name__}, "
                          f"got {type(value).__name__} ({value!r})")
    return value


def _read_tables(raw: dict) -> dict:
    out: dict = {}
    for section, table in raw.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        if not isinstance(table, dict):
            raise ConfigError(f"[{section}] must be a table")
        out[section] = {}
        for key, value in table.items():
            if key not in _SCHEMA[section]:
                raise ConfigError(f"[{section}] unknown key {key!r}")
            out[section][key] = _coerce(section, key, value, _SCHEMA[section][key])
    for section, keys in _REQUIRED.items():
        for key in keys:
            if key not in out.get(section, {}):
                raise ConfigError(f"[{section}] missing required key {key!r}")
    return out


def config_from_dict(raw: dict) -> RunConfig:
    tables = _read_tables(raw)
    params = tables["params"]
    try:
        pair = ExponentPair(params["alpha"], params["gamma"], params["dim"],
                            params["kappa"])
    except ValueError as exc:
        raise ConfigError(f"[params] {exc}") from exc

    init_kw = {k: v for k, v in tables["initial"].items()}
    if "coeffs" in init_kw:
        init_kw["coeffs"] = tuple(float(c) for c in init_kw["coeffs"])
    try:
        initial = InitialDataSpec(**init_kw)
    except (InitialDataError, TypeError) as exc:
        raise ConfigError(f"[initial] {exc}") from exc

    step_kw = tables.get("stepper", {})
    try:
        stepper = StepperConfig(**step_kw)
    except ValueError as exc:
        raise ConfigError(f"[stepper] {exc}") from exc

    cells = tables["grid"]["cells"]
    if cells < 2:
        raise ConfigError("[grid] cells must be >= 2")

    run_tbl = tables.get("run", {})
    record_every = run_tbl.get("record_every", 1)
    if record_every < 1:
        raise ConfigError("[run] record_every must be >= 1")
    lp_orders = tuple(int(p) for p in run_tbl.get("lp_orders", [2, 4]))
    if any(p < 2 or p % 2 for p in lp_orders):
        raise ConfigError("[run] lp_orders must be even integers >= 2")
    xi = run_tbl.get("xi", 1e-2)
    if xi <= 0.0:
        raise ConfigError("[run] xi must be positive")
    thresholds = BlowupThresholds(run_tbl.get("blowup_ceiling", 1e8),
                                  run_tbl.get("blowup_floor", 1e-8))
    return RunConfig(
        pair=pair,
        rho_bar_override=params.get("rho_bar"),
        initial=initial,
        cells=cells,
        stepper=stepper,
        record_every=record_every,
        out_dir=run_tbl.get("out_dir"),
        label=run_tbl.get("label", "run"),
        allow_inadmissible=run_tbl.get("allow_inadmissible", False),
        track_effective_velocity=run_tbl.get("track_effective_velocity", True),
        xi=xi,
        lp_orders=lp_orders,
        thresholds=thresholds,
    )


def parse_config(text: str) -> RunConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error: {exc}") from exc
    return config_from_dict(raw)


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: no such config file")
    try:
        return parse_config(path.read_text())
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def canonical_toml(config: RunConfig) -> str:
    """Serialize in schema order; parsing the result reproduces the config."""
    init, st, th = config.initial, config.stepper, config.thresholds
    sections: list[tuple[str, list[tuple[str, object]]]] = [
        ("params", [("dim", config.pair.dim), ("alpha", config.pair.alpha),
                    ("gamma", config.pair.gamma), ("kappa", config.pair.kappa)]
         + ([("rho_bar", config.rho_bar_override)]
            if config.rho_bar_override is not None else [])),
        ("initial", [("kind", init.kind), ("amplitude", init.amplitude),
                     ("center", init.center), ("width", init.width),
                     ("floor", init.floor)]
         + ([("coeffs", list(init.coeffs))] if init.coeffs else [])
         + ([("file", init.file)] if init.file else [])
         + [("velocity_amplitude", init.velocity_amplitude)]),
        ("grid", [("cells", config.cells)]),
        ("stepper", [("scheme", st.scheme), ("cfl_safety", st.cfl_safety),
                     ("dt_min", st.dt_min), ("dt_max", st.dt_max),
                     ("t_end", st.t_end), ("viscous_theta", st.viscous_theta)]),
        ("run", [("record_every", config.record_every)]
         + ([("out_dir", config.out_dir)] if config.out_dir else [])
         + [("label", config.label),
            ("allow_inadmissible", config.allow_inadmissible),
            ("track_effective_velocity", config.track_effective_velocity),
            ("xi", config.xi), ("lp_orders", list(config.lp_orders)),
            ("blowup_ceiling", th.ceiling), ("blowup_floor", th.floor)]),
    ]
    chunks = []
    for name, entries in sections:
        chunks.append(f"[{name}]")
        chunks.extend(f"{key} = {_fmt(value)}" for key, value in entries)
        chunks.append("")
    return "\n".join(chunks)
