"""Command-line surface: run, sweep, admissible, plot.

Exit codes: 0 success, 1 configuration/usage error, 2 blow-up during a run.
Sweeps fan out over a worker pool capped by the NSP_THREADS environment
variable; every run owns its output directory, so results do not depend on
scheduling order.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import admissibility as adm
from . import config as cfg
from . import diagnostics, solver
from .state import InitialDataError, MassGrid, make_initial


def _json_num(x):
    if x is None or isinstance(x, str):
        return x
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


def _execute_run(run_cfg: cfg.RunConfig, out_dir: Path) -> dict:
    """Shared body of `run` and one sweep cell; returns a summary dict."""
    grid = MassGrid(run_cfg.cells)
    initial, rho_bar = make_initial(run_cfg.initial, grid, run_cfg.pair.dim)
    coeffs = run_cfg.coefficients(rho_bar)
    violations = adm.validate_params(coeffs.as_pair())
    if violations and not run_cfg.allow_inadmissible:
        raise cfg.ConfigError(
            "inadmissible parameters: " + "; ".join(str(v) for v in violations)
            + " (set run.allow_inadmissible = true to force)")

    out_dir.mkdir(parents=True, exist_ok=True)
    diag_path = out_dir / "diagnostics.ndjson"
    opts = diagnostics.DiagnosticOptions(xi=run_cfg.xi, lp_orders=run_cfg.lp_orders)
    with open(diag_path, "w") as fh:
        def sink(record):
            fh.write(record.to_ndjson() + "\n")
            fh.flush()

        result = solver.run(
            initial, coeffs, run_cfg.stepper, sinks=[sink],
            thresholds=run_cfg.thresholds, diag=opts,
            record_every=run_cfg.record_every,
            track_w=run_cfg.track_effective_velocity,
            allow_inadmissible=run_cfg.allow_inadmissible)

    solver.save_checkpoint(out_dir / "final_state.chk", result.state)
    report = {
        "label": run_cfg.label,
        "blowup": result.report.as_dict(),
        "ledger": result.ledger.as_dict(),
        "admissibility": {
            "admissible": not violations,
            "violations": [str(v) for v in violations],
        },
        "w_consistency_l2": result.w_consistency_l2(coeffs),
        "records": result.records,
        "rho_bar": rho_bar if run_cfg.rho_bar_override is None
        else run_cfg.rho_bar_override,
    }
    (out_dir / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    return report


def cmd_run(args) -> int:
    try:
        run_cfg = cfg.load_config(args.config)
    except cfg.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    out_dir = Path(args.out or run_cfg.out_dir or f"runs/{run_cfg.label}")
    try:
        report = _execute_run(run_cfg, out_dir)
    except (cfg.ConfigError, InitialDataError, solver.ParamValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if report["blowup"]["triggered"]:
        print(f"blow-up: {report['blowup']}", file=sys.stderr)
        return 2
    print(f"completed: {out_dir}")
    return 0


def _parse_axis(text: str) -> tuple[str, list[float]]:
    try:
        name, spec = text.split("=", 1)
        lo, hi, n = spec.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise cfg.ConfigError(f"axis {text!r} must look like section.key=lo:hi:n")
    if n < 1:
        raise cfg.ConfigError(f"axis {text!r}: point count must be >= 1")
    if "." not in name:
        raise cfg.ConfigError(f"axis {text!r}: field must be dotted (e.g. params.alpha)")
    if n == 1:
        return name, [lo]
    stepw = (hi - lo) / (n - 1)
    return name, [lo + i * stepw for i in range(n)]


def _set_dotted(raw: dict, dotted: str, value) -> None:
    section, key = dotted.split(".", 1)
    raw.setdefault(section, {})[key] = value


def cmd_sweep(args) -> int:
    try:
        base_text = Path(args.config).read_text()
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        axes = [_parse_axis(a) for a in args.axis]
        if not 1 <= len(axes) <= 3:
            raise cfg.ConfigError("sweeps take between 1 and 3 --axis options")
        base_cfg = cfg.parse_config(base_text)  # validate the base config early
    except cfg.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    if sys.version_info >= (3, 11):
        import tomllib
    else:
        import tomli as tomllib
    raw0 = tomllib.loads(base_text)
    out_root = Path(args.out or base_cfg.out_dir or f"sweeps/{base_cfg.label}")
    out_root.mkdir(parents=True, exist_ok=True)

    names = [n for n, _ in axes]
    combos = list(itertools.product(*[vals for _, vals in axes]))

    def one(idx_combo):
        idx, combo = idx_combo
        raw = json.loads(json.dumps(raw0))  # deep copy
        for name, value in zip(names, combo):
            _set_dotted(raw, name, value)
        cell_dir = out_root / f"cell_{idx:04d}"
        row = {"cell": f"cell_{idx:04d}"}
        row.update({n: v for n, v in zip(names, combo)})
        try:
            run_cfg = cfg.config_from_dict(raw)
            report = _execute_run(run_cfg, cell_dir)
        except (cfg.ConfigError, InitialDataError, solver.ParamValidationError) as exc:
            row.update({"status": "config-error", "detail": str(exc)})
            return row, True
        blow = report["blowup"]
        row["status"] = blow["cause"] if blow["triggered"] else "completed"
        row["detail"] = "" if not blow["triggered"] else f"t={blow['time']:.6g}"
        row["admissible"] = report["admissibility"]["admissible"]
        row["R_T"] = report["ledger"]["R_T"]
        row["V_T"] = report["ledger"]["V_T"]
        return row, False

    workers = int(os.environ.get("NSP_THREADS", "0")) or min(8, os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(one, enumerate(combos)))

    headers = ["cell", *names, "status", "detail", "admissible", "R_T", "V_T"]
    lines = [",".join(headers)]
    for row, _ in results:
        lines.append(",".join(str(row.get(h, "")) for h in headers))
    (out_root / "sweep_summary.csv").write_text("\n".join(lines) + "\n")
    config_failed = any(failed for _, failed in results)
    print(f"sweep of {len(combos)} runs written to {out_root}")
    return 1 if config_failed else 0


def _admissible_report(alpha: float, gamma: float, dim: int, kappa: int,
                       resolution: int = 2048) -> dict:
    pair = adm.ExponentPair(alpha, gamma, dim, kappa)
    violations = adm.validate_params(pair)
    report: dict = {
        "alpha": alpha, "gamma": gamma, "dim": dim, "kappa": kappa,
        "admissible": not violations,
        "violations": [str(v) for v in violations],
    }
    try:
        report["n_threshold"] = _json_num(adm.n2(alpha) if dim == 2 else adm.n3(alpha))
    except ValueError as exc:
        report["n_threshold"] = None
        report["n_threshold_note"] = str(exc)

    try:
        sel = adm.select_k_2d(alpha) if dim == 2 else adm.select_k_3d(alpha, gamma)
    except (ValueError, adm.SearchExhaustedError) as exc:
        report["k_selection"] = {"error": str(exc)}
        return report
    report["k_selection"] = {
        "k": str(sel.k), "k_float": float(sel.k), "s": sel.s, "k_idx": sel.k_idx,
        "k0": sel.k0, "residuals": {name: r for name, r in sel.residuals},
    }
    kf = float(sel.k)
    if dim == 3:
        sig = adm.sigma_window(alpha, kf)
        chain = adm.sigma_window_for_gamma(alpha, kf, gamma)
        windows = {"sigma": _window_dict(sig), "sigma_for_gamma": _window_dict(chain)}
        if chain.satisfied:
            sigma = chain.witness
            windows["gamma"] = _window_dict(adm.gamma_window(alpha, kf, sigma))
            windows["beta"] = _window_dict(adm.beta_window(alpha, kf, sigma))
        report["windows"] = windows
    report["mdense_epsilon"] = adm.mdense_epsilon(sel.k_idx, sel.s, resolution)
    return report


def _window_dict(w: adm.ParamWindow) -> dict:
    return {"lo": w.lo, "hi": w.hi, "satisfied": w.satisfied, "witness": w.witness}


def cmd_admissible(args) -> int:
    report = _admissible_report(args.alpha, args.gamma, args.dim, args.kappa)
    print(json.dumps(report, indent=2))
    return 0


def cmd_plot(args) -> int:
    run_dir = Path(args.run_dir)
    diag_path = run_dir / "diagnostics.ndjson"
    if not diag_path.is_file():
        print(f"error: {diag_path} not found", file=sys.stderr)
        return 1
    records = [json.loads(line) for line in diag_path.read_text().splitlines() if line]
    if not records:
        print(f"error: {diag_path} is empty", file=sys.stderr)
        return 1
    flats = [diagnostics.flatten_record(r) for r in records]
    available = sorted(flats[0])
    fields = [f.strip() for f in args.fields.split(",") if f.strip()]
    if not fields:
        print("error: no fields requested", file=sys.stderr)
        return 1
    unknown = [f for f in fields if f not in flats[0]]
    if unknown:
        print(f"error: unknown field(s) {', '.join(unknown)}; available: "
              + ", ".join(available), file=sys.stderr)
        return 1

    taus = [f["tau"] for f in flats]
    series = {f: [flat[f] for flat in flats] for f in fields}
    stem = "plot_" + "_".join(f.replace(".", "-") for f in fields)
    csv_text = diagnostics.csv_projection(records, ["tau", *fields])
    (run_dir / f"{stem}.csv").write_text(csv_text)

    from . import plotting  # deferred: pulls in matplotlib
    svg = plotting.render_timeseries(taus, series, run_dir / f"{stem}.svg")
    written = [str(svg), str(run_dir / f"{stem}.csv")]
    if args.gnuplot:
        gp = plotting.gnuplot_script(f"{stem}.csv", fields, run_dir / f"{stem}.gp")
        written.append(str(gp))
    print("wrote " + ", ".join(written))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nsp",
        description="Radial compressible flow with self-consistent potential: "
                    "simulator, estimate monitor, and parameter-region tools.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one configured run")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="output directory (overrides run.out_dir)")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="Cartesian parameter sweep")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--axis", action="append", default=[],
                         metavar="section.key=lo:hi:n", required=True)
    p_sweep.add_argument("--out", help="sweep output root")
    p_sweep.set_defaults(func=cmd_sweep)

    p_adm = sub.add_parser("admissible", help="parameter-region report as JSON")
    p_adm.add_argument("--alpha", type=float, required=True)
    p_adm.add_argument("--gamma", type=float, required=True)
    p_adm.add_argument("--dim", type=int, default=3, choices=(2, 3))
    p_adm.add_argument("--kappa", type=int, default=-1, choices=(-1, 1))
    p_adm.set_defaults(func=cmd_admissible)

    p_plot = sub.add_parser("plot", help="render diagnostics time series to SVG")
    p_plot.add_argument("run_dir")
    p_plot.add_argument("--fields", required=True,
                        help="comma-separated record fields (dotted for nested)")
    p_plot.add_argument("--gnuplot", action="store_true",
                        help="also emit a gnuplot script")
    p_plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
