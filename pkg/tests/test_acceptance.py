"""Acceptance suite: every criterion at its stated tolerance.

Each test prints one `[criterion N] PASS/FAIL` line (run with `pytest -s` to
see them live).  The expensive runs are shared through module-scoped fixtures.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from nsp import admissibility as adm
from nsp.cli import main as cli_main
from nsp.diagnostics import DiagnosticOptions, compute_record, energy_balance_residual
from nsp.physics import Coefficients, source_term
from nsp.poisson import solve_phi
from nsp.solver import StepperConfig, run, stable_dt, step
from nsp.state import (FluidState, InitialDataSpec, MassGrid, make_initial,
                       radius_from_density, specific_volume_integral)

from mms_case import build_case, initial_state, l2_errors
from radial_oracles import QuadraticBallProfile

RESULTS = []


def report(criterion, ok, detail):
    line = f"[criterion {criterion}] {'PASS' if ok else 'FAIL'} - {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def bump_spec(amplitude=5.0):
    return InitialDataSpec(kind="gaussian-bump", amplitude=amplitude,
                           floor=0.5, width=0.15)


# (name, dim, alpha, gamma, kappa) spanning the four global-existence regimes
ADMISSIBLE_TUPLES = [
    ("3d-plasma", 3, 0.9, 1.5, -1),
    ("3d-star", 3, 0.88, 1.45, 1),
    ("2d-star", 2, 0.75, 1.4, 1),
    ("2d-alpha1", 2, 1.0, 1.2, -1),
    ("3d-alpha1", 3, 1.0, 5.0 / 3.0, 1),
]


@pytest.fixture(scope="module")
def steady_runs():
    out = []
    t0 = time.time()
    for dim in (2, 3):
        for kappa in (-1, 1):
            st, rho_bar = make_initial(InitialDataSpec(kind="constant", amplitude=1.0),
                                       MassGrid(256), dim)
            co = Coefficients(0.9, 1.5, kappa, dim, rho_bar)
            cfg = StepperConfig(scheme="semi-implicit-viscous", t_end=math.inf,
                                dt_max=0.05)
            v0 = specific_volume_integral(st)
            s = st
            dt = stable_dt(s, co, cfg)
            for _ in range(1000):
                s = step(s, co, dt, cfg)
            out.append({"dim": dim, "kappa": kappa, "rho_bar": rho_bar,
                        "state": s, "v0": v0, "v1": specific_volume_integral(s)})
    return {"runs": out, "elapsed": time.time() - t0}


@pytest.fixture(scope="module")
def admissible_runs():
    out = []
    t0 = time.time()
    for name, dim, alpha, gamma, kappa in ADMISSIBLE_TUPLES:
        st, rho_bar = make_initial(bump_spec(), MassGrid(128), dim)
        co = Coefficients(alpha, gamma, kappa, dim, rho_bar)
        v0 = specific_volume_integral(st)
        res = run(st, co, StepperConfig(scheme="semi-implicit-viscous", t_end=1.0),
                  record_every=1, track_w=True)
        out.append({"name": name, "coeffs": co, "result": res, "dx": st.dx,
                    "v0": v0, "v1": specific_volume_integral(res.state)})
    return {"runs": out, "elapsed": time.time() - t0}


def test_criterion_1_steady_state_exactness(steady_runs):
    worst_u = max(np.abs(r["state"].u).max() for r in steady_runs["runs"])
    worst_rho = max(np.abs(r["state"].rho - r["rho_bar"]).max()
                    for r in steady_runs["runs"])
    elapsed = steady_runs["elapsed"]
    ok = worst_u <= 1e-12 and worst_rho <= 1e-12 and elapsed < 5.0
    report(1, ok, f"max|u|={worst_u:.2e}, max|rho-rho_bar|={worst_rho:.2e}, "
                  f"4x1000 steps in {elapsed:.2f}s")


def test_criterion_2_specific_volume_conservation(steady_runs, admissible_runs):
    drifts = []
    for r in steady_runs["runs"]:
        drifts.append(abs(r["v1"] - r["v0"]) / r["v0"])
    for r in admissible_runs["runs"]:
        drifts.append(abs(r["v1"] - r["v0"]) / r["v0"])
    worst = max(drifts)
    report(2, worst <= 1e-10,
           f"worst relative drift {worst:.2e} over {len(drifts)} completed runs")


def test_criterion_3_manufactured_convergence():
    t0 = time.time()
    co = Coefficients(0.9, 1.5, -1, 3, rho_bar=1.0)
    case = build_case(co)
    cells = (64, 128, 256, 512)
    errs = []
    for m in cells:
        st = initial_state(case, m)
        cfg = StepperConfig(scheme="explicit-ssp2", cfl_safety=0.9, t_end=0.01)
        res = run(st, co, cfg, record_every=10 ** 9, forcing=case.forcing,
                  diag=DiagnosticOptions(compat_tol=1.0))
        errs.append(l2_errors(case, res.state))
    elapsed = time.time() - t0
    logm = np.log2(np.asarray(cells, dtype=float))
    order_rho = -np.polyfit(logm, np.log2([e[0] for e in errs]), 1)[0]
    order_u = -np.polyfit(logm, np.log2([e[1] for e in errs]), 1)[0]
    ok = 1.8 <= order_rho <= 2.2 and 1.8 <= order_u <= 2.2 and elapsed < 120.0
    report(3, ok, f"L2 orders rho={order_rho:.3f}, u={order_u:.3f} "
                  f"across M=64..512 in {elapsed:.1f}s")


def test_criterion_4_poisson_oracle():
    prof = QuadraticBallProfile(eps=0.05)
    st = prof.state(1024)
    worst = 0.0
    for kappa in (-1, 1):
        co = Coefficients(0.9, 1.5, kappa, 3, rho_bar=1.0)
        field = solve_phi(st, co)
        worst = max(worst, float(np.abs(field.phi_r - prof.phi_r(st.r, kappa)).max()))
    report(4, worst <= 1e-8, f"max |phi_r - analytic| = {worst:.2e} at M=1024")


def test_criterion_5_source_potential_identity():
    rng = np.random.default_rng(123)
    worst = 0.0
    for dim in (2, 3):
        for kappa in (-1, 1):
            rho = 0.3 + 3.0 * rng.random(97)
            st = FluidState(rho, np.zeros(98), radius_from_density(rho, dim))
            co = Coefficients(0.9, 1.5, kappa, dim,
                              rho_bar=1.0 / np.sum(st.dx / rho))
            gap = np.abs(source_term(st, co) + solve_phi(st, co).phi_r).max()
            worst = max(worst, float(gap))
    report(5, worst <= 1e-14, f"max |source + phi_r| = {worst:.2e} "
                              "(the source is -phi_r for both signs of kappa)")


def test_criterion_6_energy_balance_dt_halving():
    spec = bump_spec()
    st, rho_bar = make_initial(spec, MassGrid(128), 3)
    co = Coefficients(0.9, 1.5, -1, 3, rho_bar)
    warm = run(st, co, StepperConfig(scheme="explicit-ssp2", t_end=0.01),
               record_every=10 ** 9).state
    cfg = StepperConfig(scheme="explicit-ssp2")
    dt = 0.5 * stable_dt(warm, co, cfg)
    prev = compute_record(warm, co)
    residuals = {}
    for h in (dt, dt / 2):
        nxt = compute_record(step(warm, co, h, cfg), co)
        residuals[h] = energy_balance_residual(prev, nxt, h)
    ratio = residuals[dt] / residuals[dt / 2]
    report(6, 1.7 <= ratio <= 2.3,
           f"residual ratio {ratio:.3f} when dt halves "
           f"({residuals[dt]:.3e} -> {residuals[dt / 2]:.3e})")


def test_criterion_7_no_blowup_across_regimes(admissible_runs):
    details = []
    ok = admissible_runs["elapsed"] < 600.0
    for r in admissible_runs["runs"]:
        res, dx = r["result"], r["dx"]
        finite_ledger = (math.isfinite(res.ledger.r_t) and math.isfinite(res.ledger.v_t)
                         and all(math.isfinite(v) for v in res.ledger.suprema.values())
                         and not res.ledger.violations)
        w_gap = res.w_consistency_l2(r["coeffs"])
        w_tol = 10.0 * (dx ** 2 + res.max_dt)
        run_ok = (not res.report.triggered
                  and res.state.rho.min() > 0.0
                  and math.isfinite(res.state.rho.max())
                  and finite_ledger
                  and w_gap <= w_tol)
        ok = ok and run_ok
        details.append(f"{r['name']}: rho in [{res.state.rho.min():.3f}, "
                       f"{res.state.rho.max():.3f}], w-gap {w_gap:.2e} (tol {w_tol:.2e})")
    report(7, ok, f"{len(details)} regimes to t=1 in "
                  f"{admissible_runs['elapsed']:.1f}s; " + "; ".join(details))


def test_criterion_8_admissibility_suite():
    t0 = time.time()
    # brute-force agreement on (1, 10] with denominator <= 99
    steps = set()
    for k in range(101):
        for s in range(1, 1001):
            steps.add(Fraction(s, 2 * k + 1))
    mismatches = 0
    for den in range(1, 100):
        for num in range(den + 1, 10 * den + 1):
            q = Fraction(num, den)
            if q.denominator != den:
                continue
            if adm.a_set_contains(q) != ((q - 1) in steps):
                mismatches += 1
    # inverse round-trips
    worst_rt = 0.0
    for a in np.linspace(0.51, 0.999, 1000):
        worst_rt = max(worst_rt, abs(adm.alpha2_minus(adm.n2(a)) - a))
    for a in np.linspace(0.67, 0.999, 1000):
        worst_rt = max(worst_rt, abs(adm.alpha3_minus(adm.n3(a)) - a))
    # selections carry positive residuals
    selections_ok = True
    for a in np.linspace(0.52, 0.99, 40):
        sel = adm.select_k_2d(float(a))
        selections_ok &= all(r > 0 for _, r in sel.residuals)
    for a in np.linspace(0.87, 0.97, 10):
        g = 0.5 * (4.0 / 3.0 + (4 * a - 1 - a * a))
        sel = adm.select_k_3d(float(a), float(g))
        selections_ok &= all(r > 0 for _, r in sel.residuals)
    # auxiliary gap and the power-inequality constant
    gap_ok = all(adm.selection_gap(float(a)) > 0 for a in 1.0 + np.logspace(-6, 4, 300))
    eps_ok = all(adm.mdense_epsilon(k, s, resolution=1000) > 0
                 for k in range(6) for s in range(1, 6))
    elapsed = time.time() - t0
    ok = (mismatches == 0 and worst_rt <= 1e-12 and selections_ok
          and gap_ok and eps_ok and elapsed < 10.0)
    report(8, ok, f"brute-force mismatches={mismatches}, round-trip worst "
                  f"{worst_rt:.2e}, selections/gap/epsilon all positive, {elapsed:.1f}s")


CRIT9_CONFIG = """
[params]
dim = 3
alpha = 0.9
gamma = 1.5
kappa = -1

[initial]
kind = "gaussian-bump"
amplitude = 5.0
floor = 0.5
width = 0.15

[grid]
cells = 128

[stepper]
scheme = "semi-implicit-viscous"
t_end = 1.0

[run]
record_every = 1
label = "determinism"
"""


def test_criterion_9_determinism(tmp_path):
    cfg = tmp_path / "det.toml"
    cfg.write_text(CRIT9_CONFIG)
    blobs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        assert cli_main(["run", str(cfg), "--out", str(out)]) == 0
        blobs.append((out / "diagnostics.ndjson").read_bytes())
    identical = blobs[0] == blobs[1]
    report(9, identical, f"two executions produced byte-identical diagnostics "
                         f"({len(blobs[0])} bytes)")
