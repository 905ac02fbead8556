"""End-to-end CLI behavior: configs, runs, sweeps, admissibility report, plots."""

import json
import os

import pytest

from nsp.cli import main
from nsp.config import ConfigError, canonical_toml, load_config, parse_config
from nsp.solver import load_checkpoint

STEADY = """
[params]
dim = 3
alpha = 0.9
gamma = 1.5
kappa = -1

[initial]
kind = "constant"
amplitude = 1.0

[grid]
cells = 64

[stepper]
scheme = "semi-implicit-viscous"
t_end = 0.05

[run]
record_every = 5
label = "steady"
"""

BUMP = """
[params]
dim = 3
alpha = 0.9
gamma = 1.5
kappa = -1

[initial]
kind = "gaussian-bump"
amplitude = 3.0
floor = 0.5
width = 0.15

[grid]
cells = 48

[stepper]
scheme = "semi-implicit-viscous"
t_end = 0.05

[run]
record_every = 5
label = "bump"
"""


@pytest.fixture
def steady_cfg(tmp_path):
    path = tmp_path / "steady.toml"
    path.write_text(STEADY)
    return path


@pytest.fixture
def bump_cfg(tmp_path):
    path = tmp_path / "bump.toml"
    path.write_text(BUMP)
    return path


class TestConfig:
    def test_round_trip(self, steady_cfg):
        cfg = load_config(steady_cfg)
        text = canonical_toml(cfg)
        again = parse_config(text)
        assert again == cfg

    def test_canonical_idempotent(self, steady_cfg):
        cfg = load_config(steady_cfg)
        once = canonical_toml(cfg)
        twice = canonical_toml(parse_config(once))
        assert once == twice

    def test_missing_required_key(self):
        with pytest.raises(ConfigError, match=r"\[grid\] missing required key"):
            parse_config("[params]\ndim = 3\nalpha = 0.9\ngamma = 1.5\nkappa = -1\n"
                         "[initial]\nkind = \"constant\"\n")

    def test_type_error_names_key(self):
        bad = STEADY.replace("cells = 64", 'cells = "lots"')
        with pytest.raises(ConfigError, match=r"\[grid\] cells"):
            parse_config(bad)

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="unknown section"):
            parse_config(STEADY + "\n[mystery]\nx = 1\n")

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config(STEADY + "\nturbo = true\n")

    def test_toml_syntax_error_reported(self):
        with pytest.raises(ConfigError, match="TOML"):
            parse_config("[params\ndim = 3")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="no such config"):
            load_config(tmp_path / "ghost.toml")


class TestRunCommand:
    def test_steady_run_exit_zero(self, steady_cfg, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["run", str(steady_cfg), "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["blowup"]["triggered"] is False
        assert report["ledger"]["R_T"] == pytest.approx(2.0, abs=1e-12)
        assert report["ledger"]["V_T"] == pytest.approx(2.0, abs=1e-12)
        lines = (out / "diagnostics.ndjson").read_text().splitlines()
        assert len(lines) == report["records"]
        assert json.loads(lines[0])["tau"] == 0.0
        back = load_checkpoint(out / "final_state.chk", 3)
        assert back.cells == 64

    def test_inadmissible_gamma_exit_one(self, tmp_path, capsys):
        cfg = tmp_path / "bad.toml"
        cfg.write_text(STEADY.replace("gamma = 1.5", "gamma = 0.9")
                       .replace("dim = 3", "dim = 2")
                       .replace("alpha = 0.9", "alpha = 1.0"))
        code = main(["run", str(cfg), "--out", str(tmp_path / "o")])
        assert code == 1
        err = capsys.readouterr().err
        assert "gamma > 1" in err

    def test_override_flag_allows_inadmissible(self, tmp_path):
        cfg = tmp_path / "forced.toml"
        cfg.write_text(STEADY.replace("record_every = 5",
                                      "record_every = 5\nallow_inadmissible = true")
                       .replace("alpha = 0.9", "alpha = 0.7"))
        assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 0

    def test_floor_violating_profile_exit_one(self, tmp_path, capsys):
        cfg = tmp_path / "vac.toml"
        cfg.write_text(BUMP.replace('kind = "gaussian-bump"', 'kind = "polynomial"')
                       .replace("amplitude = 3.0", "coeffs = [0.5, -1.0]"))
        code = main(["run", str(cfg), "--out", str(tmp_path / "o")])
        assert code == 1
        assert "floor" in capsys.readouterr().err

    def test_blowup_exit_two(self, bump_cfg, tmp_path, capsys):
        cfg = tmp_path / "blow.toml"
        cfg.write_text(BUMP.replace("record_every = 5",
                                    "record_every = 5\nblowup_ceiling = 2.0"))
        code = main(["run", str(cfg), "--out", str(tmp_path / "o")])
        assert code == 2
        report = json.loads((tmp_path / "o" / "report.json").read_text())
        assert report["blowup"]["cause"] == "density-ceiling"
        # partial diagnostics flushed before abnormal exit
        assert (tmp_path / "o" / "diagnostics.ndjson").stat().st_size > 0

    def test_config_error_exit_one(self, tmp_path, capsys):
        cfg = tmp_path / "broken.toml"
        cfg.write_text("[params]\ndim = 5\n")
        assert main(["run", str(cfg)]) == 1


class TestSweepCommand:
    def test_single_point_matches_run(self, steady_cfg, tmp_path):
        out_run = tmp_path / "single"
        assert main(["run", str(steady_cfg), "--out", str(out_run)]) == 0
        out_sweep = tmp_path / "sweep1"
        assert main(["sweep", str(steady_cfg), "--axis", "params.gamma=1.5:1.5:1",
                     "--out", str(out_sweep)]) == 0
        a = (out_run / "diagnostics.ndjson").read_bytes()
        b = (out_sweep / "cell_0000" / "diagnostics.ndjson").read_bytes()
        assert a == b

    def test_grid_marks_inadmissible_cells(self, steady_cfg, tmp_path):
        out = tmp_path / "sweep9"
        code = main(["sweep", str(steady_cfg),
                     "--axis", "params.alpha=0.80:0.95:3",
                     "--axis", "params.gamma=1.4:1.6:3",
                     "--out", str(out)])
        assert code == 1  # some cells fail at the config/validation stage
        rows = (out / "sweep_summary.csv").read_text().strip().splitlines()
        assert len(rows) == 10
        header = rows[0].split(",")
        assert header[:3] == ["cell", "params.alpha", "params.gamma"]
        statuses = [r.split(",")[3] for r in rows[1:]]
        assert "config-error" in statuses  # alpha = 0.8 is outside every regime
        assert "completed" in statuses

    def test_thread_count_invariance(self, steady_cfg, tmp_path):
        outs = {}
        for threads in ("1", "4"):
            out = tmp_path / f"sw_{threads}"
            os.environ["NSP_THREADS"] = threads
            try:
                assert main(["sweep", str(steady_cfg),
                             "--axis", "params.gamma=1.4:1.6:2",
                             "--out", str(out)]) == 0
            finally:
                del os.environ["NSP_THREADS"]
            outs[threads] = [(out / f"cell_000{i}" / "diagnostics.ndjson").read_bytes()
                             for i in range(2)]
        assert outs["1"] == outs["4"]

    def test_bad_axis_syntax(self, steady_cfg, tmp_path, capsys):
        assert main(["sweep", str(steady_cfg), "--axis", "alpha=0.9"]) == 1


class TestAdmissibleCommand:
    def run_json(self, capsys, *args):
        assert main(["admissible", *args]) == 0
        return json.loads(capsys.readouterr().out)

    def test_alpha_one_2d(self, capsys):
        rep = self.run_json(capsys, "--alpha", "1.0", "--gamma", "1.4", "--dim", "2",
                            "--kappa", "1")
        assert rep["admissible"] is True
        assert rep["n_threshold"] == "inf"

    def test_full_3d_report(self, capsys):
        rep = self.run_json(capsys, "--alpha", "0.9", "--gamma", "1.5", "--dim", "3",
                            "--kappa", "-1")
        assert rep["admissible"] is True
        assert rep["k_selection"]["k0"] == pytest.approx(5.0)
        assert all(r > 0 for r in rep["k_selection"]["residuals"].values())
        assert rep["windows"]["sigma"]["satisfied"] is True
        assert rep["windows"]["sigma_for_gamma"]["satisfied"] is True
        assert rep["windows"]["gamma"]["satisfied"] is True
        assert rep["windows"]["beta"]["satisfied"] is True
        assert rep["mdense_epsilon"] > 0.0

    def test_inadmissible_alpha(self, capsys):
        rep = self.run_json(capsys, "--alpha", "0.55", "--gamma", "1.5", "--dim", "3")
        assert rep["admissible"] is False
        assert any("5/6" in v for v in rep["violations"])


class TestPlotCommand:
    def _completed_run(self, steady_cfg, tmp_path):
        out = tmp_path / "plotrun"
        assert main(["run", str(steady_cfg), "--out", str(out)]) == 0
        return out

    def test_single_field_svg(self, steady_cfg, tmp_path):
        out = self._completed_run(steady_cfg, tmp_path)
        assert main(["plot", str(out), "--fields", "energy"]) == 0
        svg = out / "plot_energy.svg"
        assert svg.is_file() and b"<svg" in svg.read_bytes()
        assert (out / "plot_energy.csv").is_file()

    def test_two_series_and_gnuplot(self, steady_cfg, tmp_path):
        out = self._completed_run(steady_cfg, tmp_path)
        assert main(["plot", str(out), "--fields", "rho_max,rho_min",
                     "--gnuplot"]) == 0
        assert (out / "plot_rho_max_rho_min.svg").is_file()
        gp = out / "plot_rho_max_rho_min.gp"
        assert gp.is_file() and "plot" in gp.read_text()
        csv = (out / "plot_rho_max_rho_min.csv").read_text().splitlines()
        assert csv[0] == "tau,rho_max,rho_min"

    def test_nested_field(self, steady_cfg, tmp_path):
        out = self._completed_run(steady_cfg, tmp_path)
        assert main(["plot", str(out), "--fields", "lp_u.2"]) == 0
        assert (out / "plot_lp_u-2.svg").is_file()

    def test_unknown_field_lists_available(self, steady_cfg, tmp_path, capsys):
        out = self._completed_run(steady_cfg, tmp_path)
        assert main(["plot", str(out), "--fields", "entropy_flux"]) == 1
        err = capsys.readouterr().err
        assert "unknown field" in err and "energy" in err

    def test_empty_diagnostics(self, tmp_path, capsys):
        out = tmp_path / "empty"
        out.mkdir()
        (out / "diagnostics.ndjson").write_text("")
        assert main(["plot", str(out), "--fields", "energy"]) == 1

    def test_missing_directory(self, tmp_path):
        assert main(["plot", str(tmp_path / "nowhere"), "--fields", "energy"]) == 1
