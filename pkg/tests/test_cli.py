import numpy as np
import pytest

from detform.cli import main
from detform.config import ExperimentConfig, load_config, read_config_file
from detform.determining import PhiTable

SMALL = ["--set", "n_modes=32", "--set", "spin_up=0.5", "--set", "orbit_window=1.3",
         "--set", "s1=1.0", "--set", "s2=1.25", "--workers", "1"]


def test_presets():
    desk, paper = ExperimentConfig.preset("desk"), ExperimentConfig.preset("paper")
    assert (desk.n_modes, desk.dt, desk.mu) == (64, 2e-4, 50.0)
    assert (paper.n_modes, paper.dt, paper.mu) == (256, 5e-5, 150.0)
    with pytest.raises(ValueError):
        ExperimentConfig.preset("huge")


def test_override_marks_custom():
    cfg = load_config("paper", overrides={"n_modes": "64"})
    assert cfg.scale == "custom" and cfg.n_modes == 64
    assert load_config("paper", overrides={"theta_samples": "20"}).scale == "paper"


def test_config_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\nscale = desk\nmu = 25  # weaker nudging\ntau_end = none\n")
    assert read_config_file(p) == {"scale": "desk", "mu": "25", "tau_end": "none"}
    cfg = load_config(None, p, {"workers": 2})
    assert cfg.mu == 25.0 and cfg.tau_end is None and cfg.workers == 2 and cfg.scale == "custom"
    with pytest.raises(KeyError):
        load_config(None, p, {"bogus": 1})


def test_steady_check_exit_codes(tmp_path, capsys):
    args = ["steady-check", "--set", "n_modes=32", "--steps", "50", "--out", str(tmp_path)]
    assert main(args) == 0
    assert (tmp_path / "steady_check.txt").exists()
    assert main(args + ["--tol", "1e-300"]) == 1
    assert "INVARIANT VIOLATED" in capsys.readouterr().err


def test_missing_orbit_is_usage_error(tmp_path):
    assert main(["assimilate", "--out", str(tmp_path)]) == 2


def test_pipeline(tmp_path):
    out = ["--out", str(tmp_path)]
    assert main(["orbit", *SMALL, *out]) == 0
    assert (tmp_path / "orbit.snap").exists() and (tmp_path / "orbit.snap.meta").exists()
    assert main(["assimilate", *SMALL, *out, "--s-end", "0.5"]) == 0
    header = (tmp_path / "assimilation" / "nudging_diagnostics.csv").read_text().splitlines()[0]
    assert header == "s,misfit_h1,w_l2"
    assert main(["sample-phi", "collinear", *SMALL, *out, "--theta-samples", "9",
                 "--set", "refine_count=4"]) == 0
    table = PhiTable.from_csv(tmp_path / "collinear" / "phi_table.csv")
    assert table.limit() == pytest.approx(0.5, abs=1e-6)
    assert main(["run-param", "theta2", "--case", "collinear", *SMALL, *out]) == 0
    rows = (tmp_path / "collinear" / "theta2" / "param_path.csv").read_text().splitlines()
    assert rows[0] == "tau,value,variant" and rows[1].endswith(",theta_squared")
    fit = (tmp_path / "collinear" / "theta2" / "rate_fit.csv").read_text().splitlines()[1].split(",")
    assert float(fit[1]) == pytest.approx(-1.0, abs=0.1)
    assert main(["secant", *SMALL, *out]) == 0
    trace = np.loadtxt(tmp_path / "secant" / "secant_trace.csv", delimiter=",", skiprows=1, ndmin=2)
    assert trace[-1, 1] == pytest.approx(0.5, abs=1e-4)


def test_mismatched_orbit_rejected(tmp_path):
    out = ["--out", str(tmp_path)]
    assert main(["orbit", *SMALL, *out, "--set", "orbit_window=0.1"]) == 0
    assert main(["assimilate", *out, "--set", "n_modes=64"]) == 2
