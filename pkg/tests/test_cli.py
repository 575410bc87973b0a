import subprocess
import sys

import numpy as np
import pytest

from ccfunnel import read_csv
from ccfunnel.cli import main
from ccfunnel.scenario import bundled_text

from conftest import DATA


@pytest.fixture(scope="module")
def paper_runs(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs")
    status = main(["run", "paper_kc3", "paper_kc03", "--out", str(out), "--jobs", "2"])
    return status, out


def test_run_writes_trace_report_and_plot_data(paper_runs):
    status, out = paper_runs
    assert status == 0
    for name in ("paper_kc3", "paper_kc03"):
        d = out / name
        for f in ("trace.csv", "report.txt", "funnel_1.csv", "funnel_2.csv", "phi_1.csv",
                  "phi_2.csv", "plane.csv"):
            assert (d / f).is_file(), f
        report = (d / "report.txt").read_text()
        assert report.startswith(f"scenario: {name}\ntrace check: PASS")
        assert "PASS hard_margin margin=" in report


def test_plot_data_columns(paper_runs):
    _, out = paper_runs
    trace = read_csv(out / "paper_kc3" / "trace.csv")
    funnel = np.genfromtxt(out / "paper_kc3" / "funnel_2.csv", delimiter=",", names=True)
    assert funnel.dtype.names == ("t", "x_2", "rhoL_2", "rhoU_2", "softL_2", "softU_2",
                                  "hardL_2", "hardU_2")
    assert np.array_equal(funnel["x_2"], trace.x[:, 1])
    plane = np.genfromtxt(out / "paper_kc3" / "plane.csv", delimiter=",", names=True)
    assert plane["xd_1"][0] == pytest.approx(-1.5 + 5.8 * np.cos(1.5), abs=1e-12)
    phi = np.genfromtxt(out / "paper_kc3" / "phi_1.csv", delimiter=",", names=True)
    assert np.array_equal(phi["phiU_1"], trace.phi_upper[:, 0])


def test_smaller_recovery_gain_gives_larger_modification(paper_runs):
    _, out = paper_runs
    fast = read_csv(out / "paper_kc3" / "trace.csv")
    slow = read_csv(out / "paper_kc03" / "trace.csv")
    assert slow.phi_upper.max() > fast.phi_upper.max()


def test_single_run_writes_into_out_dir(tmp_path, capsys):
    assert main(["run", "paper_kc3", "--set", "sim.t_end=1.0", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "trace.csv").is_file()
    assert "trace check: PASS (1001 rows)" in capsys.readouterr().out


def test_run_rejects_initial_state_outside_funnel(tmp_path, capsys):
    status = main(["run", "paper_kc3", "--set", "initial.position=[3.5, 1.7]", "--out", str(tmp_path)])
    assert status == 1
    err = capsys.readouterr().err
    assert "initial compatibility violated" in err
    assert not (tmp_path / "trace.csv").exists()


def test_run_reports_fault_and_fails(tmp_path, capsys):
    status = main(["run", "paper_kc3", "--set", "controller.k_v=3000", "--set", "sim.h=0.01",
                   "--out", str(tmp_path)])
    assert status == 1
    captured = capsys.readouterr()
    assert "FAIL no_faults" in captured.out and "fault:" in captured.err
    assert read_csv(tmp_path / "trace.csv").faults


# -- check -----------------------------------------------------------------

def test_check_valid_trace(paper_runs, capsys):
    _, out = paper_runs
    assert main(["check", str(out / "paper_kc3" / "trace.csv"), "paper_kc3"]) == 0
    assert "trace check: PASS" in capsys.readouterr().out


def test_check_truncated_trace_is_schema_error(paper_runs, tmp_path, capsys):
    _, out = paper_runs
    lines = (out / "paper_kc3" / "trace.csv").read_text().splitlines(keepends=True)
    short = tmp_path / "short.csv"
    short.write_text("".join(lines[:5000]))
    assert main(["check", str(short), "paper_kc3"]) == 2
    assert "truncated" in capsys.readouterr().err
    torn = tmp_path / "torn.csv"
    torn.write_text("".join(lines[:5000]) + lines[5000][:40])
    assert main(["check", str(torn), "paper_kc3"]) == 2


def test_check_fault_injected_trace(paper_runs, tmp_path, capsys):
    _, out = paper_runs
    trace = read_csv(out / "paper_kc3" / "trace.csv")
    row = 20000
    trace.series["x"][row, 0] = trace.rho_lower[row, 0] - 0.05
    bad = tmp_path / "bad.csv"
    trace.to_csv(bad)
    assert main(["check", str(bad), "paper_kc3"]) == 1
    err = capsys.readouterr().err
    assert f"violated: funnel_membership at row {row + 1}" in err


def test_check_dimension_mismatch(paper_runs, capsys):
    _, out = paper_runs
    assert main(["check", str(out / "paper_kc3" / "trace.csv"), str(DATA / "recovery_probe.scn")]) == 2
    assert "2 outputs, scenario has 1" in capsys.readouterr().err


def test_check_missing_trace(tmp_path):
    assert main(["check", str(tmp_path / "none.csv"), "paper_kc3"]) == 2


# -- validate --------------------------------------------------------------

def test_validate_bundled(capsys):
    assert main(["validate", "paper_kc3"]) == 0
    assert "paper_kc3: valid" in capsys.readouterr().out


def test_validate_narrow_hard_band(capsys):
    assert main(["validate", "paper_kc3", "--set",
                 "outputs.1.hard_upper=sinusoid { amp = 6.6, omega = 0.3, offset = 0.0 }"]) == 1
    err = capsys.readouterr().err
    assert "band-width feasibility violated" in err and "at t = " in err


def test_validate_disjoint_soft_band(capsys):
    assert main(["validate", "paper_kc3", "--set", "outputs.2.reference=constant { value = -30 }"]) == 1
    assert "initial compatibility violated" in capsys.readouterr().err


def test_validate_parse_error(tmp_path, capsys):
    path = tmp_path / "bad.scn"
    path.write_text(bundled_text("paper_kc3").replace("mu = 0.01", "mu = = 0.01"))
    assert main(["validate", str(path)]) == 2
    assert f"{path}:" in capsys.readouterr().err


def test_validate_missing_file(tmp_path):
    assert main(["validate", str(tmp_path / "missing.scn")]) == 2


def test_bad_override_value_fails(capsys):
    assert main(["validate", "paper_kc3", "--set", "planner.nu=0"]) == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ccfunnel", "validate", "paper_kc03"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "paper_kc03: valid" in proc.stdout
