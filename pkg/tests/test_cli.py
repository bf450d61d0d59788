import csv
import io
import subprocess
import sys
from pathlib import Path

import pytest

from fracheat.cli import EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, default_configs, main

REPO = Path(__file__).resolve().parents[1]
FORCED = REPO / "configs" / "forced_solve.cfg"

TIME_CFG = """
[problem]
s = 0.5
gamma = 0.5
[modes]
1 = 1.0
[discretization]
Y = inf
stepper = diagonal
[sweep]
kind = time
values = 8 16 32
[check]
column = err_IL2
slope_min = {lo}
"""


def write(tmp_path, text, name="c.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_missing_config_is_usage_error(tmp_path, capsys):
    missing = tmp_path / "absent.cfg"
    assert main(["solve", "--config", str(missing)]) == EXIT_USAGE
    assert str(missing) in capsys.readouterr().err


def test_config_required(capsys):
    assert main(["oracle"]) == EXIT_USAGE
    assert "--config" in capsys.readouterr().err


def test_bad_subcommand():
    assert main(["frobnicate"]) == EXIT_USAGE
    assert main([]) == EXIT_USAGE


def test_help_exits_cleanly():
    assert main(["--help"]) == EXIT_OK


def test_solve_writes_trajectory(tmp_path):
    out = tmp_path / "traj.csv"
    assert main(["solve", "--config", str(FORCED), "--out", str(out)]) == EXIT_OK
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 41
    assert float(rows[-1]["t"]) == pytest.approx(0.5)
    assert all(float(r["stability_lhs"]) <= float(r["stability_rhs"]) * (1 + 1e-10) for r in rows)


def test_solve_rejects_diagonal(tmp_path):
    path = write(tmp_path, TIME_CFG.format(lo=0.4))
    assert main(["solve", "--config", path]) == EXIT_USAGE


def test_sweep_time_columns(tmp_path):
    path = write(tmp_path, TIME_CFG.format(lo=0.4))
    out = tmp_path / "t.csv"
    assert main(["sweep-time", "--config", path, "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "K,tau,err_IL2,err_energy"
    assert lines[-2].startswith("slope,") and lines[-1].startswith("reference,")


def test_sweep_kind_mismatch(tmp_path):
    path = write(tmp_path, TIME_CFG.format(lo=0.4))
    assert main(["sweep-trunc", "--config", path]) == EXIT_USAGE


def test_check_reports_band_violation(tmp_path, capsys):
    path = write(tmp_path, TIME_CFG.format(lo=3.0))
    assert main(["check", "--config", path, "--out", str(tmp_path / "csv")]) == EXIT_VIOLATION
    assert capsys.readouterr().out.startswith("FAIL c")
    assert (tmp_path / "csv" / "c.csv").exists()


def test_oracle_output(capsys):
    assert main(["oracle", "--config", str(FORCED)]) == EXIT_OK
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["t", "x", "y", "v", "v_x", "v_y"]
    assert len(rows) == 1 + 2 * 5 * 3


def test_default_configs_shipped():
    names = [n for n, _ in default_configs()]
    assert {"stability", "time_gamma05", "time_gamma1", "space_s05", "trunc_s05"} <= set(names)


@pytest.mark.slow
def test_check_defaults_pass():
    proc = subprocess.run(
        [sys.executable, "-m", "fracheat.cli", "check"], capture_output=True, text=True, timeout=600
    )
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert all(line.startswith("ok") for line in proc.stdout.splitlines() if line and not line.startswith(" "))
