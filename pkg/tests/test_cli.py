import subprocess
import sys

import pytest

from drmec.cli import main, read_solution
from drmec.scenario import dump_scenario

from conftest import lower_uav, make_cfg


def run(*argv):
    return main([str(a) for a in argv])


def test_solve_and_validate_roundtrip(tmp_path, defaults):
    out = tmp_path / "sol.csv"
    assert run("solve", "--scenario", "paper_defaults", "--method", "cvar", "--out", out, "--samples", 2000) == 0
    assert out.read_text().startswith("method,n_lower,t_max_s,")
    assert (tmp_path / "sol.per_uav.csv").exists()
    sol = read_solution(defaults, out)
    assert sum(sol.x) <= defaults.max_offload
    report = tmp_path / "val.csv"
    assert run("validate", "--scenario", "paper_defaults", "--solution", out, "--samples", 2000, "--out", report) == 0
    lines = report.read_text().splitlines()
    assert lines[0] == "constraint,kind,probability,samples,half_width,alpha,passed"
    assert len(lines) == 1 + 3 * 7
    assert all(line.endswith("True") for line in lines[1:])


def test_solve_to_stdout(capsys):
    assert run("solve", "--scenario", "paper_defaults", "--samples", 1000) == 0
    assert capsys.readouterr().out.count("\n") == 2


def test_oracle_check(tmp_path):
    out = tmp_path / "oracle.csv"
    assert run("oracle-check", "--scenario", "paper_defaults", "--out", out) == 0
    text = out.read_text()
    assert text.count(",ok") == 2


def test_sweep_command(tmp_path):
    out = tmp_path / "sweep.csv"
    code = run("sweep", "--kind", "tmax", "--values", "0.05,0.1", "--n-lower", "2", "--scenario", "paper_defaults",
               "--methods", "cvar,nonrobust", "--reps", 1, "--seed", 4, "--samples", 1000, "--out", out)
    assert code == 0
    assert len(out.read_text().splitlines()) == 1 + 4


def test_invalid_scenario_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("max_offload: [\n")
    assert run("solve", "--scenario", bad) == 2
    assert "invalid input" in capsys.readouterr().err


def test_infeasible_exit_code(tmp_path):
    path = tmp_path / "hard.yaml"
    dump_scenario(make_cfg([lower_uav(gain_err_var=10.0)], m=0), path)
    assert run("solve", "--scenario", path) == 3


def test_bad_flags_exit_code():
    with pytest.raises(SystemExit) as info:
        run("sweep", "--kind", "fleet", "--values", "a,b", "--scenario", "paper_defaults")
    assert info.value.code == 2
    assert run("sweep", "--kind", "fleet", "--values", "3,2", "--scenario", "paper_defaults") == 2
    assert run("sweep", "--kind", "fleet", "--values", "2.5", "--scenario", "paper_defaults") == 2


def test_validate_rejects_wrong_solution_file(tmp_path):
    junk = tmp_path / "junk.csv"
    junk.write_text("a,b\n1,2\n")
    assert run("validate", "--scenario", "paper_defaults", "--solution", junk) == 2


def test_console_script_entry(tmp_path):
    out = tmp_path / "s.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "drmec.cli", "solve", "--scenario", "paper_defaults", "--samples", "1000", "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
