import io
import json
import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest

from lane_emden_exterior.cli import parse_axis, run
from lane_emden_exterior.params import ProblemParams, derive
from lane_emden_exterior.serialize import (
    SCHEMA_VERSION,
    document,
    dumps_json,
    profile_csv,
    read_csv,
    read_profile_csv,
)
from lane_emden_exterior.solver import solve_supercritical

BASE = ["--n", "3", "--theta", "0", "--ell", "0"]


def run_json(argv, tmp_path, name="out.json"):
    out = tmp_path / name
    code = run(argv + ["--out", str(out)])
    return code, (json.loads(out.read_text()) if out.exists() else None)


def test_classify(tmp_path):
    code, doc = run_json(["classify", *BASE, "--p", "6"], tmp_path)
    assert code == 0
    assert doc["regime"] == "ExistsUniqueRadial" and doc["p_s"] == 5.0
    assert doc["schema_version"] == SCHEMA_VERSION
    assert set(doc["derived"]) >= {"n_prime", "tau", "p_s", "sigma", "tau_prime", "p_s_prime", "gamma", "p_star", "m"}


def test_solve_report_keys(tmp_path):
    code, doc = run_json(["solve", *BASE, "--p", "6", "--rmax", "1e4"], tmp_path)
    assert code == 0
    assert {"beta_star", "lambda", "interior_zero", "decay_slope", "residual"} <= set(doc)


def test_solve_in_wrong_regime(tmp_path):
    assert run(["solve", *BASE, "--p", "4", "--out", str(tmp_path / "x")]) == 2


def test_verify_all_crossed(tmp_path):
    code, doc = run_json(["verify", *BASE, "--p", "5", "--betas", "0.1,1,10"], tmp_path)
    assert code == 0 and doc["all_crossed"] is True


def test_verify_wrong_regime(tmp_path):
    assert run(["verify", *BASE, "--p", "6", "--betas", "1"]) == 2


def test_sweep_csv(tmp_path):
    out = tmp_path / "regimes.csv"
    assert run(["sweep", *BASE, "--p", "1.5:7:0.5", "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert header[:4] == ["n", "theta", "ell", "p"] and "regime" in header and "p_s" in header
    assert [float(r[3]) for r in rows] == list(np.arange(1.5, 7.01, 0.5))
    regime = header.index("regime")
    assert rows[7][regime] == "NoPositiveSolution"  # p = 5 = p_s
    assert rows[8][regime] == "ExistsUniqueRadial"


def test_sweep_verify_jobs_keep_order(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["sweep", *BASE, "--p", "4,2,3", "--task", "verify", "--betas", "0.1,1"]
    assert run(argv + ["--jobs", "3", "--out", str(a)]) == 0
    assert run(argv + ["--jobs", "1", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert [r[3] for r in read_csv(a)[1]] == ["4", "2", "3"]


def test_criterion_command(tmp_path):
    code, doc = run_json(["criterion", *BASE, "--p", "3", "--log-exponent", "2", "--delta", "0.5"], tmp_path)
    assert code == 0 and doc["quadrature"]["converges"] is True
    code, doc = run_json(["criterion", *BASE, "--p", "4"], tmp_path)
    assert doc["closed_form"]["estimate"] == 1.0


def test_eigen_command(tmp_path):
    code, doc = run_json(["eigen", "--n", "5", "--ell", "-3", "--p", "1", "--mesh", "64"], tmp_path)
    assert code == 0 and doc["verdict"] == "NoSolution" and doc["lambda1"] > 0
    out = tmp_path / "ef.csv"
    assert run(["eigen", "--n", "3", "--p", "1", "--operator", "laplacian", "--format", "csv", "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert header == ["r", "value"] and len(rows) == 65


@pytest.mark.parametrize(
    "argv",
    [
        ["classify", "--n", "3", "--p", "abc"],
        ["classify", "--p", "6"],
        ["frobnicate"],
        ["sweep", *BASE, "--p", "7:1:0.5"],
        ["classify", "--n", "3", "--p", "-1"],
        ["classify", "--n", "3", "--p", "6", "--out", "/nonexistent-dir/x.json"],
    ],
)
def test_malformed_input_exit_one(argv, capsys):
    assert run(argv) == 1
    assert capsys.readouterr().err


def test_determinism(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["solve", *BASE, "--p", "6", "--rmax", "1e3", "--format", "csv"]
    assert run(argv + ["--out", str(a)]) == 0
    assert run(argv + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "lane_emden_exterior", "classify", *BASE, "--p", "5"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["regime"] == "NoPositiveSolution"


def test_range_syntax():
    assert parse_axis("1:2:0.25") == [1, Fraction(5, 4), Fraction(3, 2), Fraction(7, 4), 2]
    assert parse_axis("0:1:0.3") == [0, Fraction(3, 10), Fraction(3, 5), Fraction(9, 10)]
    assert parse_axis("1,2.5,1/3") == [1, Fraction(5, 2), Fraction(1, 3)]
    assert parse_axis("0:1e-1:1e-1") == [0, Fraction(1, 10)]


def test_profile_csv_round_trip_is_bit_exact():
    prof = solve_supercritical(ProblemParams(3, 0, 0, 6)).profile
    r, v, dv = read_profile_csv(io.StringIO(profile_csv(prof.grid, prof.values, prof.derivs)))
    assert np.array_equal(r, prof.grid) and np.array_equal(v, prof.values) and np.array_equal(dv, prof.derivs)


def test_json_round_trip_and_nonfinite():
    rng = np.random.default_rng(7)
    xs = list(rng.standard_normal(200) * 10.0 ** rng.integers(-300, 300, 200))
    doc = document("test", ProblemParams(3, 0, 0, 6), {"xs": xs, "big": float("inf")})
    back = json.loads(dumps_json(doc))
    assert back["xs"] == xs and back["big"] == "inf"
    assert back["derived"] == derive(ProblemParams(3, 0, 0, 6)).to_dict()
