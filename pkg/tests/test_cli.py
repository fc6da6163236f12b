import csv
import json
import math

import numpy as np
import pytest

from gevnodal.cli import main
from gevnodal.fourier import SpectralField, read_snapshot, write_snapshot

SWEEP = ["--set", "J=16", "--set", "t_min=0.005", "--set", "t_max=0.3",
         "--set", "points_per_decade=5"]


def test_synth_and_solve(tmp_path):
    assert main(["synth", "--seed", "1", "--dim", "1", "--out", str(tmp_path / "c")]) == 0
    assert main(["solve", "--coeffs", str(tmp_path / "c"), "--J", "16", "--times", "0.05,0.1",
                 "--out", str(tmp_path / "run")]) == 0
    assert (tmp_path / "run" / "diagnostics.csv").exists()
    u, t = read_snapshot(tmp_path / "run" / "u_001.txt")
    assert t == pytest.approx(0.1) and u.J == 16


def test_solve_heat_matches_closed_form(tmp_path):
    assert main(["solve", "--u0", "sin3", "--J", "3", "--times", "0.1", "--dt", "0.01",
                 "--out", str(tmp_path)]) == 0
    u, _ = read_snapshot(tmp_path / "u_000.txt")
    assert abs(u.coeffs[0]) == pytest.approx(0.5 * math.exp(-0.9), rel=1e-12)


def test_measure_and_fit(tmp_path):
    paths = []
    for k, t in enumerate(np.geomspace(1e-3, 0.3, 6)):
        f = SpectralField.from_modes(1, 3, {3: -0.5j, -3: 0.5j})
        paths.append(str(tmp_path / f"u{k}.txt"))
        write_snapshot(paths[-1], f, float(t))
    out = tmp_path / "nodal.csv"
    assert main(["measure", *paths, "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert [float(r["value"]) for r in rows] == [6.0] * 6
    assert main(["fit", str(out), "--out", str(tmp_path / "fit.json")]) == 0
    fit = json.loads((tmp_path / "fit.json").read_text())
    assert abs(fit["a"]) < 1e-9


def test_measure_2d(tmp_path):
    f = SpectralField.from_modes(2, 1, {(1, 0): 0.5, (-1, 0): 0.5})
    write_snapshot(tmp_path / "u.txt", f, 0.1)
    assert main(["measure", str(tmp_path / "u.txt"), "--r", "1.0",
                 "--out", str(tmp_path / "n.csv")]) == 0
    row = next(csv.DictReader((tmp_path / "n.csv").open()))
    assert float(row["value"]) == pytest.approx(4 * math.pi, rel=5e-3)
    assert int(row["n_line_max"]) == 2


def test_certify(tmp_path):
    f = SpectralField.from_modes(1, 1, {1: -0.5j, -1: 0.5j})
    write_snapshot(tmp_path / "u.txt", f, 0.0)
    assert main(["certify", str(tmp_path / "u.txt"), "--p", "0", "--r", "0.125",
                 "--out", str(tmp_path / "c.csv")]) == 0
    row = next(csv.DictReader((tmp_path / "c.csv").open()))
    assert row["nstar"] == "2"


def test_bound(tmp_path):
    out = tmp_path / "b.json"
    assert main(["bound", "--q0", "10", "--M0", "1.5", "--M1", "2", "--Kv", "3", "--Kw", "2",
                 "--dim", "2", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["M_star_bisected"] is True


def test_sweep_and_fit(tmp_path):
    out = tmp_path / "sw"
    assert main(["sweep", *SWEEP, "--out", str(out)]) == 0
    for name in ("config.txt", "diagnostics.csv", "nodal.csv", "certificates.csv",
                 "bounds.json", "report.json"):
        assert (out / name).exists()
    assert main(["fit", str(out / "nodal.csv")]) == 0


def test_sweep_config_file(tmp_path):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("J=16\nt_min=0.01\nt_max=0.3\npoints_per_decade=5\nu0=sin3\n"
                   "coefficients=zero\n")
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rows = list(csv.DictReader((tmp_path / "o" / "nodal.csv").open()))
    assert all(float(r["value"]) == 6 for r in rows)


def test_verify_writes_report(tmp_path):
    out = tmp_path / "v.json"
    code = main(["verify", "--out", str(out)])
    rep = json.loads(out.read_text())
    assert code == (0 if rep["all_passed"] else 1)
    assert rep["items"]["heat_exactness"]["passed"]


def test_verify_detects_large_dt(tmp_path):
    out = tmp_path / "v.json"
    assert main(["verify", "--set", "dt=0.1", "--out", str(out)]) == 1
    assert not json.loads(out.read_text())["items"]["heat_exactness"]["passed"]


@pytest.mark.parametrize("argv", [
    ["sweep", "--set", "t_min=0.2", "--set", "t_max=0.1"],
    ["sweep", "--set", "bogus=1"],
    ["measure", "/nonexistent/u.txt"],
])
def test_errors_exit_2(tmp_path, argv):
    assert main(argv) == 2


def test_fit_too_few_points(tmp_path):
    p = tmp_path / "n.csv"
    p.write_text("t,value\n0.01,1\n0.1,2\n0.3,3\n")
    assert main(["fit", str(p)]) == 2
