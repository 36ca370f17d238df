import csv
import io
import json
import math

import numpy as np
import pytest

from magspec import cli
from magspec.eigensolve import read_eigenvectors


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--no-timestamp")
    return code, json.loads(out)


def test_spectrum_circle(capsys):
    code, d = run_json(capsys, "spectrum", "--model", "circle", "--L", "6.283185307", "--n", "512",
                       "--A", "0.5", "--k", "6")
    assert code == 0
    np.testing.assert_allclose(d["result"]["eigenvalues"], [0.25, 0.25, 2.25, 2.25, 6.25, 6.25], atol=1e-3)
    assert d["result"]["degenerate_groups"][:3] == [[1, 2], [3, 4], [5, 6]]
    assert d["config"]["A"] == 0.5 and d["config"]["command"] == "spectrum"
    assert "timestamp" not in d


def test_spectrum_torus_and_sphere(capsys):
    code, d = run_json(capsys, "spectrum", "--model", "torus", "--n1", "16", "--n2", "16",
                       "--A", "0", "--B", "0", "--k", "1")
    assert code == 0 and abs(d["result"]["eigenvalues"][0]) < 1e-9
    code, d = run_json(capsys, "spectrum", "--model", "sphere", "--sub", "3", "--s", "0", "--k", "4")
    lam = d["result"]["eigenvalues"]
    assert abs(lam[0]) < 1e-9 and np.allclose(lam[1:], 2.0, rtol=0.01)


def test_timestamp_present_by_default(capsys):
    code, out, _ = run(capsys, "spectrum", "--n", "64", "--k", "1")
    assert "timestamp" in json.loads(out)


def test_byte_identical(capsys):
    a = run(capsys, "cheeger", "--model", "torus", "--n1", "12", "--n2", "12", "--A", "0.3", "--B", "0.4",
            "--ks", "1,2", "--no-timestamp")[1]
    b = run(capsys, "cheeger", "--model", "torus", "--n1", "12", "--n2", "12", "--A", "0.3", "--B", "0.4",
            "--ks", "1,2", "--no-timestamp")[1]
    assert a == b


def test_spectrum_csv(capsys):
    code, out, _ = run(capsys, "spectrum", "--n", "64", "--k", "3", "--format", "csv", "--no-timestamp")
    lines = out.splitlines()
    assert any(line == "# n = 64" for line in lines)
    rows = list(csv.reader([x for x in lines if not x.startswith("#")]))
    assert rows[0] == ["index", "eigenvalue", "residual"] and len(rows) == 4


def test_cheeger_circle(capsys):
    code, d = run_json(capsys, "cheeger", "--A", "0.25", "--n", "256")
    rep = d["result"]["reports"][0]
    assert code == 0 and rep["value"] == pytest.approx(0.25, rel=0.03)
    assert rep["directionality"] == "upper-bound-on-h_k"


def test_cheeger_trivial_full_set(capsys):
    code, d = run_json(capsys, "cheeger", "--model", "torus", "--n1", "12", "--n2", "12", "--potential", "zero")
    assert d["result"]["full_set"]["phi"] == 0.0


def test_cheeger_subset_half_torus(capsys):
    # columns 0..7 of a 16 x 16 torus
    idx = ",".join(f"{16 * j}-{16 * j + 7}" for j in range(16))
    code, d = run_json(capsys, "cheeger", "--model", "torus", "--n1", "16", "--n2", "16", "--L2", "3.0",
                       "--subset", idx)
    assert d["result"]["subset"]["area"] == pytest.approx(6.0, abs=1e-12)


@pytest.mark.parametrize("args", [
    ("--theorem", "1.1", "--model", "sphere", "--sub", "3", "--s", "0.1"),
    ("--theorem", "5.q", "--model", "sphere", "--sub", "3", "--s", "0.1"),
    ("--theorem", "shigekawa", "--model", "circle", "--A", "1.0"),
    ("--theorem", "1.2", "--A", "0.25", "--ks", "1,2", "--n", "256"),
    ("--theorem", "1.3", "--A", "0.25", "--n", "256"),
    ("--theorem", "2.5", "--A", "0.25", "--n", "256"),
    ("--theorem", "6.2", "--A", "0.25", "--n", "256", "--ks", "1,2"),
    ("--theorem", "bochner", "--model", "torus", "--potential", "flux", "--m", "2", "--n1", "16", "--n2", "16"),
    ("--theorem", "heat", "--model", "circle", "--n", "100", "--samples", "4"),
])
def test_verify_holds(capsys, args):
    code, d = run_json(capsys, "verify", *args)
    assert code == 0
    verdicts = {r["verdict"] for r in d["result"]["reports"]}
    assert "violated" not in verdicts and verdicts & {"holds"}


def test_verify_shigekawa_trivial(capsys):
    code, d = run_json(capsys, "verify", "--theorem", "shigekawa", "--A", str(2 * math.pi / (2 * math.pi)))
    assert d["result"]["reports"][0]["inputs"]["gauge_trivial"] is True


def test_verify_bochner_order(capsys):
    code, d = run_json(capsys, "verify", "--theorem", "bochner", "--model", "circle", "--n", "128", "--A", "0.5")
    assert 1.5 <= d["result"]["reports"][0]["order"] <= 2.5


def test_verify_violation_exit_code(capsys):
    # a tolerance of -100% turns the Lichnerowicz window into an impossible demand
    code, d = run_json(capsys, "verify", "--theorem", "1.1", "--model", "sphere", "--sub", "2", "--tol-rel", "-1")
    assert code == 3 and d["result"]["reports"][0]["verdict"] == "violated"


@pytest.mark.parametrize("argv", [
    ["spectrum", "--model", "disk"],
    ["spectrum", "--n", "two"],
    ["spectrum", "--n", "3"],
    ["spectrum", "--k", "0"],
    ["verify"],
    ["verify", "--theorem", "heat", "--model", "sphere", "--sub", "2"],
    ["spectrum", "--model", "circle", "--potential", "flux"],
    ["spectrum", "--config", "/nonexistent/file"],
    ["sweep", "--jobs", "0"],
    [],
])
def test_config_errors(capsys, argv):
    assert cli.main(argv) == 1


def test_solver_failure_exit_code(capsys):
    code = cli.main(["spectrum", "--model", "sphere", "--sub", "2", "--method", "lanczos", "--tol", "1e-30",
                     "--k", "4"])
    assert code == 2


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# circle run\nmodel = circle\nn = 128\nA = 0.25\nk = 2\n")
    code, d = run_json(capsys, "spectrum", "--config", str(cfg), "--A", "0.5")
    assert d["config"]["n"] == 128 and d["config"]["A"] == 0.5
    assert d["result"]["eigenvalues"][0] == pytest.approx(0.25, abs=1e-3)


def test_config_file_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("resolution = 3\n")
    assert cli.main(["spectrum", "--config", str(cfg)]) == 1


def test_pi_expressions(capsys):
    code, d = run_json(capsys, "spectrum", "--L", "2*pi", "--A", "pi/4", "--n", "64", "--k", "1")
    assert d["config"]["L"] == pytest.approx(2 * math.pi)
    assert cli.main(["spectrum", "--A", "__import__('os')"]) == 1


def test_exports(tmp_path, capsys):
    paths = {k: tmp_path / k for k in ("m.off", "a.mtx", "p.json", "v.bin")}
    code, _ = run_json(capsys, "spectrum", "--model", "sphere", "--sub", "2", "--s", "0.2", "--k", "3",
                       "--export-off", str(paths["m.off"]), "--export-mtx", str(paths["a.mtx"]),
                       "--export-potential", str(paths["p.json"]), "--export-eigvecs", str(paths["v.bin"]))
    assert code == 0
    assert paths["m.off"].read_text().startswith("OFF")
    assert "hermitian" in paths["a.mtx"].read_text().splitlines()[0]
    assert json.loads(paths["p.json"].read_text())["descriptor"] == "sphere s=0.2"
    assert read_eigenvectors(paths["v.bin"]).shape == (162, 3)
    # the exported potential loads back through the config
    code, d = run_json(capsys, "spectrum", "--model", "sphere", "--sub", "2", "--potential-file",
                       str(paths["p.json"]), "--k", "1")
    assert code == 0 and d["result"]["potential"] == "sphere s=0.2"


def test_partition_export(tmp_path, capsys):
    p = tmp_path / "parts.csv"
    run_json(capsys, "cheeger", "--n", "128", "--potential", "zero", "--ks", "2", "--export-partition", str(p))
    rows = p.read_text().splitlines()
    assert rows[0] == "vertex,part" and len(rows) == 129


def _sweep_rows(text):
    return list(csv.DictReader(io.StringIO("\n".join(x for x in text.splitlines() if not x.startswith("#")))))


def test_sweep_circle(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    gp = tmp_path / "sweep.gp"
    code = cli.main(["sweep", "--param", "A", "--from", "0", "--to", "1", "--steps", "9", "--n", "128",
                     "--k", "2", "--ks", "1,2", "--output", str(out), "--gnuplot", str(gp), "--no-timestamp"])
    assert code == 0
    rows = _sweep_rows(out.read_text())
    assert [int(r["index"]) for r in rows] == list(range(9))
    A = np.array([float(r["A"]) for r in rows])
    lam = np.array([float(r["lambda_1"]) for r in rows])
    expect = np.minimum(A, 1 - A) ** 2
    np.testing.assert_allclose(lam, expect, atol=1e-3)
    assert lam[0] < 1e-9 and lam[-1] < 1e-9
    assert all(r["Buser-1.3"] == "holds" for r in rows)
    assert "plot" in gp.read_text() and str(out) in gp.read_text()


def test_sweep_parallel_matches_serial(tmp_path, capsys):
    base = ["sweep", "--param", "A", "--from", "0", "--to", "0.5", "--steps", "4", "--n", "64", "--ks", "1",
            "--no-timestamp"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(base + ["--output", str(a)]) == 0
    assert cli.main(base + ["--jobs", "2", "--output", str(b)]) == 0
    assert _sweep_rows(a.read_text()) == _sweep_rows(b.read_text())


def test_sweep_config_embedded(capsys):
    code, out, _ = run(capsys, "sweep", "--steps", "2", "--n", "64", "--ks", "1", "--no-timestamp")
    assert "# param = A" in out and "# steps = 2" in out
