import json

import numpy as np
import pytest

from qrm_metrology.cli import EXIT_BOUNDARY, EXIT_CONFIG, EXIT_OK, main
from qrm_metrology.csvio import FIT_COLUMNS, SWEEP_COLUMNS, TRAJECTORY_COLUMNS, read_csv

POINT = """\
model.g = 0.96
noise.kappa = 0.05
noise.nbar = 0
run.backend = moments
integrator.n_samples = 800
"""

SWEEP = """\
model.g = 0.96
noise.kappa = 0.05
run.backend = moments
integrator.n_samples = 2000
sweep.axis = kappa
sweep.values = 0.01,0.02,0.03,0.04,0.05
sweep.fit = true
"""


def write(tmp_path, text, name="s.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def error_record(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    return json.loads(err[-1])


def test_simulate_writes_trajectory(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["simulate", write(tmp_path, POINT), "--out", str(out)]) == EXIT_OK
    header, cols = read_csv(out / "trajectory.csv")
    assert tuple(header) == TRAJECTORY_COLUMNS
    assert cols["t"].size == 800 and cols["fg"][0] == 0.0
    np.testing.assert_allclose(cols["fg"], cols["chi"] ** 2 / cols["var_x"], rtol=1e-12)
    first = (out / "trajectory.csv").read_text().splitlines()[0]
    assert first.startswith("# ") and "model.g=0.96" in first and "run.backend=moments" in first
    assert (out / "trajectory.svg").read_text().startswith("<svg")
    assert "fg_max=" in capsys.readouterr().err


def test_simulate_is_deterministic(tmp_path):
    cfg = write(tmp_path, POINT)
    main(["-q", "simulate", cfg, "--out", str(tmp_path / "a")])
    main(["simulate", cfg, "--out", str(tmp_path / "b"), "--quiet"])
    a = (tmp_path / "a" / "trajectory.csv").read_bytes()
    b = (tmp_path / "b" / "trajectory.csv").read_bytes()
    assert a == b


def test_master_simulate_is_deterministic(tmp_path):
    cfg = write(tmp_path, POINT.replace("moments", "master") + "integrator.t_max = 20\n")
    for d in ("a", "b"):
        assert main(["-q", "simulate", cfg, "--out", str(tmp_path / d)]) == EXIT_OK
    assert (tmp_path / "a" / "trajectory.csv").read_bytes() == (tmp_path / "b" / "trajectory.csv").read_bytes()


def test_quiet_suppresses_progress(tmp_path, capsys):
    main(["--quiet", "simulate", write(tmp_path, POINT), "--out", str(tmp_path / "o")])
    assert capsys.readouterr().err == ""


def test_sweep_with_fit(tmp_path):
    out = tmp_path / "sw"
    assert main(["-q", "sweep", write(tmp_path, SWEEP), "--out", str(out)]) == EXIT_OK
    header, cols = read_csv(out / "sweep.csv")
    assert tuple(header) == SWEEP_COLUMNS
    np.testing.assert_allclose(cols["axis_value"], [0.01, 0.02, 0.03, 0.04, 0.05])
    assert np.all(np.diff(cols["fg_max"]) < 0)
    fh, fit = read_csv(out / "fit.csv")
    assert tuple(fh) == FIT_COLUMNS
    # the envelope maximum falls off as kappa^-2
    assert -2.2 <= fit["b"][0] <= -1.8
    assert fit["n_points"][0] == 5
    assert (out / "sweep.svg").exists()


def test_parallel_sweep_matches_serial(tmp_path):
    cfg = write(tmp_path, SWEEP.replace("2000", "400"))
    main(["-q", "sweep", cfg, "--out", str(tmp_path / "s1"), "--workers", "1"])
    main(["-q", "sweep", cfg, "--out", str(tmp_path / "s2"), "--workers", "2"])
    for name in ("sweep.csv", "fit.csv"):
        assert (tmp_path / "s1" / name).read_bytes() == (tmp_path / "s2" / name).read_bytes()


def test_fit_verb(tmp_path, capsys):
    csv = tmp_path / "d.csv"
    csv.write_text("# data\nx,y\n1,3\n2,12\n4,48\n8,192\n")
    assert main(["fit", str(csv), "--x", "x", "--y", "y"]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[1] == ",".join(FIT_COLUMNS)
    a, b, _, n = (float(v) for v in lines[2].split(","))
    assert a == pytest.approx(3.0) and b == pytest.approx(2.0) and n == 4
    out = tmp_path / "fit.csv"
    assert main(["-q", "fit", str(csv), "--x", "x", "--y", "y", "--out", str(out)]) == EXIT_OK
    assert read_csv(out)[1]["b"][0] == pytest.approx(2.0)


def test_fit_missing_column(tmp_path, capsys):
    csv = tmp_path / "d.csv"
    csv.write_text("x,y\n1,3\n2,12\n4,48\n")
    assert main(["fit", str(csv), "--x", "x", "--y", "z"]) == EXIT_CONFIG
    assert error_record(capsys)["key"] == "z"


def test_negative_kappa_is_config_error(tmp_path, capsys):
    code = main(["simulate", write(tmp_path, POINT.replace("0.05", "-0.05"))])
    assert code == EXIT_CONFIG
    rec = error_record(capsys)
    assert rec["error"] == "ConfigError" and rec["key"] == "noise.kappa" and rec["line"] == 2


def test_unknown_key_and_missing_file(tmp_path, capsys):
    assert main(["simulate", write(tmp_path, POINT + "model.spin = up\n")]) == EXIT_CONFIG
    assert error_record(capsys)["key"] == "model.spin"
    assert main(["simulate", str(tmp_path / "nope.cfg")]) == EXIT_CONFIG


def test_sweep_point_at_boundary(tmp_path, capsys):
    # the first response peak sits near t = 11, past the end of this window
    text = SWEEP.replace("sweep.fit = true\n", "integrator.t_max = 8\n")
    assert main(["sweep", write(tmp_path, text), "--out", str(tmp_path / "o")]) == EXIT_BOUNDARY
    rec = error_record(capsys)
    assert rec["error"] == "PeakAtBoundary" and rec["point"]["value"] == 0.01


def test_verb_mismatch(tmp_path):
    assert main(["-q", "simulate", write(tmp_path, SWEEP)]) == EXIT_CONFIG
    assert main(["-q", "sweep", write(tmp_path, POINT)]) == EXIT_CONFIG


def test_unknown_figure_rejected():
    with pytest.raises(SystemExit) as info:
        main(["reproduce", "fig9z"])
    assert info.value.code == 2


def test_reproduce_series_figure(tmp_path):
    out = tmp_path / "figs"
    argv = ["-q", "reproduce", "fig2a", "--out", str(out), "--backend", "moments", "--samples", "300"]
    assert main(argv) == EXIT_OK
    header, cols = read_csv(out / "fig2a.csv")
    assert header == ["g", "t", "x", "chi", "var_x", "fg"]
    g = cols["g"]
    assert sorted(set(g)) == [0.94, 0.95, 0.96, 0.97, 0.98]
    sel = g == 0.96
    np.testing.assert_allclose(cols["x"][sel], 0.3136 * cols["t"][sel] / (2 * np.pi))
    assert (out / "fig2a.svg").exists()


def test_reproduce_scaling_figure(tmp_path):
    out = tmp_path / "figs"
    argv = ["-q", "reproduce", "fig4b", "--out", str(out), "--backend", "moments", "--samples", "1000", "--no-svg"]
    assert main(argv) == EXIT_OK
    header, cols = read_csv(out / "fig4b.csv")
    assert header == ["kappa", "nbar", "axis_value", "fg_max", "t_star"]
    np.testing.assert_allclose(cols["axis_value"], 1 / np.log1p(1 / np.arange(1.0, 6.0)))
    _, fit = read_csv(out / "fig4b_fit.csv")
    assert fit["n_points"][0] == 5
    assert not (out / "fig4b.svg").exists()
