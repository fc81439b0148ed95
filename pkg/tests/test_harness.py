import os

import numpy as np
import pytest
from hypothesis import given, strategies as st

from igafembem.harness import cli
from igafembem.harness.config import ConfigError, ExperimentConfig, build_config, parse_levels, read_config_file
from igafembem.harness.problems import problem_interface_square, rotor_source, stator_source
from igafembem.harness.runner import run_convergence
from igafembem.postprocess import read_csv

DOMAIN, SOL = problem_interface_square()
point = st.tuples(st.floats(-0.24, 0.24), st.floats(-0.24, 0.24)).filter(lambda p: np.hypot(*p) > 0.02)


def _fd_grad(f, x, h=1e-6):
    e = np.eye(2) * h
    return np.array([(f(x + e[i]) - f(x - e[i])) / (2 * h) for i in range(2)])


def _fd_laplace(f, x, h=1e-4):
    e = np.eye(2) * h
    return sum((f(x + e[i]) - 2 * f(x) + f(x - e[i])) / h ** 2 for i in range(2))


def test_manufactured_values():
    assert SOL.u(np.array([0.0, 0.0])) == pytest.approx(1.0)
    ring = np.array([[np.cos(t), np.sin(t)] for t in np.linspace(0, 6, 9)])
    np.testing.assert_allclose(SOL.ue(ring), 0.0, atol=1e-15)


@given(point)
def test_manufactured_derivatives(p):
    x = np.array(p)
    np.testing.assert_allclose(SOL.grad_u(x), _fd_grad(SOL.u, x), rtol=1e-5, atol=1e-5)
    np.testing.assert_allclose(SOL.grad_ue(x), _fd_grad(SOL.ue, x), rtol=1e-5, atol=1e-5)
    assert SOL.f(x) == pytest.approx(-_fd_laplace(SOL.u, x), rel=1e-4, abs=1e-2)
    assert abs(_fd_laplace(SOL.ue, x)) <= 1e-3 * (1 + 1 / np.hypot(*p) ** 2)


@given(point, st.floats(0, 2 * np.pi))
def test_manufactured_jumps(p, a):
    x, n = np.array(p), np.array([np.cos(a), np.sin(a)])
    assert SOL.u0(x) == pytest.approx(SOL.u(x) - SOL.ue(x), abs=1e-13)
    assert SOL.phi0(x, n) == pytest.approx((SOL.grad_u(x) - SOL.grad_ue(x)) @ n, abs=1e-10)
    assert SOL.phi(x, n) == pytest.approx(SOL.grad_ue(x) @ n, abs=1e-10)


def test_machine_sources():
    assert stator_source(np.array([0.0, 0.5])) == pytest.approx(100.0)
    assert stator_source(np.array([0.0, -0.5])) == pytest.approx(-100.0)
    assert np.all(rotor_source(np.ones((3, 2))) == 0)


def test_parse_levels():
    assert parse_levels("2..5") == [2, 3, 4, 5]
    assert parse_levels("0..10:5") == [0, 5, 10]
    assert parse_levels("1, 4,9") == [1, 4, 9]
    assert parse_levels("") == []
    for bad in ("3,2", "a..b", "1..4:0"):
        with pytest.raises(ConfigError):
            parse_levels(bad)


def test_config_precedence(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("degree = 3\nn-gauss = 50\nlevels = 1..3\nplot = yes\n")
    vals = read_config_file(f)
    cfg = build_config(vals, {"degree": 1, "n_gauss": None, "tol": 1e-8})
    assert (cfg.degree, cfg.n_gauss, cfg.levels, cfg.tol, cfg.plot) == (1, 50, [1, 2, 3], 1e-8, True)
    assert build_config().degree == ExperimentConfig().degree
    (tmp_path / "bad.cfg").write_text("colour = red\n")
    with pytest.raises(ConfigError):
        read_config_file(tmp_path / "bad.cfg")


@pytest.mark.parametrize("kw", [dict(problem="cube"), dict(problem="machine", degree=1),
                                dict(levels=[-1]), dict(tol=0.0), dict(n_gauss=0)])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        ExperimentConfig(**kw).validate()


def test_cli_usage_errors(capsys):
    assert cli.cli_main([]) == 1
    assert cli.cli_main(["solve", "--bogus"]) == 1
    assert "usage" in capsys.readouterr().err
    assert cli.cli_main(["solve", "--problem", "machine", "--degree", "1"]) == 1
    assert cli.cli_main(["eval", "--state", "missing.json", "--points", "1,1"]) == 1
    assert cli.cli_main(["--help"]) == 0


def test_cli_numerical_failure(capsys):
    rc = cli.cli_main(["solve", "--problem", "machine", "--level", "1", "--max-iter", "2"])
    assert rc == 2
    assert "numerical failure" in capsys.readouterr().err


def test_cli_selftest(capsys):
    assert cli.cli_main(["selftest", "--level", "2"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "partition of unity" in out


def test_cli_solve_and_eval(tmp_path, capsys):
    state = str(tmp_path / "s.json")
    rc = cli.cli_main(["solve", "--degree", "2", "--level", "3", "--state", state,
                       "--dump-matrices", str(tmp_path / "mats")])
    assert rc == 0
    out = capsys.readouterr().out
    assert "compatibility" in out and "stabilization" in out and "picard iterations: 1" in out
    assert os.path.exists(tmp_path / "mats" / "V.txt")
    pts = tmp_path / "pts.txt"
    pts.write_text("0.5 0.0\n0.0 -0.8\n")
    assert cli.cli_main(["eval", "--state", state, "--points-file", str(pts)]) == 0
    rows = [line.split() for line in capsys.readouterr().out.splitlines()]
    vals = np.array([float(r[2]) for r in rows])
    np.testing.assert_allclose(vals, np.log([0.5, 0.8]), atol=1e-3)
    assert cli.cli_main(["eval", "--state", state, "--points", "0.5"]) == 1


def test_cli_machine_state(tmp_path, capsys):
    state = str(tmp_path / "m.json")
    assert cli.cli_main(["solve", "--problem", "machine-linear", "--level", "1", "--state", state]) == 0
    assert "flux mean" in capsys.readouterr().out
    assert cli.cli_main(["eval", "--state", state, "--points", "0,0.395"]) == 0
    assert abs(float(capsys.readouterr().out.split()[2])) > 0.5


def test_convergence_outputs(tmp_path, capsys):
    out = tmp_path / "res"
    rc = cli.cli_main(["convergence", "--degree", "1", "--levels", "1..3", "--output", str(out),
                       "--n-points", "4", "--plot"])
    assert rc == 0
    for metric in ("energy", "path1", "path2", "path3"):
        rows = read_csv(out / ("interface-square_p1_%s.csv" % metric))
        assert [r[0] for r in rows] == [1, 2, 3] and all(r[2] > 0 for r in rows)
        assert (out / ("interface-square_p1_%s.png" % metric)).stat().st_size > 0
    assert "slope" in capsys.readouterr().out


def test_convergence_reproducible(tmp_path):
    cfg = [ExperimentConfig(degree=1, levels=[1, 2], n_points=4, output=str(tmp_path / d))
           for d in ("a", "b")]
    paths = [run_convergence(c).csv_path(c.output, "path2") for c in cfg]
    assert open(paths[0], "rb").read() == open(paths[1], "rb").read()


def test_empty_level_range(tmp_path):
    rec = run_convergence(ExperimentConfig(levels=[], output=str(tmp_path)))
    assert rec.rows == [] and rec.failure is None
    assert cli.cli_main(["convergence", "--levels", "", "--output", str(tmp_path)]) == 0


def test_machine_sweep_without_reference(tmp_path):
    cfg = ExperimentConfig(problem="machine-linear", levels=[1], aitken=False, output=str(tmp_path))
    assert run_convergence(cfg).rows == []


def test_machine_failure_recorded(tmp_path):
    cfg = ExperimentConfig(problem="machine", levels=[0], max_iter=2, output=str(tmp_path))
    rec = run_convergence(cfg)
    assert rec.failure.startswith("level 0")
