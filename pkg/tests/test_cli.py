import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from starcurl.algebra import GridField
from starcurl.cli import (
    EXIT_COMPAT,
    EXIT_CONFIG,
    EXIT_IO,
    EXIT_OK,
    EXIT_SOLVER,
    ConfigError,
    Expression,
    main,
    parse_config,
    read_csv,
    write_csv,
    write_vtk,
)
from starcurl.geometry import VoxelGrid


def test_expression_basic():
    e = Expression("x1*x2")
    assert e(np.array([[1.0, 2.0, 0.0]]))[0] == 2.0
    v = Expression("(x2, -x1, exp(0))")
    assert v.rank == "vector"
    assert np.allclose(v(np.array([1.0, 2.0, 3.0])), [2.0, -1.0, 1.0])
    assert np.isclose(Expression("x3^2 + pi")(np.array([0.0, 0.0, 2.0])), 4 + np.pi)


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(0.1, 10))
def test_expression_arithmetic(a, b, c):
    x = np.array([a, b, c])
    got = Expression("(x1 - 2*x2) / x3 + sqrt(x3) * cos(x1)")(x)
    assert np.isclose(got, (a - 2 * b) / c + np.sqrt(c) * np.cos(a))


@pytest.mark.parametrize("text", ["__import__('os')", "x1.real", "x4", "(1, 2)", "x1 +", "x1 % 2", "abs(x1)"])
def test_expression_rejects(text):
    with pytest.raises(ConfigError):
        Expression(text)


def test_expression_non_finite():
    with pytest.raises(ConfigError):
        Expression("1 / x1")(np.zeros(3))


def test_parse_defaults():
    cfg = parse_config("[scenario]\ntype = beltrami\n")
    assert cfg.scenario == "beltrami" and cfg.grid_n == 24 and cfg.params["alpha0"] == 0.2
    assert cfg.domain["kind"] == "ball"


def test_inline_comments():
    cfg = parse_config("[scenario]\ntype = divcurl  # scenario\n[domain]\nkind = box   # cube\n")
    assert cfg.domain["kind"] == "box"


def test_range_error_names_key_and_line():
    with pytest.raises(ConfigError) as exc:
        parse_config("[scenario]\ntype = divcurl\n\n[grid]\nn = -3\n")
    msg = str(exc.value)
    assert "grid.n" in msg and "line 5" in msg and "range" in msg


def test_unknown_key_and_section():
    with pytest.raises(ConfigError, match="unknown key domain.radus"):
        parse_config("[scenario]\ntype = divcurl\n[domain]\nradus = 2\n")
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config("[scenario]\ntype = divcurl\n[solver]\nx = 1\n")
    with pytest.raises(ConfigError):
        parse_config("[scenario]\ntype = beltrami\n", scenario="vekua")
    with pytest.raises(ConfigError):
        parse_config("")


def tiny_grid():
    return VoxelGrid(np.zeros(3), 0.5, (2, 2, 2), np.ones((2, 2, 2), dtype=bool))


def test_csv_constant_field_rows(tmp_path):
    g = tiny_grid()
    f = GridField(g, "vector", np.tile([1.0, 2.0, 3.0], (8, 1)))
    write_csv(f, tmp_path / "w.csv", "w")
    lines = (tmp_path / "w.csv").read_text().splitlines()
    assert lines[0] == "x,y,z,w1,w2,w3"
    assert len(lines) == 9


@given(st.integers(0, 2**32 - 1))
def test_csv_round_trip_bit_exact(tmp_path_factory, seed):
    g = tiny_grid()
    vals = np.random.default_rng(seed).normal(size=(8, 4)) * 10.0 ** np.random.default_rng(seed).integers(-300, 300, size=(8, 4))
    f = GridField(g, "quaternion", vals)
    p = tmp_path_factory.mktemp("csv") / "q.csv"
    write_csv(f, p, "q")
    names, pts, back = read_csv(p)
    assert names == ["q0", "q1", "q2", "q3"]
    assert np.array_equal(back, vals) and np.array_equal(pts, g.points)


def test_vtk_header(tmp_path):
    g = tiny_grid()
    write_vtk(tmp_path / "a.vtk", g, {"u": GridField(g, "scalar", np.arange(8.0))})
    lines = (tmp_path / "a.vtk").read_text().splitlines()
    assert lines[0].startswith("# vtk DataFile")
    assert "DATASET STRUCTURED_POINTS" in lines and "DIMENSIONS 2 2 2" in lines and "POINT_DATA 8" in lines


def write_cfg(tmp_path, text):
    p = tmp_path / "run.ini"
    p.write_text(text)
    return str(p)


DIVCURL = "[scenario]\ntype = divcurl\ng = (0, 0, 1)\n[grid]\nn = 12\n[output]\nformats = csv, vtk\n"


def test_exit_ok_and_determinism(tmp_path):
    cfg = write_cfg(tmp_path, DIVCURL)
    assert main(["divcurl", "--config", cfg, "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(["divcurl", "--config", cfg, "--out", str(tmp_path / "b")]) == EXIT_OK
    a, b = tmp_path / "a", tmp_path / "b"
    assert (a / "w.csv").read_bytes() == (b / "w.csv").read_bytes()
    assert (a / "divcurl.vtk").exists()
    rep = json.loads((a / "report.json").read_text())
    assert rep["config"]["grid"]["n"] == 12


def test_exit_config(tmp_path):
    cfg = write_cfg(tmp_path, "[scenario]\ntype = divcurl\n[grid]\nn = -3\n")
    assert main(["divcurl", "--config", cfg, "--out", str(tmp_path)]) == EXIT_CONFIG
    cfg = write_cfg(tmp_path, DIVCURL)
    assert main(["divcurl", "--config", cfg, "--grid-n", "4", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_exit_compat(tmp_path):
    cfg = write_cfg(tmp_path, "[scenario]\ntype = divcurl\ng = (x1, 0, 0)\n[grid]\nn = 12\n")
    assert main(["divcurl", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_COMPAT


def test_exit_solver(tmp_path):
    cfg = write_cfg(tmp_path, "[scenario]\ntype = beltrami\nalpha0 = 30\nadmissibility = none\n[grid]\nn = 12\n")
    assert main(["beltrami", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_SOLVER


def test_exit_io(tmp_path):
    assert main(["divcurl", "--config", str(tmp_path / "missing.ini")]) == EXIT_IO
    blocker = tmp_path / "file"
    blocker.write_text("")
    cfg = write_cfg(tmp_path, DIVCURL)
    assert main(["divcurl", "--config", cfg, "--out", str(blocker / "sub")]) == EXIT_IO


def test_csv_field_input(tmp_path):
    cfg = write_cfg(tmp_path, DIVCURL)
    assert main(["divcurl", "--config", cfg, "--out", str(tmp_path / "a")]) == EXIT_OK
    names = read_csv(tmp_path / "a" / "w.csv")[0]
    assert names == ["w1", "w2", "w3"]
    g = tmp_path / "g.csv"
    from starcurl.cli import build_domain, parse_config as pc
    from starcurl.geometry import voxelize
    c = pc(DIVCURL)
    grid = voxelize(build_domain(c.domain), 12)
    write_csv(GridField(grid, "vector", np.tile([0.0, 0.0, 1.0], (grid.n_interior, 1))), g, "g")
    cfg2 = write_cfg(tmp_path, DIVCURL.replace("g = (0, 0, 1)", f"g = csv:{g}"))
    assert main(["divcurl", "--config", cfg2, "--out", str(tmp_path / "b")]) == EXIT_OK
    assert (tmp_path / "a" / "w.csv").read_bytes() == (tmp_path / "b" / "w.csv").read_bytes()
