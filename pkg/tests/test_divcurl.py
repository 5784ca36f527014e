import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from starcurl.algebra import GridField, ScalarFunction, fd_curl, fd_div, fd_grad
from starcurl.divcurl import (
    CompatibilityError,
    DivCurlData,
    RayIntegrals,
    double_curl_inverse,
    helmholtz_potentials,
    irrotational_defect,
    right_inverse_curl,
    solenoidal_defect,
    solve_div_curl,
)
from starcurl.fields import bump_curl, constant, random_solenoidal
from starcurl.tolerances import tol_op

C = np.array([0.3, -0.5, 0.8])


def inner(grid, layers=2.0):
    return grid.distance_to_boundary() >= layers * grid.h


def rel(a, b, m):
    return np.linalg.norm((a - b)[m]) / np.linalg.norm(b[m])


def test_right_inverse_of_constant(ball16):
    R = right_inverse_curl(constant(ball16, C))
    exact = -0.5 * np.cross(ball16.points, C)
    m = inner(ball16)
    assert rel(R.values, exact, m) < 3e-2


def test_right_inverse_at_probes_matches_grid(ball16):
    x = np.array([[0.2, -0.1, 0.3], [0.0, 0.4, -0.2]])
    R = right_inverse_curl(constant(ball16, C), x)
    assert np.allclose(R, -0.5 * np.cross(x, C), atol=2e-2)


@pytest.mark.parametrize("grid_name", ["ball16", "box16"])
def test_curl_and_div_of_R(grid_name, request):
    grid = request.getfixturevalue(grid_name)
    g = random_solenoidal(grid, np.random.default_rng(7))
    R = right_inverse_curl(g)
    d, c = fd_div(R), fd_curl(R)
    m = inner(grid) & d.accuracy_mask
    tol = tol_op(grid.h)
    assert rel(c.values, g.values, m) < tol
    assert np.linalg.norm(d.values[m]) / np.linalg.norm(g.values[m]) < tol


@given(st.floats(-2, 2), st.floats(-2, 2))
def test_R_is_linear(ball16, a, b):
    rng = np.random.default_rng(11)
    g1, g2 = random_solenoidal(ball16, rng), random_solenoidal(ball16, rng)
    x = np.array([[0.1, 0.2, -0.3], [-0.5, 0.1, 0.2]])
    lhs = right_inverse_curl(g1 * a + g2 * b, x, check=False)
    rhs = a * right_inverse_curl(g1, x, check=False) + b * right_inverse_curl(g2, x, check=False)
    assert np.allclose(lhs, rhs, atol=1e-9 * (1 + np.abs(rhs).max()))


def test_compatibility_rejects_divergent_field(ball16):
    g = GridField(ball16, "vector", ball16.points.copy())
    assert solenoidal_defect(g) > 0.5
    with pytest.raises(CompatibilityError):
        right_inverse_curl(g)
    with pytest.raises(CompatibilityError):
        DivCurlData(g=g)


def test_defects_of_gradients_and_curls(ball16):
    x = ball16.points
    grad = GridField(ball16, "vector", np.stack([x[:, 1], x[:, 0], 2 * x[:, 2]], 1))
    assert irrotational_defect(grad) < 1e-12
    assert solenoidal_defect(GridField(ball16, "vector", bump_curl(C)(x))) < 5e-2


def test_general_solution_with_divergence_and_gauge(ball16):
    x = ball16.points
    g0 = GridField(ball16, "scalar", 1.0 + x[:, 0])
    gauge = ScalarFunction(lambda y: y[..., 0] * y[..., 1], lambda y: np.stack([y[..., 1], y[..., 0], 0 * y[..., 0]], -1))
    w = solve_div_curl(DivCurlData(g0, constant(ball16, C), gauge))
    d, c = fd_div(w), fd_curl(w)
    m = inner(ball16) & d.accuracy_mask
    tol = tol_op(ball16.h)
    assert rel(d.values, g0.values, m) < tol
    assert rel(c.values, np.tile(C, (len(x), 1)), m) < tol


def test_data_validation(ball16):
    with pytest.raises(ValueError):
        DivCurlData()
    with pytest.raises(ValueError):
        DivCurlData(g0=constant(ball16, C))
    with pytest.raises(ValueError):
        RayIntegrals(constant(ball16, C), method="magic")


def test_zero_data_gives_zero(ball16):
    w = solve_div_curl(DivCurlData(g=constant(ball16, (0.0, 0.0, 0.0))))
    assert np.all(w.values == 0)


def test_double_curl_inverse(ball16):
    g = random_solenoidal(ball16, np.random.default_rng(3))
    S = double_curl_inverse(g)
    cc = fd_curl(fd_curl(S))
    m = inner(ball16, 3.0) & cc.accuracy_mask
    assert rel(cc.values, g.values, m) < tol_op(ball16.h)
    # curl S = R[g]
    cs = fd_curl(S)
    R = right_inverse_curl(g, check=False)
    assert rel(cs.values, R.values, m) < tol_op(ball16.h)


def test_helmholtz_potentials_reproduce_solution(ball16):
    x = ball16.points
    g0 = GridField(ball16, "scalar", x[:, 2] ** 2)
    data = DivCurlData(g0, constant(ball16, C))
    v0, vstar = helmholtz_potentials(data)
    vg = GridField(ball16, "scalar", v0(x))
    w = fd_grad(vg).values - fd_curl(GridField(ball16, "vector", vstar(x))).values
    ref = solve_div_curl(data).values
    m = inner(ball16, 3.0)
    assert rel(w, ref, m) < tol_op(ball16.h)


def test_gauge_adds_its_gradient(ball16):
    x = ball16.points
    g0 = GridField(ball16, "scalar", 1.0 + x[:, 0])
    grad = lambda y: np.stack([y[..., 1], y[..., 0], 0 * y[..., 0]], -1)  # noqa: E731
    gauge = ScalarFunction(lambda y: y[..., 0] * y[..., 1], grad)
    w0 = solve_div_curl(DivCurlData(g0, constant(ball16, C)))
    w1 = solve_div_curl(DivCurlData(g0, constant(ball16, C), gauge))
    assert np.allclose(w1.values - grad(x), w0.values, atol=1e-12)
