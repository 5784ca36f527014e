import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from starcurl.algebra import GridField, fd_grad
from starcurl.divcurl import CompatibilityError
from starcurl.fields import constant
from starcurl.geometry import build_ball, voxelize
from starcurl.tolerances import TOL_VEKUA
from starcurl.vekua import (
    IrrotationalCoefficient,
    MaxwellMedium,
    SolverError,
    antigradient,
    d_minus_alpha,
    dirichlet_grad,
    phi_from_alpha,
    phi_teodorescu,
    solve_conductivity,
    solve_d_minus_alpha,
    solve_d_plus_M,
    solve_divergence_form,
    solve_maxwell_static,
)


def scalar(grid, v):
    return GridField(grid, "scalar", np.asarray(v, dtype=float))


def exp_coeff(grid):
    x = grid.points
    phi = scalar(grid, np.exp(x[:, 0]))
    return IrrotationalCoefficient.from_phi(phi, phi.values[:, None] * np.array([1.0, 0.0, 0.0]))


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_zero_rhs_gives_zero(ball16):
    u, rep = solve_conductivity(scalar(ball16, np.ones(ball16.n_interior)),
                                scalar(ball16, np.zeros(ball16.n_interior)))
    assert np.all(u.values == 0) and rep.info["iterations"] == 0


def test_poisson_manufactured(ball24):
    x = ball24.points
    r2 = np.sum(x**2, axis=1)
    u, rep = solve_conductivity(scalar(ball24, np.ones(len(x))), scalar(ball24, -6.0 + 0 * r2))
    assert rel(u.values, 1 - r2) < 5e-3
    assert rep.info["energy_monotone"]


def test_variable_conductivity_manufactured(ball24):
    x = ball24.points
    r2 = np.sum(x**2, axis=1)
    rhs = np.exp(2 * x[:, 0]) * (-10 * x[:, 0] + 2 * (1 - r2 - 2 * x[:, 0] ** 2))
    u, _ = solve_conductivity(scalar(ball24, np.exp(x[:, 0])), scalar(ball24, rhs))
    assert rel(u.values, (1 - r2) * x[:, 0]) < TOL_VEKUA


def test_cell_dirichlet_mode_is_first_order_but_converges(ball16):
    x = ball16.points
    r2 = np.sum(x**2, axis=1)
    u, _ = solve_conductivity(scalar(ball16, np.ones(len(x))), scalar(ball16, -6.0 + 0 * r2), dirichlet="cell")
    assert rel(u.values, 1 - r2) < 0.3
    with pytest.raises(ValueError):
        solve_conductivity(scalar(ball16, np.ones(len(x))), scalar(ball16, np.ones(len(x))), dirichlet="x")


def test_solver_error_on_tiny_maxiter(ball16):
    x = ball16.points
    with pytest.raises(SolverError):
        solve_divergence_form(scalar(ball16, np.exp(x[:, 0])), scalar(ball16, np.ones(len(x))), maxiter=2)


def test_nonpositive_coefficient_rejected(ball16):
    n = ball16.n_interior
    with pytest.raises(ValueError):
        solve_conductivity(scalar(ball16, -np.ones(n)), scalar(ball16, np.ones(n)))


def test_dirichlet_grad_second_order():
    errs = []
    for n in (16, 32):
        grid = voxelize(build_ball(1.0), n)
        x = grid.points
        u = scalar(grid, (1 - np.sum(x**2, axis=1)) * np.cos(x[:, 1]))
        exact = fd_grad(u).values * 0
        exact[:, 0] = -2 * x[:, 0] * np.cos(x[:, 1])
        exact[:, 1] = -2 * x[:, 1] * np.cos(x[:, 1]) - (1 - np.sum(x**2, axis=1)) * np.sin(x[:, 1])
        exact[:, 2] = -2 * x[:, 2] * np.cos(x[:, 1])
        errs.append(np.sqrt(np.mean(np.sum((dirichlet_grad(u).values - exact) ** 2, axis=1))))
    assert np.log2(errs[0] / errs[1]) > 1.7


@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_antigradient_of_gradient(ball16, a, b, c):
    x = ball16.points
    u = GridField(ball16, "vector", np.stack([x[:, 1], x[:, 0], np.ones(len(x))], 1))
    p = np.array([[a, b, c]])
    got = antigradient(u, np.zeros(3), p)[0]
    assert abs(got - (a * b + c)) < 2e-2


def test_antigradient_rejects_bad_input(ball16):
    with pytest.raises(ValueError):
        antigradient(scalar(ball16, np.ones(ball16.n_interior)), np.zeros(3), np.zeros((1, 3)))
    u = constant(ball16, (1.0, 1.0, 1.0))
    with pytest.raises(ValueError):
        antigradient(u, np.zeros(3), np.array([[0.9, 0.9, 0.0]]))


def test_phi_from_alpha(ball16):
    alpha = constant(ball16, (1.0, 0.0, 0.0))
    phi = phi_from_alpha(alpha)
    assert np.allclose(phi.values, np.exp(ball16.points[:, 0]), rtol=1e-6)


def test_coefficient_validation(ball16):
    x = ball16.points
    with pytest.raises(CompatibilityError):
        IrrotationalCoefficient(GridField(ball16, "vector", np.stack([x[:, 1], -x[:, 0], 0 * x[:, 0]], 1)))
    with pytest.raises(ValueError):
        IrrotationalCoefficient(scalar(ball16, np.ones(len(x))))


def test_phi_teodorescu_right_inverse(ball16):
    coeff = exp_coeff(ball16)
    x = ball16.points
    w = GridField(ball16, "quaternion", np.stack([x[:, 1], 0 * x[:, 0], np.ones(len(x)), x[:, 0]], 1))
    t = phi_teodorescu(w, coeff.phi)
    back = d_minus_alpha(t, coeff.alpha)
    m = back.accuracy_mask & (ball16.distance_to_boundary() >= 2 * ball16.h)
    assert rel(back.values[m], w.values[m]) < 0.05
    assert np.allclose(phi_teodorescu(w, coeff.phi, x[:3]), t.values[:3], rtol=1e-2, atol=1e-2)


def test_d_minus_alpha_solver(ball16):
    coeff = exp_coeff(ball16)
    x = ball16.points
    q = np.zeros((len(x), 4))
    q[:, 0] = x[:, 1]
    q[:, 3] = coeff.phi.values
    w, rep = solve_d_minus_alpha(GridField(ball16, "quaternion", q), coeff)
    assert rep.passed, rep.residuals


def test_d_plus_m_zero_and_manufactured(ball16):
    coeff = exp_coeff(ball16)
    w, rep = solve_d_plus_M(GridField(ball16, "quaternion", np.zeros((ball16.n_interior, 4))), coeff)
    assert np.all(w.values == 0)
    q = np.zeros((ball16.n_interior, 4))
    q[:, 0] = 1.0
    q[:, 3] = coeff.phi.values
    w, rep = solve_d_plus_M(GridField(ball16, "quaternion", q), coeff)
    assert rep.passed, rep.residuals


def test_d_plus_m_rejects_incompatible(ball16):
    coeff = exp_coeff(ball16)
    x = ball16.points
    q = np.zeros((len(x), 4))
    q[:, 1] = x[:, 0]
    with pytest.raises(CompatibilityError):
        solve_d_plus_M(GridField(ball16, "quaternion", q), coeff)


def medium(grid, eps, mu, rho, j, **kw):
    n = grid.n_interior
    return MaxwellMedium(scalar(grid, eps * np.ones(n) if np.isscalar(eps) else eps),
                         scalar(grid, mu * np.ones(n) if np.isscalar(mu) else mu),
                         scalar(grid, rho * np.ones(n) if np.isscalar(rho) else rho),
                         GridField(grid, "vector", np.broadcast_to(j, (n, 3)).copy()), **kw)


def test_maxwell_trivial(ball16):
    E, H, rep = solve_maxwell_static(medium(ball16, 1.0, 1.0, 0.0, np.zeros(3)))
    assert np.all(E.values == 0) and np.all(H.values == 0)


def test_maxwell_uniform_current(ball16):
    c = np.array([0.0, 0.0, 1.0])
    E, H, rep = solve_maxwell_static(medium(ball16, 1.0, 1.0, 0.0, c))
    exact = -0.5 * np.cross(ball16.points, c)
    assert rel(H.values, exact) < 2e-2
    assert rep.passed


def test_maxwell_uniform_charge(ball24):
    x = ball24.points
    E, H, rep = solve_maxwell_static(medium(ball24, 1.0, 1.0, 6.0, np.zeros(3)))
    # laplacian h1 = -rho with h1 = 1 - |x|^2, so E = -grad h1 = 2x
    assert rel(E.values, 2 * x) < 2e-2
    assert rep.passed


def test_maxwell_validation(ball16):
    with pytest.raises(ValueError):
        medium(ball16, 0.0, 1.0, 0.0, np.zeros(3))
    with pytest.raises(ValueError):
        medium(ball16, 1.0, -1.0, 0.0, np.zeros(3))
    x = ball16.points
    with pytest.raises(CompatibilityError):
        medium(ball16, 1.0, 1.0, 0.0, np.stack([x[:, 0], 0 * x[:, 0], 0 * x[:, 0]], 1))
