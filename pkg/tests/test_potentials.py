import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from starcurl.algebra import GridField
from starcurl.fields import SolenoidalPolynomial, bump_quaternion
from starcurl.geometry import build_ball
from starcurl.potentials import (
    T0Lattice,
    VolumeOperatorConfig,
    cauchy_operator,
    gauss_legendre_01,
    grad_t0,
    monogenic_completion,
    newton_potential,
    quaternion_potential,
    single_layer,
    t0,
    t1,
    t2,
    teodorescu,
)


def ball_probes(n=60, r=0.8, seed=3):
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(n, 3))
    return r * u / np.linalg.norm(u, axis=1)[:, None] * rng.random((n, 1)) ** (1 / 3)


C = np.array([0.3, -0.5, 0.8])


def test_teodorescu_of_constant(ball16):
    x = ball_probes()
    got = teodorescu(GridField(ball16, "vector", np.tile(C, (ball16.n_interior, 1))), x)
    exact = np.concatenate([(x @ C)[:, None], -np.cross(x, C)], axis=1) / 3.0
    assert np.abs(got - exact).max() / np.abs(exact).max() < 6e-2


def test_components_agree_with_full_transform(ball16, rng):
    g0 = GridField(ball16, "scalar", rng.normal(size=ball16.n_interior))
    g = GridField(ball16, "vector", rng.normal(size=(ball16.n_interior, 3)))
    x = ball_probes(10)
    full = teodorescu(GridField(ball16, "quaternion", np.concatenate([g0.values[:, None], g.values], 1)), x)
    assert np.allclose(full[:, 0], t0(g, x))
    assert np.allclose(full[:, 1:], t1(g0, x) + t2(g, x))


def test_newton_potential_of_one(ball16):
    x = ball_probes()
    got = newton_potential(GridField(ball16, "scalar", np.ones(ball16.n_interior)), x)
    exact = np.sum(x**2, axis=1) / 6.0 - 0.5
    assert np.abs(got - exact).max() < 2e-2


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(ball16, a, b):
    rng = np.random.default_rng(0)
    q1, q2 = rng.normal(size=(2, ball16.n_interior, 4))
    x = ball_probes(5)
    lhs = quaternion_potential(ball16, a * q1 + b * q2, x)
    rhs = a * quaternion_potential(ball16, q1, x) + b * quaternion_potential(ball16, q2, x)
    assert np.allclose(lhs, rhs, atol=1e-10 * (1 + np.abs(rhs).max()))


def test_singular_corrections_close_at_centers(ball16):
    q = np.tile(np.r_[0.0, C], (ball16.n_interior, 1))
    pts = ball16.points[:200]
    a = quaternion_potential(ball16, q, pts, VolumeOperatorConfig("equivalent_ball"))
    b = quaternion_potential(ball16, q, pts, VolumeOperatorConfig("exclude_cell"))
    assert np.allclose(a, b, atol=1e-10)


def test_single_layer_and_cauchy_of_one(ball):
    mesh = ball.boundary
    x = ball_probes(20, 0.6)
    assert np.allclose(single_layer(np.ones(mesh.n_triangles), mesh, x), 1.0, atol=1e-2)
    one = np.tile([1.0, 0.0, 0.0, 0.0], (mesh.n_triangles, 1))
    F = cauchy_operator(one, mesh, x)
    assert np.allclose(F, [1.0, 0.0, 0.0, 0.0], atol=1e-2)
    out = cauchy_operator(one, mesh, np.array([[0.0, 0.0, 2.0]]))
    assert np.abs(out).max() < 1e-2


def test_borel_pompeiu_inner_support(ball24):
    w, Dw = bump_quaternion(ball24.points, C, 0.6, 4)
    tw = quaternion_potential(ball24, Dw, ball24.points)
    assert np.linalg.norm(tw - w) / np.linalg.norm(w) < 6e-2


def test_gauss_legendre_exact():
    t, w = gauss_legendre_01(8)
    assert np.isclose(w.sum(), 1.0) and np.isclose(w @ t**7, 1 / 8)


def test_monogenic_completion_of_linear():
    x = ball_probes(10)
    U = monogenic_completion(lambda y: np.broadcast_to(C, y.shape), x)
    assert np.allclose(U, 0.5 * np.cross(x, C))


def test_lattice_gradient_matches_direct(ball16):
    p = SolenoidalPolynomial(np.random.default_rng(2), 2)
    g = GridField(ball16, "vector", p(ball16.points))
    x = ball_probes(30, 0.7)
    # reference: gradient of the single layer of g.eta on a fine mesh
    mesh = build_ball(1.0, refinement=5).boundary
    a = np.einsum("ij,ij->i", p(mesh.points), mesh.normals)
    e = 1e-4
    ref = np.stack([(single_layer(a, mesh, x + e * ek) - single_layer(a, mesh, x - e * ek)) / (2 * e) for ek in np.eye(3)], 1)
    lat = grad_t0(g, x)
    assert np.allclose(lat, T0Lattice(ball16, g.values).grad(x))
    assert np.abs(lat - ref).max() / np.abs(ref).max() < 3e-2


def test_config_validation():
    with pytest.raises(ValueError):
        VolumeOperatorConfig("bogus")
    with pytest.raises(ValueError):
        VolumeOperatorConfig(gradient_step_fraction=0.7)
    with pytest.raises(ValueError):
        VolumeOperatorConfig(ray_nodes=4)


def test_boundary_shape_errors(ball):
    with pytest.raises(ValueError):
        single_layer(np.ones(3), ball.boundary, np.zeros((1, 3)))
    with pytest.raises(ValueError):
        cauchy_operator(np.ones((3, 4)), ball.boundary, np.zeros((1, 3)))


def test_t1_of_linear_scalar(ball24):
    x = ball_probes(40, 0.7)
    got = t1(GridField(ball24, "scalar", ball24.points @ C), x)
    r2 = np.sum(x**2, axis=1)[:, None]
    exact = -(C * (r2 / 10 - 1 / 6) + (x @ C)[:, None] * x / 5)
    assert np.abs(got - exact).max() / np.abs(exact).max() < 5e-2


def test_completion_of_harmonic_is_monogenic():
    x = ball_probes(20, 0.6)

    def U(y):
        return monogenic_completion(lambda z: np.stack([z[..., 1], z[..., 0], 0 * z[..., 0]], -1), y)

    e = 1e-4
    J = np.stack([(U(x + e * ek) - U(x - e * ek)) / (2 * e) for ek in np.eye(3)], axis=1)  # J[:, j, i] = d_j U_i
    div = np.einsum("nii->n", J)
    curl = np.stack([J[:, 1, 2] - J[:, 2, 1], J[:, 2, 0] - J[:, 0, 2], J[:, 0, 1] - J[:, 1, 0]], 1)
    grad_u0 = np.stack([x[:, 1], x[:, 0], 0 * x[:, 0]], 1)
    assert np.abs(div).max() < 1e-6
    assert np.abs(grad_u0 + curl).max() < 1e-6
