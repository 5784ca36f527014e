import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from starcurl.algebra import GridField, fd_curl
from starcurl.bvp import (
    BiharmonicBasis,
    ExteriorHarmonicBasis,
    HarmonicBasis,
    basis_for,
    boundary_l2,
    boundary_normal_trace,
    kernel_t0_diagnostic,
    neumann_correction,
    right_inverse_curl_dirichlet,
    right_inverse_curl_neumann,
    solve_biharmonic_dirichlet,
    solve_laplace_neumann,
)
from starcurl.divcurl import CompatibilityError
from starcurl.fields import bump_curl, constant, random_solenoidal
from starcurl.geometry import build_box
from starcurl.tolerances import tol_op


def fd_laplacian_points(f, x, e=1e-3):
    out = -6 * f(x)
    for ek in np.eye(3):
        out = out + f(x + e * ek) + f(x - e * ek)
    return out / e**2


@pytest.mark.parametrize("degree", [1, 3, 6])
def test_harmonic_basis_size_and_harmonicity(degree):
    b = HarmonicBasis(degree)
    assert len(b) == (degree + 1) ** 2 - 1
    x = np.random.default_rng(0).uniform(-0.5, 0.5, size=(5, 3))
    assert np.abs(fd_laplacian_points(b.values, x)).max() < 1e-4


def test_biharmonic_and_exterior_bases():
    b = BiharmonicBasis(4)
    coef = b.laplacian_coef()
    assert coef.shape[1] == len(b)
    x = np.random.default_rng(1).uniform(-0.5, 0.5, size=(4, 3))
    lap = fd_laplacian_points(b.values, x)
    assert np.abs(fd_laplacian_points(lambda y: fd_laplacian_points(b.values, y, 1e-2), x, 1e-2)).max() < 1e-2 * max(1.0, np.abs(lap).max())
    e = ExteriorHarmonicBasis(3)
    x = np.array([[1.5, 0.3, -0.7], [0.0, 2.0, 1.0]])
    assert np.abs(fd_laplacian_points(e.values, x, 1e-3)).max() < 1e-3
    assert np.all(np.abs(e.values(100 * x)) < np.abs(e.values(x)).max())


def test_neumann_reproduces_harmonic_data(ball):
    mesh = ball.boundary
    basis = basis_for(ball, "harmonic", 4)
    # h = x1 x2 - x3^2 + (x1^2 + x2^2)/2, harmonic
    grad = np.stack([mesh.points[:, 1] + mesh.points[:, 0], mesh.points[:, 0] + mesh.points[:, 1], -2 * mesh.points[:, 2]], 1)
    a0 = np.einsum("ij,ij->i", grad, mesh.normals)
    fit = solve_laplace_neumann(a0, basis, mesh)
    x = np.array([[0.1, 0.2, 0.3]])
    assert np.allclose(fit.grad(x), [[0.3, 0.3, -0.6]], atol=1e-8)
    assert fit.report.info["relative_boundary_residual"] < 1e-8


def test_neumann_rejects_net_flux(ball):
    mesh = ball.boundary
    with pytest.raises(CompatibilityError):
        solve_laplace_neumann(np.ones(mesh.n_triangles), basis_for(ball, "harmonic", 3), mesh)
    with pytest.raises(ValueError):
        solve_laplace_neumann(np.ones(3), basis_for(ball, "harmonic", 3), mesh)


def test_zero_data_gives_zero_fit(ball):
    mesh = ball.boundary
    fit = solve_laplace_neumann(np.zeros(mesh.n_triangles), basis_for(ball), mesh)
    assert np.all(fit.weights == 0)
    fit = solve_biharmonic_dirichlet(np.zeros((mesh.n_triangles, 3)), basis_for(ball, "biharmonic", 4), mesh)
    assert np.all(fit.weights == 0)


@given(st.integers(0, 50))
def test_biharmonic_fit_of_gradient_data(ball, seed):
    mesh = ball.boundary
    c = np.random.default_rng(seed).normal(size=3)
    fit = solve_biharmonic_dirichlet(np.tile(c, (mesh.n_triangles, 1)), basis_for(ball, "biharmonic", 3), mesh)
    assert np.allclose(fit.grad(np.zeros((1, 3))), c, atol=1e-8)


def test_neumann_correction_of_constant_vanishes(ball16):
    corr = neumann_correction(constant(ball16, (0.3, -0.5, 0.8)))
    x = ball16.points
    assert np.linalg.norm(corr.h.grad(x)) / np.linalg.norm(np.ones((len(x), 3))) < 5e-3


def test_neumann_variant_reduces_trace(box16):
    g = random_solenoidal(box16, np.random.default_rng(4))
    corr = neumann_correction(g)
    assert corr.trace_after < 0.1 * corr.trace_before
    Rn = right_inverse_curl_neumann(g)
    c = fd_curl(Rn)
    m = c.accuracy_mask & (box16.distance_to_boundary() >= 2 * box16.h)
    assert np.linalg.norm((c.values - g.values)[m]) / np.linalg.norm(g.values[m]) < tol_op(box16.h)


def test_dirichlet_variant_vanishes_on_boundary(ball16, ball):
    g = GridField(ball16, "vector", bump_curl((0.3, -0.5, 0.8))(ball16.points))
    gn = g.norm()
    mesh = ball.boundary
    Rb = right_inverse_curl_dirichlet(g, mesh.points)
    assert boundary_l2(Rb, mesh) / np.sqrt(mesh.total_area) < 1e-2 * gn
    out = right_inverse_curl_dirichlet(g, np.array([[0.0, 0.0, 1.3], [1.1, 0.4, 0.0]]))
    assert np.abs(out).max() < 1e-2 * gn


def test_dirichlet_rejects_nonzero_trace(ball16):
    with pytest.raises(CompatibilityError):
        right_inverse_curl_dirichlet(constant(ball16, (0.0, 0.0, 1.0)))


def test_kernel_t0_diagnostic(ball16):
    bump = GridField(ball16, "vector", bump_curl()(ball16.points))
    rep = kernel_t0_diagnostic(bump)
    assert rep.info["t0_small"] and rep.info["trace_small"] and rep.passed
    rep = kernel_t0_diagnostic(constant(ball16, (0.0, 0.0, 1.0)))
    assert not rep.info["t0_small"] and not rep.info["trace_small"] and rep.passed


def test_boundary_normal_trace_of_constant(ball16):
    tr = boundary_normal_trace(constant(ball16, (0.0, 0.0, 1.0)))
    assert np.isclose(tr, np.sqrt(4 * np.pi / 3), rtol=2e-2)


def test_rank_deficient_fit_raises():
    box = build_box((1.0, 1.0, 1.0), facets_per_edge=1)
    with pytest.raises(ValueError):
        solve_biharmonic_dirichlet(np.ones((box.boundary.n_triangles, 3)), basis_for(box, "biharmonic", 8), box.boundary)
