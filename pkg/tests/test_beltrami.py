import numpy as np
import pytest

from starcurl.algebra import GridField
from starcurl.beltrami import (
    BeltramiConfig,
    SeriesDivergenceError,
    beltrami_neumann_bvp,
    beltrami_residual,
    beltrami_series,
    estimate_r_norm,
    lp_norm,
    operator_norm_bound,
)
from starcurl.divcurl import CompatibilityError
from starcurl.fields import constant, random_solenoidal
from starcurl.tolerances import TOL_BELTRAMI


@pytest.mark.parametrize("kw", [dict(k_max=0), dict(tail_tol=0.0), dict(variant="x"), dict(admissibility="x")])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        BeltramiConfig(0.1, **kw)


def test_zero_alpha_returns_g(ball16):
    g = constant(ball16, (0.3, -0.5, 0.8))
    w, rep, terms = beltrami_series(g, BeltramiConfig(0.0))
    assert np.allclose(w.values, g.values)
    assert rep.passed


def test_series_constant_field(ball16):
    g = constant(ball16, (0.0, 0.0, 1.0))
    w, rep, terms = beltrami_series(g, BeltramiConfig(0.2))
    assert max(rep.info["ratios"]) < 0.7
    assert rep.residuals["beltrami_residual"] <= TOL_BELTRAMI
    # first correction is alpha0 R[c] = -alpha0/2 x cross c on the unit ball
    x = ball16.points
    assert np.allclose(terms[1].values, -0.1 * np.cross(x, [0.0, 0.0, 1.0]), atol=5e-3)
    assert rep.info["n_terms"] == len(terms)


def test_non_harmonic_input_rejected(ball16, rng):
    x = ball16.points
    g = GridField(ball16, "vector", np.stack([x[:, 1], np.zeros(len(x)), np.zeros(len(x))], 1))
    with pytest.raises(CompatibilityError):
        beltrami_series(g, BeltramiConfig(0.1))


def test_large_alpha_diverges_or_rejected(ball16):
    g = constant(ball16, (0.0, 0.0, 1.0))
    with pytest.raises(ValueError):
        beltrami_series(g, BeltramiConfig(30.0))
    with pytest.raises(SeriesDivergenceError):
        beltrami_series(g, BeltramiConfig(30.0, admissibility="none"))


def test_residual_of_exact_beltrami_field(box16):
    # w = (sin z, cos z, 0) satisfies curl w = w
    z = box16.points[:, 2]
    w = GridField(box16, "vector", np.stack([np.sin(z), np.cos(z), 0 * z], 1))
    assert beltrami_residual(w, 1.0) < 5e-3
    assert beltrami_residual(w, 0.5) > 0.3


def test_lp_norm_and_norm_estimates(ball16):
    v = np.ones((ball16.n_interior, 3))
    assert np.isclose(lp_norm(v, ball16.h), np.sqrt(3 * ball16.volume))
    r = estimate_r_norm(ball16, n_probe=2)
    assert 0.05 < r < 2.0
    bound, amax, details = operator_norm_bound(ball16.domain, ball16, n_fields=3, power_steps=2)
    assert bound >= r and np.isclose(amax, 1 / bound)
    with pytest.raises(ValueError):
        operator_norm_bound(ball16.domain, ball16, p=1.0)


def test_neumann_bvp_trace(ball16):
    mesh = ball16.domain.boundary
    a0 = mesh.normals @ np.array([0.0, 0.0, 1.0])
    w, rep = beltrami_neumann_bvp(a0, ball16, 0.2)
    assert rep.residuals["trace_error"] <= TOL_BELTRAMI
    w0, rep0 = beltrami_neumann_bvp(np.zeros(mesh.n_triangles), ball16, 0.2)
    assert w0.norm() == 0.0 and rep0.passed


def test_neumann_variant_on_random_harmonic(box16, rng):
    g = random_solenoidal(box16, rng)
    with pytest.raises(CompatibilityError):
        beltrami_series(g, BeltramiConfig(0.1, variant="neumann"))
