"""Self-check of module invariants on a given grid; backs the ``verify`` subcommand."""
from __future__ import annotations

import numpy as np

from .algebra import GridField, fd_curl, fd_div, moisil_teodorescu, quat_mul
from .beltrami import BeltramiConfig, beltrami_series
from .bvp import kernel_t0_diagnostic, neumann_correction
from .divcurl import double_curl_inverse, right_inverse_curl
from .fields import bump_quaternion, constant, random_solenoidal
from .geometry import normal_trace, surface_integral
from .potentials import DEFAULT_CONFIG, quaternion_potential
from .report import SolveReport
from .tolerances import TOL_QUAD, TOL_VEKUA, tol_op
from .vekua import IrrotationalCoefficient, antigradient, d_minus_alpha, solve_conductivity, solve_d_plus_M


def _rel(a, b, m=None):
    a, b = np.asarray(a), np.asarray(b)
    if m is not None:
        a, b = a[m], b[m]
    return float(np.sqrt(np.sum((a - b) ** 2)) / max(np.sqrt(np.sum(b**2)), 1e-300))


def _inner(grid, layers=2.0):
    return grid.distance_to_boundary() >= layers * grid.h


def check_algebra(rng) -> SolveReport:
    r = SolveReport("algebra")
    e = np.eye(4)
    r.check("e1e2_minus_e3", float(np.abs(quat_mul(e[1], e[2]) - e[3]).max()), 1e-15)
    r.check("e1e1_plus_1", float(np.abs(quat_mul(e[1], e[1]) + e[0]).max()), 1e-15)
    p, q = rng.normal(size=(2, 50, 4))
    nr = np.linalg.norm(quat_mul(p, q), axis=-1) / (np.linalg.norm(p, axis=-1) * np.linalg.norm(q, axis=-1))
    r.check("norm_multiplicative", float(np.abs(nr - 1).max()), 1e-12)
    return r.stop()


def check_geometry(grid) -> SolveReport:
    r = SolveReport("geometry")
    dom = grid.domain
    mesh = dom.boundary
    # one cell layer of surface area bounds the staircase error
    r.check("voxel_volume", abs(grid.volume - dom.volume) / dom.volume, grid.h * mesh.total_area / dom.volume)
    flux = surface_integral(normal_trace(np.tile([0.3, -0.2, 0.7], (mesh.n_triangles, 1)), mesh), mesh)
    r.check("divergence_theorem_constant", abs(flux) / mesh.total_area, 1e-2)
    return r.stop()


def _inradius(grid) -> float:
    dom = grid.domain
    return float(np.min(np.linalg.norm(dom.boundary.points - dom.center, axis=1)))


def check_potentials(grid, cfg) -> SolveReport:
    r = SolveReport("potentials")
    dom = grid.domain
    c = np.array([1.0, -2.0, 0.5])
    x = grid.points - dom.center
    if dom.kind == "ball":
        rad = dom.params.get("radius", 1.0)
        probes = grid.points[np.linalg.norm(x, axis=1) <= 0.8 * rad]
        y = probes - dom.center
        exact = np.concatenate([(y @ c)[:, None], -np.cross(y, c)], axis=1) / 3.0
        got = quaternion_potential(grid, np.tile(np.r_[0.0, c], (grid.n_interior, 1)), probes, cfg)
        r.check("teodorescu_constant", float(np.abs(got - exact).max() / np.abs(exact).max()), 5e-2)
    # Borel-Pompeiu for a field supported well inside: T[Dw] = w
    w, Dw = bump_quaternion(grid.points, c, 0.6 * _inradius(grid), 4, dom.center)
    tw = quaternion_potential(grid, Dw, grid.points, cfg)
    r.check("borel_pompeiu", _rel(tw, w), tol_op(grid.h, cfg.ray_nodes))
    return r.stop()


def check_divcurl(grid, cfg, rng) -> SolveReport:
    r = SolveReport("divcurl")
    g = random_solenoidal(grid, rng)
    R = right_inverse_curl(g, None, cfg)
    m = _inner(grid) & fd_div(R).accuracy_mask
    tol = tol_op(grid.h, cfg.ray_nodes)
    r.check("curl_R_minus_g", _rel(fd_curl(R).values, g.values, m), tol)
    r.check("div_R", float(np.sqrt(np.sum(fd_div(R).values[m] ** 2)) / np.sqrt(np.sum(g.values[m] ** 2))), tol)
    S = double_curl_inverse(g, None, cfg, check=False)
    cc = fd_curl(fd_curl(S))
    m2 = _inner(grid, 3.0) & cc.accuracy_mask
    r.check("curl_curl_S_minus_g", _rel(cc.values, g.values, m2), tol)
    return r.stop()


def check_bvp(grid, cfg, rng) -> SolveReport:
    r = SolveReport("bvp")
    g = random_solenoidal(grid, rng)
    corr = neumann_correction(g, cfg)
    r.check("neumann_trace_reduction_inverse", corr.trace_after / max(corr.trace_before, 1e-300), 0.1)
    k = kernel_t0_diagnostic(constant(grid, (0.0, 0.0, 1.0)), cfg=cfg)
    r.check("kernel_t0_consistency", k.residuals["consistency"], 0.5)
    return r.stop()


def check_beltrami(grid, cfg, alpha0) -> SolveReport:
    bcfg = BeltramiConfig(alpha0, volume=cfg)
    _, rep, _ = beltrami_series(constant(grid, (0.0, 0.0, 1.0)), bcfg)
    r = SolveReport("beltrami")
    ratios = rep.info.get("ratios", [])
    r.check("max_term_ratio", max(ratios) if ratios else 0.0, 0.7)
    r.check("beltrami_residual", rep.residuals["beltrami_residual"], rep.tolerances["beltrami_residual"])
    return r.stop()


def check_vekua(grid, cfg) -> SolveReport:
    r = SolveReport("vekua")
    dom = grid.domain
    x = grid.points - dom.center
    # conductivity: manufactured u = (R^2 - |x|^2) x1 only vanishes on a ball; use the discrete rhs otherwise
    phi = GridField(grid, "scalar", np.exp(x[:, 0]))
    if dom.kind == "ball":
        rad = dom.params.get("radius", 1.0)
        r2 = np.sum(x**2, axis=1)
        rhs = np.exp(2 * x[:, 0]) * (-10 * x[:, 0] + 2 * (rad**2 - r2 - 2 * x[:, 0] ** 2))
        u, _ = solve_conductivity(phi, GridField(grid, "scalar", rhs))
        r.check("conductivity_manufactured", _rel(u.values, (rad**2 - r2) * x[:, 0]), TOL_VEKUA)
    # phi-factorization (D - grad phi/phi)[phi q] = phi D q
    coeff = IrrotationalCoefficient.from_phi(phi, phi.values[:, None] * np.array([1.0, 0.0, 0.0]))
    q = np.stack([np.sin(x[:, 1]), x[:, 0] * x[:, 2], np.cos(x[:, 0]), x[:, 1] ** 2], axis=1)
    lhs = d_minus_alpha(GridField(grid, "quaternion", phi.values[:, None] * q), coeff.alpha)
    rhs = moisil_teodorescu(GridField(grid, "quaternion", q))
    m = lhs.accuracy_mask & rhs.accuracy_mask
    r.check("phi_factorization", _rel(lhs.values, phi.values[:, None] * rhs.values, m), tol_op(grid.h, cfg.ray_nodes))
    # antigradient of grad f recovers f - f(center)
    f = x[:, 0] * x[:, 1] + np.sin(x[:, 2])
    A = antigradient(GridField(grid, "vector", np.stack([x[:, 1], x[:, 0], np.cos(x[:, 2])], axis=1)), dom.center,
                     grid.points, check_path=False)
    r.check("antigradient", _rel(A, f), TOL_QUAD)
    # D + M^alpha with a vector right-hand side
    g = GridField(grid, "quaternion", np.concatenate([np.zeros((grid.n_interior, 1)),
                                                       phi.values[:, None] * np.array([[0.0, 0.0, 1.0]])], axis=1))
    _, rep = solve_d_plus_M(g, coeff, cfg)
    for key in ("div_residual", "curl_residual"):
        r.check(f"d_plus_M_{key}", rep.residuals[key], rep.tolerances[key])
    return r.stop()


def run_verification(grid, cfg=DEFAULT_CONFIG, rng=None, alpha0: float = 0.2) -> list[SolveReport]:
    rng = rng if rng is not None else np.random.default_rng(0)
    return [
        check_algebra(rng),
        check_geometry(grid),
        check_potentials(grid, cfg),
        check_divcurl(grid, cfg, rng),
        check_bvp(grid, cfg, rng),
        check_beltrami(grid, cfg, alpha0),
        check_vekua(grid, cfg),
    ]
