"""Beltrami fields curl w = alpha0 w from the Neumann series sum_k (alpha0 R)^k g."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import GridField, fd_curl, fd_jacobian, interpolate
from .bvp import DEFAULT_DEGREE, basis_for, boundary_l2, right_inverse_curl_neumann, solve_laplace_neumann
from .divcurl import CompatibilityError, irrotational_defect, right_inverse_curl, solenoidal_defect
from .fields import random_solenoidal
from .potentials import DEFAULT_CONFIG, VolumeOperatorConfig, quaternion_potential
from .report import SolveReport
from .tolerances import TOL_BELTRAMI, TOL_COMPAT


class SeriesDivergenceError(RuntimeError):
    """Series terms stopped decaying geometrically."""


@dataclass(frozen=True)
class BeltramiConfig:
    alpha0: float
    k_max: int = 40
    tail_tol: float = 1e-8
    variant: str = "free"  # free: R, neumann: R_n
    admissibility: str = "empirical"  # empirical | bound | none
    safety: float = 2.0
    n_probe: int = 3
    degree: int = DEFAULT_DEGREE
    seed: int = 0
    volume: VolumeOperatorConfig = field(default_factory=lambda: DEFAULT_CONFIG)

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if not self.tail_tol > 0:
            raise ValueError("tail_tol must be positive")
        if self.variant not in ("free", "neumann"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.admissibility not in ("empirical", "bound", "none"):
            raise ValueError(f"unknown admissibility mode {self.admissibility!r}")


def lp_norm(values: np.ndarray, h: float, p: float = 2.0) -> float:
    v = np.asarray(values, dtype=float)
    mag = np.abs(v) if v.ndim == 1 else np.linalg.norm(v.reshape(len(v), -1), axis=1)
    return float(np.sum(mag**p * h**3) ** (1.0 / p))


def operator_norm_bound(domain, grid, p: float = 2.0, n_fields: int = 100, power_steps: int = 5,
                        safety: float = 2.0, seed: int = 0, cfg: VolumeOperatorConfig = DEFAULT_CONFIG):
    """Crude bound on ||R|| from empirical Teodorescu norms.

    ||R|| <= 2 max{||T||_p, ||T||_{p->W1p} Vol diam / (q+1)^(1/q)}; the two
    Teodorescu norms are randomized lower estimates inflated by ``safety``.
    Returns (bound_R, alpha_max, details) with alpha_max = 1 / bound_R.
    """
    if not p > 1:
        raise ValueError("p must exceed 1")
    if grid.n_interior < 8:
        raise ValueError("degenerate grid")
    rng = np.random.default_rng(seed)
    h = grid.h
    q = p / (p - 1.0)
    x = (grid.points - domain.center) / (0.5 * domain.diameter)
    best_T = best_W = 0.0
    for i in range(n_fields):
        if i % 2 == 0:
            # random quadratic quaternion polynomial
            coef = rng.normal(size=(10, 4))
            mono = np.stack([np.ones(len(x)), *x.T, x[:, 0] ** 2, x[:, 1] ** 2, x[:, 2] ** 2,
                             x[:, 0] * x[:, 1], x[:, 1] * x[:, 2], x[:, 0] * x[:, 2]], axis=1)
            w = mono @ coef
        else:
            w = rng.normal(size=(grid.n_interior, 4))
        for _ in range(power_steps):
            Tw = quaternion_potential(grid, w, grid.points, cfg)
            J, _ = fd_jacobian(GridField(grid, "quaternion", Tw))
            nw = lp_norm(w, h, p)
            rT = lp_norm(Tw, h, p) / nw
            rW = (lp_norm(Tw, h, p) ** p + lp_norm(J.reshape(len(J), -1), h, p) ** p) ** (1.0 / p) / nw
            best_T, best_W = max(best_T, rT), max(best_W, rW)
            w = Tw
    T_p, T_w = safety * best_T, safety * best_W
    vol, diam = domain.volume, domain.diameter
    qf = (q + 1.0) ** (1.0 / q)
    bound_R = 2.0 * max(T_p, T_w * vol * diam / qf)
    details = {"T_p": T_p, "T_w1p": T_w, "q_factor": qf, "volume": vol, "diameter": diam}
    return bound_R, 1.0 / bound_R, details


def estimate_r_norm(grid, n_probe: int = 3, seed: int = 0, cfg: VolumeOperatorConfig = DEFAULT_CONFIG) -> float:
    """Largest ||R[g]|| / ||g|| over random solenoidal polynomial fields (a lower estimate)."""
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(n_probe):
        g = random_solenoidal(grid, rng, degree=2)
        best = max(best, right_inverse_curl(g, None, cfg, check=False).norm() / g.norm())
    return best


def beltrami_residual(w: GridField, alpha0: float, mask=None) -> float:
    """||fd_curl w - alpha0 w|| / max(||w||, eps) over voxels with a full curl stencil."""
    c = fd_curl(w)
    m = c.accuracy_mask if mask is None else mask
    r = np.sqrt(np.sum((c.values[m] - alpha0 * w.values[m]) ** 2))
    return float(r / max(np.sqrt(np.sum(w.values[m] ** 2)), np.finfo(float).eps))


def _apply(term: GridField, cfg: BeltramiConfig, boundary_pts):
    if cfg.variant == "free":
        vol = right_inverse_curl(term, None, cfg.volume, check=False)
        bnd = None if boundary_pts is None else right_inverse_curl(term, boundary_pts, cfg.volume, check=False)
    else:
        vol = right_inverse_curl_neumann(term, None, cfg.volume, cfg.degree, check=False)
        bnd = None if boundary_pts is None else right_inverse_curl_neumann(term, boundary_pts, cfg.volume, cfg.degree, check=False)
    return vol, bnd


def beltrami_series(g: GridField, cfg: BeltramiConfig, g_boundary=None, boundary_pts=None,
                    tol_compat: float = TOL_COMPAT):
    """w = sum_{k=0}^K (alpha0 R)^k g, each term resampled on the grid.

    Returns (w, report, terms); ``terms`` holds the individual grid terms.
    When ``boundary_pts`` is given the series is also tracked there and the
    boundary values of w are recorded in ``report.info['boundary_values']``.
    """
    report = SolveReport("beltrami_series", config={"alpha0": cfg.alpha0, "variant": cfg.variant})
    sd, ir = solenoidal_defect(g), irrotational_defect(g)
    report.check("input_solenoidal_defect", sd, tol_compat)
    report.check("input_irrotational_defect", ir, tol_compat)
    if sd > tol_compat or ir > tol_compat:
        raise CompatibilityError(f"g must be solenoidal and irrotational (div {sd:.2e}, curl {ir:.2e})")
    a = abs(cfg.alpha0)
    if cfg.admissibility != "none" and a > 0:
        if cfg.admissibility == "bound":
            _, amax, _ = operator_norm_bound(g.grid.domain, g.grid, seed=cfg.seed, cfg=cfg.volume)
        else:
            amax = 1.0 / (cfg.safety * estimate_r_norm(g.grid, cfg.n_probe, cfg.seed, cfg.volume))
        report.record("alpha_max", amax)
        if a >= amax:
            raise ValueError(f"|alpha0| = {a} is not admissible (alpha_max = {amax:.4g}, mode {cfg.admissibility})")
    terms = [g]
    norms = [g.norm()]
    bterms = [None if boundary_pts is None else (interpolate(g, boundary_pts) if g_boundary is None else np.asarray(g_boundary))]
    w = g.values.copy()
    total = g.norm()
    term = g
    for k in range(1, cfg.k_max + 1):
        if norms[-1] == 0.0 or norms[-1] <= cfg.tail_tol * total:
            break
        nxt, bnd = _apply(term, cfg, boundary_pts)
        nxt = nxt * cfg.alpha0
        bterms.append(None if bnd is None else cfg.alpha0 * bnd)
        terms.append(nxt)
        norms.append(nxt.norm())
        ratio = norms[-1] / norms[-2]
        if ratio >= 1.0:
            raise SeriesDivergenceError(f"term {k} grew by a factor {ratio:.3f}; alpha0 too large for this grid")
        w = w + nxt.values
        total = np.sqrt(np.sum(w**2) * g.grid.cell_volume)
        term = nxt
    wf = GridField(g.grid, "vector", w)
    ratios = [norms[i + 1] / norms[i] for i in range(len(norms) - 1) if norms[i] > 0]
    report.record("term_norms", norms)
    report.record("ratios", ratios)
    report.record("n_terms", len(terms))
    report.record("term_div_defects", [solenoidal_defect(t) for t in terms[1:]])
    if ratios:
        report.check("max_ratio", max(ratios), 1.0)
    report.check("beltrami_residual", beltrami_residual(wf, cfg.alpha0), TOL_BELTRAMI)
    if boundary_pts is not None:
        report.record("boundary_values", sum(bterms))
    return wf, report.stop(), terms


def beltrami_neumann_bvp(a0: np.ndarray, grid, alpha0: float, cfg: BeltramiConfig | None = None):
    """Beltrami field with normal trace a0: g = grad h (h harmonic, dh/deta = a0), series in R_n."""
    cfg = cfg or BeltramiConfig(alpha0, variant="neumann")
    if cfg.variant != "neumann" or cfg.alpha0 != alpha0:
        cfg = BeltramiConfig(alpha0, cfg.k_max, cfg.tail_tol, "neumann", cfg.admissibility, cfg.safety,
                             cfg.n_probe, cfg.degree, cfg.seed, cfg.volume)
    mesh = grid.domain.boundary
    h = solve_laplace_neumann(a0, basis_for(grid.domain, "harmonic", cfg.degree), mesh)
    g = GridField(grid, "vector", h.grad(grid.points))
    if g.norm() == 0.0:
        report = SolveReport("beltrami_neumann_bvp")
        report.check("trace_error", 0.0, TOL_BELTRAMI)
        return g, report.stop()
    w, report, _ = beltrami_series(g, cfg, g_boundary=h.grad(mesh.points), boundary_pts=mesh.points)
    wb = report.info.pop("boundary_values")
    trace = np.einsum("ij,ij->i", wb, mesh.normals)
    err = boundary_l2(trace - a0, mesh) / max(boundary_l2(a0, mesh), np.finfo(float).eps)
    report.name = "beltrami_neumann_bvp"
    report.record("neumann_fit_residual", h.report.info.get("relative_boundary_residual", 0.0))
    report.check("trace_error", err, TOL_BELTRAMI)
    return w, report
