"""Boundary corrections of the curl right inverse.

Neumann: R_n[g] = R[g] + grad h with h harmonic and dh/deta = -R[g].eta.
Dirichlet: R_0[g] = T2[g] - grad p with p biharmonic and grad p = T2[g] on
the boundary.  h and p are global polynomial least-squares fits collocated
at the boundary quadrature nodes.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import null_space

from . import _poly
from .algebra import GridField, interpolate
from .divcurl import CompatibilityError, RayIntegrals, _t2, _targets, _wrap, check_solenoidal, right_inverse_curl
from .geometry import BoundaryMesh, StarDomain
from .potentials import DEFAULT_CONFIG, VolumeOperatorConfig, t0_array
from .report import SolveReport
from .tolerances import TOL_BVP, TOL_COMPAT


DEFAULT_DEGREE = 10


class PolynomialBasis:
    """Polynomials in y = (x - center) / scale given as coefficient columns over monomials."""

    kind = "polynomial"

    def __init__(self, degree: int, coef: np.ndarray, center, scale: float):
        self.degree = degree
        self.exps = _poly.exponents(degree)
        self.coef = coef
        self.center = np.asarray(center, dtype=float)
        self.scale = float(scale)

    def __len__(self) -> int:
        return self.coef.shape[1]

    def _y(self, x):
        return (np.asarray(x, dtype=float) - self.center) / self.scale

    def values(self, x) -> np.ndarray:
        return _poly.monomials(self._y(x), self.exps) @ self.coef

    def gradients(self, x) -> np.ndarray:
        """(..., K, 3)"""
        g = _poly.monomial_gradients(self._y(x), self.exps)
        return np.swapaxes(np.swapaxes(g, -1, -2) @ self.coef, -1, -2) / self.scale

    def laplacian_coef(self) -> np.ndarray:
        return _poly.laplacian_matrix(self.exps, self.exps) @ self.coef / self.scale**2


@lru_cache(maxsize=None)
def _harmonic_coef(degree: int, with_constant: bool) -> np.ndarray:
    exps = _poly.exponents(degree)
    look = _poly.index_of(exps)
    cols = []
    for d in range(0 if with_constant else 1, degree + 1):
        src = _poly.exponents(d, exact=True)
        if d < 2:
            ns = np.eye(len(src))
        else:
            ns = null_space(_poly.laplacian_matrix(src, _poly.exponents(d - 2, exact=True)))
        block = np.zeros((len(exps), ns.shape[1]))
        for i, e in enumerate(src):
            block[look[tuple(int(v) for v in e)]] = ns[i]
        cols.append(block)
    out = np.concatenate(cols, axis=1)
    out.setflags(write=False)
    return out


class HarmonicBasis(PolynomialBasis):
    """Solid harmonic polynomials of degree 1..N (constant excluded): (N+1)^2 - 1 functions."""

    kind = "harmonic"

    def __init__(self, degree: int = DEFAULT_DEGREE, center=(0.0, 0.0, 0.0), scale: float = 1.0):
        if degree < 1:
            raise ValueError("harmonic basis degree must be >= 1")
        super().__init__(degree, _harmonic_coef(degree, with_constant=False), center, scale)


class BiharmonicBasis(PolynomialBasis):
    """Almansi basis: harmonics of degree 1..N and |y|^2 times harmonics of degree 0..N-2."""

    kind = "biharmonic"

    def __init__(self, degree: int = DEFAULT_DEGREE, center=(0.0, 0.0, 0.0), scale: float = 1.0):
        if degree < 1:
            raise ValueError("biharmonic basis degree must be >= 1")
        exps = _poly.exponents(degree)
        harm = _harmonic_coef(degree, with_constant=False)
        parts = [harm]
        if degree >= 2:
            low = _poly.exponents(degree - 2)
            h_low = _harmonic_coef(degree - 2, with_constant=True)
            parts.append(_poly.times_r2(h_low, low, exps))
        super().__init__(degree, np.concatenate(parts, axis=1), center, scale)


class ExteriorHarmonicBasis(PolynomialBasis):
    """Decaying harmonics |y|^(-2l-1) H_l(y), l = 0..N (Kelvin transforms of solid harmonics)."""

    kind = "exterior"

    def __init__(self, degree: int = DEFAULT_DEGREE, center=(0.0, 0.0, 0.0), scale: float = 1.0):
        coef = _harmonic_coef(degree, with_constant=True)
        super().__init__(degree, coef, center, scale)
        exps = self.exps
        self.level = np.array([int(exps[np.argmax(np.abs(c))].sum()) for c in coef.T])

    def values(self, x) -> np.ndarray:
        y = self._y(x)
        r2 = np.einsum("...i,...i->...", y, y)[..., None]
        return (_poly.monomials(y, self.exps) @ self.coef) * r2 ** (-(self.level + 0.5))

    def gradients(self, x) -> np.ndarray:
        y = self._y(x)
        r2 = np.einsum("...i,...i->...", y, y)[..., None]
        H = _poly.monomials(y, self.exps) @ self.coef  # (..., K)
        dH = np.swapaxes(np.swapaxes(_poly.monomial_gradients(y, self.exps), -1, -2) @ self.coef, -1, -2)
        fac = r2 ** (-(self.level + 0.5))
        g = fac[..., None] * dH - ((2 * self.level + 1) * fac / r2 * H)[..., None] * y[..., None, :]
        return g / self.scale


BASES = {"harmonic": HarmonicBasis, "biharmonic": BiharmonicBasis, "exterior": ExteriorHarmonicBasis}


def basis_for(domain: StarDomain, kind: str = "harmonic", degree: int = DEFAULT_DEGREE) -> PolynomialBasis:
    v = domain.boundary.vertices
    scale = float(np.max(np.linalg.norm(v - domain.center, axis=1)))
    return BASES[kind](degree, domain.center, scale)


@dataclass(frozen=True)
class PolynomialFit:
    """A fitted function sum_k a_k b_k(x) with its residual report."""

    basis: PolynomialBasis
    weights: np.ndarray
    report: SolveReport

    def __call__(self, x) -> np.ndarray:
        return self.basis.values(x) @ self.weights

    def grad(self, x) -> np.ndarray:
        g = _poly.monomial_gradients(self.basis._y(x), self.basis.exps)
        if isinstance(self.basis, ExteriorHarmonicBasis):
            return np.einsum("...kj,k->...j", self.basis.gradients(x), self.weights)
        return np.swapaxes(g, -1, -2) @ (self.basis.coef @ self.weights) / self.basis.scale


def _weighted_lstsq(A: np.ndarray, b: np.ndarray, sw: np.ndarray, report: SolveReport):
    Aw = A * sw[:, None]
    bw = b * sw
    colnorm = np.linalg.norm(Aw, axis=0)
    if np.any(colnorm == 0):
        raise ValueError("rank-deficient boundary fit: a basis function vanishes on all nodes")
    sol, _, rank, sv = np.linalg.lstsq(Aw / colnorm, bw, rcond=None)
    cond = sv[0] / sv[-1] if sv[-1] > 0 else np.inf
    report.record("rank", int(rank))
    report.record("n_basis", A.shape[1])
    report.record("condition", float(cond))
    if rank < A.shape[1] or cond > 1e12:
        raise ValueError(f"rank-deficient boundary fit (rank {rank} of {A.shape[1]}, cond {cond:.2e})")
    return sol / colnorm


def boundary_l2(values: np.ndarray, mesh: BoundaryMesh) -> float:
    v = np.asarray(values, dtype=float).reshape(mesh.n_triangles, -1)
    return float(np.sqrt(np.sum(mesh.areas[:, None] * v**2)))


def solve_laplace_neumann(a0: np.ndarray, basis: HarmonicBasis, mesh: BoundaryMesh,
                          tol_compat: float = TOL_COMPAT) -> PolynomialFit:
    """Harmonic h with dh/deta = a0 at the boundary nodes (least squares, constant pinned to 0)."""
    a0 = np.asarray(a0, dtype=float)
    if a0.shape != (mesh.n_triangles,):
        raise ValueError(f"expected {mesh.n_triangles} boundary samples, got {a0.shape}")
    report = SolveReport("laplace_neumann")
    norm = boundary_l2(a0, mesh)
    flux = float(a0 @ mesh.areas)
    compat = abs(flux) / (np.sqrt(mesh.total_area) * norm) if norm > 0 else 0.0
    report.record("flux", flux)
    report.check("compatibility", compat, tol_compat)
    if compat > tol_compat:
        raise CompatibilityError(f"Neumann data has net flux {flux:.3e} (relative {compat:.2e} > {tol_compat:.1e})")
    if norm == 0.0:
        return PolynomialFit(basis, np.zeros(len(basis)), report.stop())
    A = np.einsum("nkj,nj->nk", basis.gradients(mesh.points), mesh.normals)
    w = _weighted_lstsq(A, a0, np.sqrt(mesh.areas), report)
    res = boundary_l2(A @ w - a0, mesh) / norm
    report.record("relative_boundary_residual", res)
    return PolynomialFit(basis, w, report.stop())


def solve_biharmonic_dirichlet(grad_data: np.ndarray, basis: PolynomialBasis, mesh: BoundaryMesh) -> PolynomialFit:
    """Biharmonic p with grad p = grad_data at the boundary nodes (least squares, constant pinned).

    With an ``ExteriorHarmonicBasis`` the same fit yields the exterior potential p*.
    """
    grad_data = np.asarray(grad_data, dtype=float)
    if grad_data.shape != (mesh.n_triangles, 3):
        raise ValueError(f"expected ({mesh.n_triangles}, 3) boundary samples, got {grad_data.shape}")
    report = SolveReport("biharmonic_dirichlet")
    norm = boundary_l2(grad_data, mesh)
    if norm == 0.0:
        return PolynomialFit(basis, np.zeros(len(basis)), report.stop())
    G = basis.gradients(mesh.points)  # (T, K, 3)
    A = np.transpose(G, (0, 2, 1)).reshape(-1, len(basis))
    sw = np.repeat(np.sqrt(mesh.areas), 3)
    w = _weighted_lstsq(A, grad_data.reshape(-1), sw, report)
    res = boundary_l2((A @ w).reshape(-1, 3) - grad_data, mesh) / norm
    report.record("relative_boundary_residual", res)
    return PolynomialFit(basis, w, report.stop())


@dataclass(frozen=True)
class NeumannCorrection:
    h: PolynomialFit
    trace_before: float  # ||R[g].eta||_2 on the boundary
    trace_after: float  # ||(R[g] + grad h).eta||_2 on the boundary


def neumann_correction(g: GridField, cfg: VolumeOperatorConfig = DEFAULT_CONFIG, degree: int = DEFAULT_DEGREE,
                       rays: RayIntegrals | None = None) -> NeumannCorrection:
    mesh = g.grid.domain.boundary
    rays = rays or RayIntegrals(g, cfg)
    Rb = right_inverse_curl(g, mesh.points, cfg, check=False, rays=rays)
    a0 = -np.einsum("ij,ij->i", Rb, mesh.normals)
    # the discrete trace carries a small net flux from quadrature error; project it out
    a0 = a0 - (a0 @ mesh.areas) / mesh.total_area
    h = solve_laplace_neumann(a0, basis_for(g.grid.domain, "harmonic", degree), mesh, tol_compat=np.inf)
    after = np.einsum("ij,ij->i", Rb + h.grad(mesh.points), mesh.normals)
    return NeumannCorrection(h, boundary_l2(a0, mesh), boundary_l2(after, mesh))


def right_inverse_curl_neumann(g: GridField, x=None, cfg: VolumeOperatorConfig = DEFAULT_CONFIG,
                               degree: int = DEFAULT_DEGREE, check: bool = True):
    """R_n[g] = R[g] + grad h, solenoidal with (numerically) vanishing normal trace."""
    if check:
        check_solenoidal(g)
    rays = RayIntegrals(g, cfg)
    corr = neumann_correction(g, cfg, degree, rays)
    pts = _targets(g.grid, x)
    vals = right_inverse_curl(g, pts, cfg, check=False, rays=rays) + corr.h.grad(pts)
    return _wrap(g.grid, x, vals)


def boundary_normal_trace(g: GridField) -> float:
    """||g.eta||_2 on the boundary with g interpolated from the grid."""
    mesh = g.grid.domain.boundary
    gb = interpolate(g, mesh.points)
    return boundary_l2(np.einsum("ij,ij->i", gb, mesh.normals), mesh)


def kernel_t0_diagnostic(g: GridField, mesh: BoundaryMesh | None = None, probes=None,
                         cfg: VolumeOperatorConfig = DEFAULT_CONFIG, tol: float = 1e-3,
                         tol_trace: float = TOL_BVP) -> SolveReport:
    """T0[g] vanishes inside iff g has zero normal trace: both small or both large."""
    report = SolveReport("kernel_t0")
    mesh = mesh or g.grid.domain.boundary
    if probes is None:
        d = g.grid.distance_to_boundary()
        probes = g.grid.points[d >= 2 * g.grid.h]
    gnorm = g.norm()
    t0max = float(np.max(np.abs(t0_array(g.grid, g.values, probes, cfg)))) / gnorm
    gb = interpolate(g, mesh.points)
    trace = boundary_l2(np.einsum("ij,ij->i", gb, mesh.normals), mesh) / gnorm
    small_t0, small_trace = t0max <= tol, trace <= tol_trace
    report.record("max_t0_over_norm_g", t0max)
    report.record("trace_over_norm_g", trace)
    report.record("t0_small", bool(small_t0))
    report.record("trace_small", bool(small_trace))
    report.check("consistency", 0.0 if small_t0 == small_trace else 1.0, 0.5)
    return report.stop()


def dirichlet_fit(g: GridField, cfg: VolumeOperatorConfig = DEFAULT_CONFIG, degree: int = DEFAULT_DEGREE,
                  kind: str = "biharmonic", t2_boundary=None) -> PolynomialFit:
    mesh = g.grid.domain.boundary
    data = _t2(g, mesh.points, cfg) if t2_boundary is None else t2_boundary
    return solve_biharmonic_dirichlet(data, basis_for(g.grid.domain, kind, degree), mesh)


def right_inverse_curl_dirichlet(g: GridField, x=None, cfg: VolumeOperatorConfig = DEFAULT_CONFIG,
                                 degree: int = DEFAULT_DEGREE, check: bool = True, tol_trace: float = TOL_COMPAT):
    """R_0[g] = T2[g] - grad p for solenoidal g with zero normal trace; vanishes on the boundary."""
    if check:
        check_solenoidal(g)
        tr = boundary_normal_trace(g) / max(g.norm(), 1e-300)
        if tr > tol_trace:
            raise CompatibilityError(f"g has nonzero normal trace ({tr:.3e} relative > {tol_trace:.1e})")
    mesh = g.grid.domain.boundary
    tb = _t2(g, mesh.points, cfg)
    p = dirichlet_fit(g, cfg, degree, t2_boundary=tb)
    pts = _targets(g.grid, x)
    out = _t2(g, pts, cfg)
    flat = out.reshape(-1, 3)
    xf = pts.reshape(-1, 3)
    inside = g.grid.domain.inside(xf) if x is not None else np.ones(len(xf), dtype=bool)
    if inside.any():
        flat[inside] -= p.grad(xf[inside])
    if not inside.all():
        # outside, grad p is replaced by the exterior antigradient p* of T2
        pe = dirichlet_fit(g, cfg, degree, kind="exterior", t2_boundary=tb)
        flat[~inside] -= pe.grad(xf[~inside])
    return _wrap(g.grid, x, out)
