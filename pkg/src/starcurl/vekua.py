"""Vekua-type operators D - alpha and D + M^alpha, and static Maxwell fields.

For irrotational alpha = grad(phi)/phi, D - alpha = phi D phi^-1, so the
div-curl machinery solves it after a change of variables.  The D + M^alpha
case additionally needs the conductivity equation div(phi^2 grad w0) = f,
discretized here by finite volumes and solved by conjugate gradients.
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg

from .algebra import GridField, ScalarFunction, fd_curl, fd_div, fd_grad, interpolate
from .divcurl import CompatibilityError, _minus_t1, irrotational_defect, right_inverse_curl, solenoidal_defect
from .potentials import DEFAULT_CONFIG, VolumeOperatorConfig, gauss_legendre_01, quaternion_potential
from .report import SolveReport
from .tolerances import TOL_COMPAT, TOL_VEKUA

TOL_POS = 1e-8


class SolverError(RuntimeError):
    """An iterative solve did not converge."""


# -- antigradient -------------------------------------------------------------

def antigradient(u: GridField, a, x, n_nodes: int = 16, check_path: bool = True) -> np.ndarray:
    """A[u](x): integrals of u1, u2, u3 along the axis-parallel path a -> x.

    The path runs (a1,a2,a3) -> (x1,a2,a3) -> (x1,x2,a3) -> x; samples of u
    are interpolated trilinearly from the grid.
    """
    if u.rank != "vector":
        raise ValueError("antigradient needs a vector field")
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    lead = x.shape[:-1]
    xf = x.reshape(-1, 3)
    t, w = gauss_legendre_01(n_nodes)
    out = np.zeros(len(xf))
    start = np.tile(a, (len(xf), 1))
    for k in range(3):
        end = start.copy()
        end[:, k] = xf[:, k]
        pts = start[:, None, :] + t[None, :, None] * (end - start)[:, None, :]
        if check_path and u.grid.domain is not None:
            if not np.all(u.grid.domain.inside(pts.reshape(-1, 3))):
                raise ValueError("antigradient path leaves the domain")
        vals = interpolate(u, pts)[..., k]
        out += (xf[:, k] - a[k]) * (vals @ w)
        start = end
    return out.reshape(lead)


def phi_from_alpha(alpha: GridField, a=None, n_nodes: int = 16) -> GridField:
    """phi = exp(A[alpha]) on the voxel centers; grad(phi)/phi = alpha."""
    grid = alpha.grid
    if a is None:
        a = grid.domain.center if grid.domain is not None else np.zeros(3)
    return GridField(grid, "scalar", np.exp(antigradient(alpha, a, grid.points, n_nodes)))


@dataclass(frozen=True, eq=False)
class IrrotationalCoefficient:
    alpha: GridField
    anchor: np.ndarray | None = None
    phi: GridField | None = None
    tol_compat: float = TOL_COMPAT

    def __post_init__(self):
        if self.alpha.rank != "vector":
            raise ValueError("alpha must be a vector field")
        defect = irrotational_defect(self.alpha)
        if defect > self.tol_compat:
            raise CompatibilityError(f"alpha is not irrotational: relative fd curl {defect:.3e}")
        anchor = self.anchor
        if anchor is None:
            dom = self.alpha.grid.domain
            anchor = dom.center if dom is not None else np.zeros(3)
        object.__setattr__(self, "anchor", np.asarray(anchor, dtype=float))
        if self.phi is None:
            object.__setattr__(self, "phi", phi_from_alpha(self.alpha, self.anchor))
        if np.any(self.phi.values <= 0):
            raise ValueError("phi must be positive")

    @classmethod
    def from_phi(cls, phi: GridField, grad_phi: np.ndarray) -> "IrrotationalCoefficient":
        """Build from a known positive phi and its gradient at the voxel centers."""
        alpha = GridField(phi.grid, "vector", grad_phi / phi.values[:, None])
        return cls(alpha, phi=phi)

    @property
    def grad_phi(self) -> np.ndarray:
        return self.phi.values[:, None] * self.alpha.values


def phi_teodorescu(w: GridField, phi: GridField, x=None, cfg: VolumeOperatorConfig = DEFAULT_CONFIG):
    """T_phi[w](x) = phi(x) T[w / phi](x), a right inverse of D - grad(phi)/phi."""
    if np.any(phi.values <= 0):
        raise ValueError("phi must be positive")
    q = w.as_quaternion().values / phi.values[:, None]
    if x is None:
        vals = phi.values[:, None] * quaternion_potential(w.grid, q, w.grid.points, cfg)
        return GridField(w.grid, "quaternion", vals)
    px = interpolate(phi, x)
    return px[..., None] * quaternion_potential(w.grid, q, x, cfg)


def d_minus_alpha(w: GridField, alpha: GridField) -> GridField:
    """(D - alpha) w for a vector or quaternion field w (left multiplication by alpha)."""
    q = w.as_quaternion()
    s, v = q.scalar_part(), q.vector_part()
    div, curl, grad = fd_div(v), fd_curl(v), fd_grad(s)
    a = alpha.values
    out = np.zeros_like(q.values)
    out[:, 0] = -div.values + np.einsum("ij,ij->i", a, v.values)
    out[:, 1:] = grad.values + curl.values - s.values[:, None] * a - np.cross(a, v.values)
    return GridField(w.grid, "quaternion", out, div.accurate & grad.accurate)


def d_plus_m(w: GridField, alpha: GridField) -> GridField:
    """(D + M^alpha) w = D w + w alpha for a vector field w (right multiplication)."""
    div, curl = fd_div(w), fd_curl(w)
    a = alpha.values
    out = np.zeros((w.grid.n_interior, 4))
    out[:, 0] = -div.values - np.einsum("ij,ij->i", w.values, a)
    out[:, 1:] = curl.values + np.cross(w.values, a)
    return GridField(w.grid, "quaternion", out, div.accurate)


def _interior_mask(grid, layers: float = 2.0, acc=None):
    m = grid.distance_to_boundary() >= layers * grid.h if grid.domain is not None else np.ones(grid.n_interior, bool)
    return m if acc is None else m & acc


def _rel(values, mask, scale) -> float:
    return float(np.sqrt(np.sum(values[mask] ** 2)) / max(scale, np.finfo(float).eps))


def _check_weighted_compat(g: GridField, coeff: IrrotationalCoefficient, tol: float):
    """div g = alpha . g  <=>  g / phi is solenoidal."""
    v = g.as_quaternion().vector_part()
    if v.norm() == 0.0:
        return 0.0
    scaled = GridField(g.grid, "vector", v.values / coeff.phi.values[:, None])
    defect = solenoidal_defect(scaled)
    if defect > tol:
        raise CompatibilityError(f"compatibility div g = alpha.g violated (relative defect {defect:.3e})")
    return defect


def solve_d_minus_alpha(g: GridField, coeff: IrrotationalCoefficient, gauge: ScalarFunction | None = None,
                        cfg: VolumeOperatorConfig = DEFAULT_CONFIG, tol_compat: float = TOL_COMPAT):
    """Vector w with (D - alpha) w = g, i.e. div w - alpha.w = -g0, curl w - alpha x w = g_vec.

    w = phi (T1[g0/phi] + R[g_vec/phi] + grad h).
    Returns (w, report).
    """
    grid = g.grid
    q = g.as_quaternion()
    report = SolveReport("d_minus_alpha")
    report.record("compatibility_defect", _check_weighted_compat(q, coeff, tol_compat))
    phi = coeff.phi.values
    v = np.zeros((grid.n_interior, 3))
    g0 = q.values[:, 0] / phi
    if np.any(g0 != 0):
        v -= _minus_t1(GridField(grid, "scalar", g0), grid.points, cfg)
    gv = GridField(grid, "vector", q.values[:, 1:] / phi[:, None])
    if gv.norm() > 0:
        v += right_inverse_curl(gv, None, cfg, check=False).values
    if gauge is not None:
        v += gauge.grad(grid.points)
    w = GridField(grid, "vector", phi[:, None] * v)
    a = coeff.alpha.values
    div, curl = fd_div(w), fd_curl(w)
    m = _interior_mask(grid, acc=div.accuracy_mask)
    scale = np.sqrt(np.sum(q.values[m] ** 2))
    r1 = div.values - np.einsum("ij,ij->i", a, w.values) + q.values[:, 0]
    r2 = curl.values - np.cross(a, w.values) - q.values[:, 1:]
    report.check("div_residual", _rel(r1, m, scale), TOL_VEKUA)
    report.check("curl_residual", _rel(r2, m, scale), TOL_VEKUA)
    return w, report.stop()


# -- conductivity equation -----------------------------------------------------

def _boundary_fraction(domain, x0: np.ndarray, x1: np.ndarray, iters: int = 40) -> np.ndarray:
    """Fraction theta in (0, 1] of the segment x0 -> x1 at which it leaves the domain."""
    lo = np.zeros(len(x0))
    hi = np.ones(len(x0))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        inside = domain.inside(x0 + mid[:, None] * (x1 - x0))
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return 0.5 * (lo + hi)


_NEIGHBORS: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def axis_neighbors(grid, dirichlet: str = "boundary", theta_min: float = 1e-3) -> dict:
    """For each (axis, +-1): neighbor index (-1 if exterior) and the boundary distance in units of h.

    With ``cell`` the zero Dirichlet value sits at the exterior cell center
    (theta = 1); with ``boundary`` it sits where the axis segment leaves the
    domain.
    """
    if dirichlet not in ("boundary", "cell"):
        raise ValueError(f"unknown dirichlet mode {dirichlet!r}")
    cache = _NEIGHBORS.setdefault(grid, {})
    key = (dirichlet, theta_min)
    if key in cache:
        return cache[key]
    idx = grid.index
    n = grid.n_interior
    dims = np.array(grid.dims)
    out = {}
    for ax in range(3):
        for sgn in (1, -1):
            j = idx.copy()
            j[:, ax] += sgn
            ok = np.all((j >= 0) & (j < dims), axis=1)
            nb = np.full(n, -1, dtype=np.int64)
            nb[ok] = grid.lookup[tuple(j[ok].T)]
            theta = np.ones(n)
            ext = np.nonzero(nb < 0)[0]
            if len(ext) and dirichlet == "boundary" and grid.domain is not None:
                x0 = grid.points[ext]
                x1 = x0.copy()
                x1[:, ax] += sgn * grid.h
                theta[ext] = np.maximum(_boundary_fraction(grid.domain, x0, x1), theta_min)
            out[ax, sgn] = (nb, theta)
    cache[key] = out
    return out


def conductivity_matrix(sigma: np.ndarray, grid, dirichlet: str = "boundary", theta_min: float = 1e-3):
    """SPD matrix A with (A u)_i ~ -div(sigma grad u) and u = 0 on the boundary.

    Interior faces use the harmonic mean of the two cell coefficients; faces
    to exterior cells see the zero Dirichlet value at distance theta h.
    """
    n = grid.n_interior
    h2 = grid.h**2
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    for (ax, sgn), (nb, theta) in axis_neighbors(grid, dirichlet, theta_min).items():
        i_in = np.nonzero(nb >= 0)[0]
        si, sj = sigma[i_in], sigma[nb[i_in]]
        k = 2.0 * si * sj / (si + sj) / h2
        diag[i_in] += k
        rows.append(i_in)
        cols.append(nb[i_in])
        vals.append(-k)
        i_out = np.nonzero(nb < 0)[0]
        diag[i_out] += sigma[i_out] / (theta[i_out] * h2)
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag)
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))


def _lagrange_slope(nodes, values):
    """d/dx at 0 of the quadratic through three (node, value) pairs, vectorized."""
    (a, fa), (b, fb), (c, fc) = zip(nodes, values)
    return (fa * (b + c) / ((a - b) * (a - c)) * -1.0
            + fb * (a + c) / ((b - a) * (b - c)) * -1.0
            + fc * (a + b) / ((c - a) * (c - b)) * -1.0)


def dirichlet_grad(u: GridField, dirichlet: str = "boundary", theta_switch: float = np.inf) -> GridField:
    """Gradient of a field that vanishes on the boundary.

    Central differences inside.  Cells next to the boundary use a one-sided
    second-order stencil pointing inward when the crossing is closer than
    ``theta_switch`` h (by default always), otherwise, and in cells too thin
    for the one-sided stencil, a three-point stencil through the crossing
    point where u = 0.  Dividing by a small theta h amplifies the O(h^2)
    error of u, which costs about half an order in L2.
    """
    grid = u.grid
    nbrs = axis_neighbors(grid, dirichlet)
    v = u.values
    h = grid.h
    out = np.zeros((grid.n_interior, 3))
    for ax in range(3):
        nbp, thp = nbrs[ax, 1]
        nbm, thm = nbrs[ax, -1]
        fp = np.where(nbp >= 0, v[np.maximum(nbp, 0)], 0.0)
        fm = np.where(nbm >= 0, v[np.maximum(nbm, 0)], 0.0)
        b = np.where(nbp >= 0, 1.0, thp) * h
        a = -np.where(nbm >= 0, 1.0, thm) * h
        g = _lagrange_slope((a, 0.0, b), (fm, v, fp))
        # one-sided replacements; the second neighbor must exist
        for sgn, near_ext, th, nb1, f1 in ((1, nbp < 0, thp, nbm, fm), (-1, nbm < 0, thm, nbp, fp)):
            nb2 = np.where(nb1 >= 0, nbrs[ax, -sgn][0][np.maximum(nb1, 0)], -1)
            use = near_ext & (th < theta_switch) & (nb1 >= 0) & (nb2 >= 0)
            if use.any():
                i = np.nonzero(use)[0]
                f2 = v[nb2[i]]
                g[i] = _lagrange_slope((0.0, -sgn * h, -2 * sgn * h), (v[i], f1[i], f2))
        out[:, ax] = g
    return GridField(grid, "vector", out)


def solve_divergence_form(sigma: GridField, rhs: GridField, dirichlet: str = "boundary", rtol: float = 1e-10,
                          maxiter: int | None = None):
    """u with div(sigma grad u) = rhs in the domain and u = 0 on its boundary. Returns (u, report)."""
    if sigma.grid is not rhs.grid:
        raise ValueError("sigma and rhs live on different grids")
    if np.any(sigma.values <= 0):
        raise ValueError("conductivity coefficient must be positive")
    report = SolveReport("conductivity", config={"dirichlet": dirichlet, "rtol": rtol})
    b = -np.asarray(rhs.values, dtype=float)
    if not np.any(b):
        report.record("iterations", 0)
        report.check("relative_residual", 0.0, rtol)
        return GridField(rhs.grid, "scalar", np.zeros_like(b)), report.stop()
    A = conductivity_matrix(sigma.values, rhs.grid, dirichlet)
    dinv = 1.0 / A.diagonal()
    M = LinearOperator(A.shape, matvec=lambda r: dinv * r, dtype=float)
    history = []
    u, info = cg(A, b, rtol=rtol, atol=0.0, M=M, maxiter=maxiter or 20 * A.shape[0],
                 callback=lambda xk: history.append(xk.copy()) if len(history) < 2000 else None)
    res = np.linalg.norm(A @ u - b) / np.linalg.norm(b)
    report.record("iterations", len(history))
    report.record("n_unknowns", A.shape[0])
    # energy norm of the error (against the converged iterate) must not increase
    if len(history) > 1:
        e = [float((xk - u) @ (A @ (xk - u))) for xk in history[:: max(1, len(history) // 50)]]
        report.record("energy_monotone", bool(np.all(np.diff(e) <= 1e-12 * max(e[0], 1e-300))))
    report.check("relative_residual", res, max(rtol * 10, 1e-12))
    if info != 0:
        raise SolverError(f"CG did not converge (info={info}, relative residual {res:.2e})")
    return GridField(rhs.grid, "scalar", u), report.stop()


def solve_conductivity(phi: GridField, rhs: GridField, dirichlet: str = "boundary", rtol: float = 1e-10):
    """w0 with div(phi^2 grad w0) = rhs, w0 = 0 on the boundary. Returns (w0, report)."""
    if np.any(phi.values <= 0):
        raise ValueError("phi must be positive")
    return solve_divergence_form(GridField(phi.grid, "scalar", phi.values**2), rhs, dirichlet, rtol)


def solve_d_plus_M(g: GridField, coeff: IrrotationalCoefficient, cfg: VolumeOperatorConfig = DEFAULT_CONFIG,
                   dirichlet: str = "boundary", tol_compat: float = TOL_COMPAT):
    """Vector w with (D + M^alpha) w = g, i.e. div w + alpha.w = -g0, curl w + w x alpha = g_vec.

    w* = phi R[g_vec/phi], div(phi^2 grad w0) = phi g0 + 2 grad(phi).w*, w = w* - phi grad w0.
    Returns (w, report).
    """
    grid = g.grid
    q = g.as_quaternion()
    report = SolveReport("d_plus_M")
    report.record("compatibility_defect", _check_weighted_compat(q, coeff, tol_compat))
    phi = coeff.phi.values
    gv = GridField(grid, "vector", q.values[:, 1:] / phi[:, None])
    wstar = np.zeros((grid.n_interior, 3))
    if gv.norm() > 0:
        wstar = phi[:, None] * right_inverse_curl(gv, None, cfg, check=False).values
    rhs = phi * q.values[:, 0] + 2.0 * np.einsum("ij,ij->i", coeff.grad_phi, wstar)
    w0, crep = solve_conductivity(coeff.phi, GridField(grid, "scalar", rhs), dirichlet)
    w = GridField(grid, "vector", wstar - phi[:, None] * dirichlet_grad(w0, dirichlet).values)
    report.record("cg_iterations", crep.info["iterations"])
    res = d_plus_m(w, coeff.alpha)
    m = _interior_mask(grid, acc=res.accuracy_mask)
    scale = np.sqrt(np.sum(q.values[m] ** 2))
    # scalar part of (D + M^alpha) w is -(div w + alpha.w) = g0
    r = res.values - q.values
    report.check("div_residual", _rel(r[:, 0], m, scale), TOL_VEKUA)
    report.check("curl_residual", _rel(r[:, 1:], m, scale), TOL_VEKUA)
    return w, report.stop()


# -- static Maxwell --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MaxwellMedium:
    eps: GridField
    mu: GridField
    rho: GridField
    j: GridField
    grad_eps: np.ndarray | None = None
    grad_mu: np.ndarray | None = None
    tol_compat: float = TOL_COMPAT
    tol_pos: float = TOL_POS

    def __post_init__(self):
        grid = self.eps.grid
        for f in (self.mu, self.rho, self.j):
            if f.grid is not grid:
                raise ValueError("medium fields live on different grids")
        if self.eps.values.min() <= self.tol_pos or self.mu.values.min() <= self.tol_pos:
            raise ValueError("permittivity and permeability must be bounded away from zero")
        if self.j.rank != "vector" or self.rho.rank != "scalar":
            raise ValueError("rho must be scalar and j vector")
        if self.j.norm() > 0:
            defect = solenoidal_defect(self.j)
            if defect > self.tol_compat:
                raise CompatibilityError(f"current density is not solenoidal (relative defect {defect:.3e})")

    def gradient(self, which: str) -> np.ndarray:
        given = self.grad_eps if which == "eps" else self.grad_mu
        if given is not None:
            return np.asarray(given, dtype=float)
        return fd_grad(self.eps if which == "eps" else self.mu).values


def solve_maxwell_static(medium: MaxwellMedium, cfg: VolumeOperatorConfig = DEFAULT_CONFIG,
                         dirichlet: str = "boundary"):
    """E = -grad h1, H = R[j] - grad h2 with div(eps grad h1) = -rho, div(mu grad h2) = grad(mu).R[j].

    Returns (E, H, report).
    """
    grid = medium.eps.grid
    report = SolveReport("maxwell_static")
    h1, r1 = solve_divergence_form(medium.eps, medium.rho * -1.0, dirichlet)
    E = GridField(grid, "vector", -dirichlet_grad(h1, dirichlet).values)
    Rj = np.zeros((grid.n_interior, 3))
    if medium.j.norm() > 0:
        Rj = right_inverse_curl(medium.j, None, cfg, check=False).values
    gmu = medium.gradient("mu")
    h2, r2 = solve_divergence_form(medium.mu, GridField(grid, "scalar", np.einsum("ij,ij->i", gmu, Rj)), dirichlet)
    H = GridField(grid, "vector", Rj - dirichlet_grad(h2, dirichlet).values)
    report.record("cg_iterations", [r1.info["iterations"], r2.info["iterations"]])

    se, sm = np.sqrt(medium.eps.values), np.sqrt(medium.mu.values)
    a_eps = GridField(grid, "vector", medium.gradient("eps") / (2 * medium.eps.values[:, None]))
    a_mu = GridField(grid, "vector", gmu / (2 * medium.mu.values[:, None]))
    resE = d_plus_m(GridField(grid, "vector", se[:, None] * E.values), a_eps).values.copy()
    resE[:, 0] += medium.rho.values / se
    resH = d_plus_m(GridField(grid, "vector", sm[:, None] * H.values), a_mu).values.copy()
    resH[:, 1:] -= sm[:, None] * medium.j.values
    m = _interior_mask(grid, acc=fd_div(E).accuracy_mask & fd_div(H).accuracy_mask)
    scale = np.sqrt(np.sum(medium.rho.values[m] ** 2)) + np.sqrt(np.sum(medium.j.values[m] ** 2))
    report.check("electric_residual", _rel(resE, m, scale), TOL_VEKUA)
    report.check("magnetic_residual", _rel(resH, m, scale), TOL_VEKUA)
    return E, H, report.stop()
