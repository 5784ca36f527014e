"""Volume and boundary integral operators on voxelized domains.

Volume integrals use the midpoint rule over interior voxels.  The singular
voxel is handled per ``VolumeOperatorConfig.singular_correction``:
``exclude_cell`` drops sources within h/2 of the target, ``equivalent_ball``
smears every source over a ball of volume h^3.  At voxel-center targets the
two agree for the Cauchy kernel; for the Newton kernel the smeared self term
is -u r_eq^2 / 2.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import map_coordinates, spline_filter

from . import _kernels
from .algebra import GridField, quat_mul
from .geometry import BoundaryMesh, VoxelGrid

_MODES = {"exclude_cell": 1, "equivalent_ball": 2}


@dataclass(frozen=True)
class VolumeOperatorConfig:
    singular_correction: str = "equivalent_ball"
    gradient_step_fraction: float = 0.25
    ray_nodes: int = 32

    def __post_init__(self):
        if self.singular_correction not in _MODES:
            raise ValueError(f"singular_correction must be one of {sorted(_MODES)}")
        if not 0.0 < self.gradient_step_fraction <= 0.5:
            raise ValueError("gradient_step_fraction must lie in (0, 0.5]")
        if self.ray_nodes < 8:
            raise ValueError("ray_nodes must be >= 8")


DEFAULT_CONFIG = VolumeOperatorConfig()


def equivalent_radius(h: float) -> float:
    return (3.0 * h**3 / (4.0 * np.pi)) ** (1.0 / 3.0)


def _near_field(grid: VoxelGrid, cfg: VolumeOperatorConfig):
    smear = cfg.singular_correction == "equivalent_ball"
    rc = equivalent_radius(grid.h) if smear else 0.5 * grid.h
    return rc, smear


def _points(x) -> tuple[np.ndarray, tuple]:
    x = np.asarray(x, dtype=float)
    lead = x.shape[:-1]
    return np.ascontiguousarray(x.reshape(-1, 3).T), lead


def _sources(grid: VoxelGrid):
    src = np.ascontiguousarray(grid.points.T)
    return src, np.full(grid.n_interior, grid.h**3)


def _near_pairs(grid: VoxelGrid, tgt: np.ndarray, rc: float):
    """(target, source, y - x) for all sources closer than rc < h to a target."""
    x = tgt.T
    base = np.floor((x - grid.origin) / grid.h).astype(np.int64)
    corners = np.indices((2, 2, 2)).reshape(3, -1).T
    cand = base[:, None, :] + corners[None, :, :]  # (n, 8, 3)
    ok = np.all((cand >= 0) & (cand < np.array(grid.dims)), axis=-1)
    src = np.full(ok.shape, -1, dtype=np.int64)
    src[ok] = grid.lookup[tuple(cand[ok].T)]
    ti, ci = np.nonzero(src >= 0)
    sj = src[ti, ci]
    d = grid.points[sj] - x[ti]
    close = np.einsum("ij,ij->i", d, d) < rc * rc
    return ti[close], sj[close], d[close]


def _check_grid(*fields: GridField):
    if not fields or fields[0].grid.n_interior == 0:
        raise ValueError("empty grid")
    for f in fields[1:]:
        if f.grid is not fields[0].grid:
            raise ValueError("fields live on different grids")


# -- array-level primitives ---------------------------------------------------

def quaternion_potential(grid: VoxelGrid, q: np.ndarray, x, cfg=DEFAULT_CONFIG) -> np.ndarray:
    """T[q](x) = -int E(y - x) q(y) dy for quaternion samples q of shape (N, 4)."""
    tgt, lead = _points(x)
    src, w = _sources(grid)
    qT = np.ascontiguousarray(q.T)
    a = _kernels.quaternion_moments(tgt, src, w, qT)
    rc, smear = _near_field(grid, cfg)
    ti, sj, d = _near_pairs(grid, tgt, rc)
    if len(ti):
        r = np.linalg.norm(d, axis=1)
        with np.errstate(divide="ignore"):
            f_pt = np.where(r > 1e-15, 1.0 / r**3, 0.0)
        df = ((1.0 / rc**3 if smear else 0.0) - f_pt) * w[sj]
        qs = q[sj]
        corr = np.empty((len(ti), 4))
        corr[:, 0] = np.einsum("ij,ij->i", d, qs[:, 1:])
        corr[:, 1:] = qs[:, :1] * d + np.cross(d, qs[:, 1:])
        np.add.at(a, ti, df[:, None] * corr)
    out = np.empty_like(a)
    out[:, 0] = -a[:, 0]
    out[:, 1:] = a[:, 1:]
    return (out / (4.0 * np.pi)).reshape(lead + (4,))


def t0_array(grid: VoxelGrid, g: np.ndarray, x, cfg=DEFAULT_CONFIG) -> np.ndarray:
    """T0[g](x) = int E(y - x) . g(y) dy for vector samples g of shape (N, 3)."""
    tgt, lead = _points(x)
    src, w = _sources(grid)
    a = _kernels.dot_moment(tgt, src, w, np.ascontiguousarray(g.T))
    rc, smear = _near_field(grid, cfg)
    ti, sj, d = _near_pairs(grid, tgt, rc)
    if len(ti):
        r = np.linalg.norm(d, axis=1)
        with np.errstate(divide="ignore"):
            f_pt = np.where(r > 1e-15, 1.0 / r**3, 0.0)
        df = ((1.0 / rc**3 if smear else 0.0) - f_pt) * w[sj]
        np.add.at(a, ti, df * np.einsum("ij,ij->i", d, g[sj]))
    return (-a / (4.0 * np.pi)).reshape(lead)


def newton_array(grid: VoxelGrid, u: np.ndarray, x, cfg=DEFAULT_CONFIG) -> np.ndarray:
    """L[u](x) for scalar samples u of shape (N,)."""
    tgt, lead = _points(x)
    src, w = _sources(grid)
    a = _kernels.inverse_distance_sum(tgt, src, w, np.ascontiguousarray(u))
    rc, smear = _near_field(grid, cfg)
    ti, sj, d = _near_pairs(grid, tgt, rc)
    if len(ti):
        r = np.linalg.norm(d, axis=1)
        with np.errstate(divide="ignore"):
            k_pt = np.where(r > 1e-15, 1.0 / r, 0.0)
        k_des = (3.0 * rc**2 - r**2) / (2.0 * rc**3) if smear else 0.0
        np.add.at(a, ti, (k_des - k_pt) * w[sj] * u[sj])
    return (-a / (4.0 * np.pi)).reshape(lead)


# -- public operators ---------------------------------------------------------

def newton_potential(u: GridField, x, cfg: VolumeOperatorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """L[u](x) = -(1/4pi) int u(y) / |x - y| dy, componentwise for vector u."""
    _check_grid(u)
    if u.rank == "scalar":
        return newton_array(u.grid, u.values, x, cfg)
    return np.stack([newton_array(u.grid, u.values[:, k], x, cfg) for k in range(u.values.shape[1])], axis=-1)


def teodorescu(w: GridField, x, cfg: VolumeOperatorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """T[w](x) = -int E(y - x) w(y) dy, quaternion valued (scalar first)."""
    _check_grid(w)
    return quaternion_potential(w.grid, w.as_quaternion().values, x, cfg)


def t0(g: GridField, x, cfg: VolumeOperatorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Scalar part of the transform of a vector field: int E(y - x) . g(y) dy."""
    _check_grid(g)
    return t0_array(g.grid, g.values, x, cfg)


def t1(g0: GridField, x, cfg: VolumeOperatorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """-int g0(y) E(y - x) dy."""
    _check_grid(g0)
    return quaternion_potential(g0.grid, g0.as_quaternion().values, x, cfg)[..., 1:]


def t2(g: GridField, x, cfg: VolumeOperatorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """-int E(y - x) x g(y) dy."""
    _check_grid(g)
    return quaternion_potential(g.grid, g.as_quaternion().values, x, cfg)[..., 1:]


def _boundary_moments(mesh: BoundaryMesh, q: np.ndarray, x) -> np.ndarray:
    tgt, lead = _points(x)
    src = np.ascontiguousarray(mesh.points.T)
    a = _kernels.quaternion_moments(tgt, src, mesh.areas, np.ascontiguousarray(q.T))
    return a.reshape(lead + (4,))


def near_boundary(mesh: BoundaryMesh, x, tol: float) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = np.min(np.linalg.norm(x[:, None, :] - mesh.points[None, :, :], axis=-1), axis=1)
    return d < tol


def single_layer(phi: np.ndarray, mesh: BoundaryMesh, x) -> np.ndarray:
    """M[phi](x) = int phi(y) / (4 pi |y - x|) ds_y."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (mesh.n_triangles,):
        raise ValueError(f"expected {mesh.n_triangles} boundary samples, got shape {phi.shape}")
    tgt, lead = _points(x)
    src = np.ascontiguousarray(mesh.points.T)
    out = _kernels.inverse_distance_sum(tgt, src, mesh.areas, np.ascontiguousarray(phi))
    return (out / (4.0 * np.pi)).reshape(lead)


def cauchy_operator(phi: np.ndarray, mesh: BoundaryMesh, x) -> np.ndarray:
    """F[phi](x) = int E(y - x) eta(y) phi(y) ds_y for quaternion samples phi."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (mesh.n_triangles, 4):
        raise ValueError(f"expected ({mesh.n_triangles}, 4) quaternion samples, got {phi.shape}")
    eta = np.concatenate([np.zeros((mesh.n_triangles, 1)), mesh.normals], axis=1)
    a = _boundary_moments(mesh, quat_mul(eta, phi), x)
    # sum E q ds = -(1/4pi) (-a0, avec)
    out = np.empty_like(a)
    out[..., 0] = a[..., 0]
    out[..., 1:] = -a[..., 1:]
    return out / (4.0 * np.pi)


def grad_t0(g: GridField, x, cfg: VolumeOperatorConfig = DEFAULT_CONFIG, method: str = "lattice",
            check_inside: bool = True) -> np.ndarray:
    """grad T0[g](x) from the spline lattice (default) or by direct central differences.

    The direct variant is only reliable at voxel centers: away from them the
    near-field quadrature error of T0 is O(h) but not smooth in x, so a step
    of a fraction of h turns it into an O(1) gradient error.
    """
    _check_grid(g)
    if method == "lattice":
        return T0Lattice(g.grid, g.values, cfg).grad(x)
    if method != "direct":
        raise ValueError(f"unknown method {method!r}")
    return grad_t0_array(g.grid, g.values, x, cfg, check_inside)


def grad_t0_array(grid: VoxelGrid, g: np.ndarray, x, cfg=DEFAULT_CONFIG, check_inside=True) -> np.ndarray:
    """Central differences of direct T0 evaluations with step gradient_step_fraction * h."""
    x = np.asarray(x, dtype=float)
    delta = cfg.gradient_step_fraction * grid.h
    shifts = np.concatenate([np.eye(3), -np.eye(3)]) * delta
    pts = x[..., None, :] + shifts  # (..., 6, 3)
    if check_inside and grid.domain is not None:
        if not np.all(grid.domain.inside(pts.reshape(-1, 3))):
            raise ValueError("finite-difference step for grad T0 leaves the domain")
    vals = t0_array(grid, g, pts, cfg)  # (..., 6)
    return (vals[..., :3] - vals[..., 3:]) / (2 * delta)


def gauss_legendre_01(n: int) -> tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (t + 1.0), 0.5 * w


def monogenic_completion(u0_grad, x, center=(0.0, 0.0, 0.0), n_nodes: int = 32) -> np.ndarray:
    """U[u0](x) = int_0^1 t (x - c) x grad u0(c + t (x - c)) dt by Gauss-Legendre.

    ``u0_grad`` maps points of shape (..., 3) to gradients of the same shape.
    """
    x = np.asarray(x, dtype=float)
    center = np.asarray(center, dtype=float)
    t, w = gauss_legendre_01(n_nodes)
    tx = t[:, None] * (x - center)[..., None, :]  # (..., nt, 3)
    grads = np.asarray(u0_grad(center + tx))
    return np.einsum("k,...ki->...i", w, np.cross(tx, grads))


class T0Lattice:
    """T0 of a vector field sampled on the padded cell-center lattice.

    Gradients come from central differences on the lattice followed by
    cubic spline interpolation; this keeps whole-grid ray integrals affordable.
    """

    def __init__(self, grid: VoxelGrid, g: np.ndarray, cfg=DEFAULT_CONFIG, pad: int = 2, order: int = 3):
        self.grid = grid
        self.order = order
        dims = np.array(grid.dims) + 2 * pad
        self.origin = grid.origin - pad * grid.h
        ii = np.indices(dims).reshape(3, -1).T
        vals = t0_array(grid, g, self.origin + grid.h * ii, cfg)
        self.values = vals.reshape(tuple(dims))
        grads = np.gradient(self.values, grid.h)
        if order > 1:
            grads = [spline_filter(gk, order=order, mode="nearest") for gk in grads]
        self.gradients = np.stack(grads, axis=0)

    def grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        coords = ((x.reshape(-1, 3) - self.origin) / self.grid.h).T
        out = np.stack([map_coordinates(self.gradients[k], coords, order=self.order, mode="nearest", prefilter=False) for k in range(3)], axis=-1)
        return out.reshape(x.shape)
