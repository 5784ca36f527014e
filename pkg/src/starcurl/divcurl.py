"""General solution of the div-curl system on star-shaped domains.

Everything here is assembled from the volume operators in ``potentials``:

    w = -T1[g0] + T2[g] - U[T0[g]] + grad h

with U the monogenic completion along rays from the star center.  Operators
accept evaluation points ``x`` of shape (..., 3); with ``x=None`` they return
a GridField sampled at the voxel centers of the data grid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import GridField, ScalarFunction, fd_jacobian
from .potentials import (
    DEFAULT_CONFIG,
    T0Lattice,
    VolumeOperatorConfig,
    gauss_legendre_01,
    grad_t0_array,
    newton_array,
    quaternion_potential,
)
from .tolerances import TOL_COMPAT


class CompatibilityError(ValueError):
    """Input data violates a solvability condition (e.g. non-solenoidal g)."""


def solenoidal_defect(g: GridField) -> float:
    """Relative fd divergence over voxels where it is second-order accurate.

    Normalized by the Frobenius norm of the fd Jacobian (floored at
    ||g|| / diam), so rapidly varying but solenoidal fields are not rejected
    for O(h^2) truncation error.
    """
    J, acc = fd_jacobian(g)
    m = acc
    if not m.any():
        return 0.0
    dv = np.sqrt(np.sum(np.trace(J[m], axis1=1, axis2=2) ** 2))
    jn = np.sqrt(np.sum(J[m] ** 2))
    diam = g.grid.domain.diameter if g.grid.domain is not None else 1.0
    den = max(jn, np.sqrt(np.sum(g.values[m] ** 2)) / diam)
    if den == 0.0:
        return 0.0
    return float(dv / den)


def irrotational_defect(g: GridField) -> float:
    """Relative fd curl, normalized like ``solenoidal_defect``."""
    J, acc = fd_jacobian(g)
    if not acc.any():
        return 0.0
    Jm = J[acc]
    curl = np.stack([Jm[:, 2, 1] - Jm[:, 1, 2], Jm[:, 0, 2] - Jm[:, 2, 0], Jm[:, 1, 0] - Jm[:, 0, 1]], axis=1)
    diam = g.grid.domain.diameter if g.grid.domain is not None else 1.0
    den = max(np.sqrt(np.sum(Jm**2)), np.sqrt(np.sum(g.values[acc] ** 2)) / diam)
    if den == 0.0:
        return 0.0
    return float(np.sqrt(np.sum(curl**2)) / den)


def check_solenoidal(g: GridField, tol: float = TOL_COMPAT, name: str = "g") -> float:
    defect = solenoidal_defect(g)
    if defect > tol:
        raise CompatibilityError(f"{name} is not solenoidal: relative fd divergence {defect:.3e} > {tol:.1e}")
    return defect


@dataclass(frozen=True)
class DivCurlData:
    g0: GridField | None = None
    g: GridField | None = None
    gauge: ScalarFunction | None = None
    tol_compat: float = TOL_COMPAT

    def __post_init__(self):
        if self.g0 is None and self.g is None:
            raise ValueError("need at least one of g0, g")
        if self.g0 is not None and self.g0.rank != "scalar":
            raise ValueError("g0 must be a scalar field")
        if self.g is not None:
            if self.g.rank != "vector":
                raise ValueError("g must be a vector field")
            if self.g0 is not None and self.g0.grid is not self.g.grid:
                raise ValueError("g0 and g live on different grids")
            check_solenoidal(self.g, self.tol_compat)

    @property
    def grid(self):
        return (self.g if self.g is not None else self.g0).grid


class RayIntegrals:
    """Line integrals of grad T0[g] along rays from the star center.

    Gradients along the rays come from a spline lattice of T0 values
    (``T0Lattice``).  ``direct`` central differences of T0 are kept for
    comparison; they are inaccurate away from voxel centers.
    """

    def __init__(self, g: GridField, cfg: VolumeOperatorConfig = DEFAULT_CONFIG, method: str = "lattice"):
        if method not in ("direct", "lattice"):
            raise ValueError(f"unknown method {method!r}")
        self.g = g
        self.cfg = cfg
        self.method = method
        self.center = np.asarray(g.grid.domain.center if g.grid.domain is not None else np.zeros(3), dtype=float)
        self._lattice = None

    def grad_t0(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if self.method == "direct":
            return grad_t0_array(self.g.grid, self.g.values, pts, self.cfg, check_inside=False)
        if self._lattice is None:
            self._lattice = T0Lattice(self.g.grid, self.g.values, self.cfg)
        return self._lattice.grad(pts)

    def _rays(self, x):
        x = np.asarray(x, dtype=float)
        t, w = gauss_legendre_01(self.cfg.ray_nodes)
        r = x - self.center
        tr = t[:, None] * r[..., None, :]  # (..., nt, 3)
        grads = self.grad_t0(self.center + tr)
        return t, w, r, tr, grads

    def completion(self, x) -> np.ndarray:
        """U[T0[g]](x) = int_0^1 t (x - c) x grad T0(c + t (x - c)) dt."""
        _, w, _, tr, grads = self._rays(x)
        return np.einsum("k,...ki->...i", w, np.cross(tr, grads))

    def radial_potential(self, x) -> np.ndarray:
        """int_0^1 (t |x - c|^2 / 2) grad T0(c + t (x - c)) dt."""
        t, w, r, _, grads = self._rays(x)
        r2 = np.einsum("...i,...i->...", r, r)
        return 0.5 * r2[..., None] * np.einsum("k,...ki->...i", w * t, grads)


def _targets(grid, x):
    return grid.points if x is None else np.asarray(x, dtype=float)


def _wrap(grid, x, values, rank="vector"):
    if x is None:
        return GridField(grid, rank, values)
    return values


def _t2(g: GridField, x, cfg):
    q = np.zeros((g.grid.n_interior, 4))
    q[:, 1:] = g.values
    return quaternion_potential(g.grid, q, x, cfg)[..., 1:]


def _minus_t1(g0: GridField, x, cfg):
    q = np.zeros((g0.grid.n_interior, 4))
    q[:, 0] = g0.values
    return -quaternion_potential(g0.grid, q, x, cfg)[..., 1:]


def right_inverse_curl(g: GridField, x=None, cfg: VolumeOperatorConfig = DEFAULT_CONFIG,
                       check: bool = True, rays: RayIntegrals | None = None):
    """R[g] = T2[g] - U[T0[g]], a solenoidal field with curl R[g] = g."""
    if g.rank != "vector":
        raise ValueError("right_inverse_curl needs a vector field")
    if check:
        check_solenoidal(g)
    rays = rays or RayIntegrals(g, cfg)
    pts = _targets(g.grid, x)
    return _wrap(g.grid, x, _t2(g, pts, cfg) - rays.completion(pts))


def solve_div_curl(data: DivCurlData, x=None, cfg: VolumeOperatorConfig = DEFAULT_CONFIG):
    """w with div w = g0, curl w = g: -T1[g0] + R[g] + grad h."""
    grid = data.grid
    pts = _targets(grid, x)
    w = np.zeros(pts.shape)
    if data.g0 is not None:
        w += _minus_t1(data.g0, pts, cfg)
    if data.g is not None:
        w += right_inverse_curl(data.g, pts, cfg, check=False)
    if data.gauge is not None:
        w += data.gauge.grad(pts)
    return _wrap(grid, x, w)


def helmholtz_potentials(data: DivCurlData, cfg: VolumeOperatorConfig = DEFAULT_CONFIG):
    """Scalar and vector potentials with w = grad v0 - curl vstar.

    v0 = L[g0] and vstar = L[g] + int_0^1 (t |x|^2 / 2) grad T0[g](t x) dt.
    Both are returned as evaluators on points of shape (..., 3).
    """
    grid = data.grid
    rays = RayIntegrals(data.g, cfg) if data.g is not None else None

    def v0(x):
        x = np.asarray(x, dtype=float)
        if data.g0 is None:
            return np.zeros(x.shape[:-1])
        return newton_array(grid, data.g0.values, x, cfg)

    def vstar(x):
        x = np.asarray(x, dtype=float)
        if data.g is None:
            return np.zeros(x.shape)
        L = np.stack([newton_array(grid, data.g.values[:, k], x, cfg) for k in range(3)], axis=-1)
        return L + rays.radial_potential(x)

    return v0, vstar


def double_curl_inverse(g: GridField, x=None, cfg: VolumeOperatorConfig = DEFAULT_CONFIG,
                        check: bool = True):
    """S[g] = -L[g] - int_0^1 (t |x|^2 / 2) grad T0[g](t x) dt, so curl curl S[g] = g."""
    if check:
        check_solenoidal(g)
    _, vstar = helmholtz_potentials(DivCurlData(g=g, tol_compat=np.inf), cfg)
    return _wrap(g.grid, x, -vstar(_targets(g.grid, x)))
