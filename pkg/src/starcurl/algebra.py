"""Quaternions, the Cauchy and Newton kernels, and finite differences on voxel grids.

Quaternions are stored scalar first, ``(s, v1, v2, v3)``, with the vector
part identified with the imaginary units e1, e2, e3.
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import distance_transform_edt, map_coordinates

from .geometry import VoxelGrid

RANKS = {"scalar": (), "vector": (3,), "quaternion": (4,)}


@dataclass(frozen=True)
class Quaternion:
    s: float
    v: tuple[float, float, float]

    @classmethod
    def from_array(cls, a) -> "Quaternion":
        a = np.asarray(a, dtype=float)
        return cls(float(a[0]), (float(a[1]), float(a[2]), float(a[3])))

    def to_array(self) -> np.ndarray:
        return np.array([self.s, *self.v])

    def __mul__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion.from_array(quat_mul(self.to_array(), other.to_array()))

    def __add__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion.from_array(self.to_array() + other.to_array())

    def __abs__(self) -> float:
        return float(np.linalg.norm(self.to_array()))


def quat_mul(a, b) -> np.ndarray:
    """Hamilton product of quaternion arrays of shape (..., 4)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a0, av = a[..., 0], a[..., 1:]
    b0, bv = b[..., 0], b[..., 1:]
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    out[..., 0] = a0 * b0 - np.einsum("...i,...i->...", av, bv)
    out[..., 1:] = a0[..., None] * bv + b0[..., None] * av + np.cross(av, bv)
    return out


def vec_to_quat(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.concatenate([np.zeros(v.shape[:-1] + (1,)), v], axis=-1)


def cauchy_kernel(x) -> np.ndarray:
    """E(x) = -x / (4 pi |x|^3)."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0):
        raise ValueError("Cauchy kernel is singular at x = 0")
    return -x / (4.0 * np.pi * r[..., None] ** 3)


def newton_kernel(x) -> np.ndarray:
    """-1 / (4 pi |x|), the fundamental solution of the Laplacian."""
    r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
    if np.any(r == 0):
        raise ValueError("Newton kernel is singular at x = 0")
    return -1.0 / (4.0 * np.pi * r)


@dataclass(frozen=True, eq=False)
class GridField:
    """Samples on the interior voxels of a grid.

    ``accurate`` flags voxels where the values carry second-order finite
    difference accuracy; sampled data is accurate everywhere (``None``).
    """

    grid: VoxelGrid
    rank: str
    values: np.ndarray
    accurate: np.ndarray | None = None

    def __post_init__(self):
        if self.rank not in RANKS:
            raise ValueError(f"unknown rank {self.rank!r}")
        vals = np.array(self.values, dtype=float)
        expected = (self.grid.n_interior,) + RANKS[self.rank]
        if vals.shape != expected:
            raise ValueError(f"{self.rank} field on this grid needs shape {expected}, got {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.accurate is not None:
            acc = np.array(self.accurate, dtype=bool)
            acc.setflags(write=False)
            object.__setattr__(self, "accurate", acc)

    @classmethod
    def sample(cls, grid: VoxelGrid, fn, rank: str | None = None) -> "GridField":
        vals = np.asarray(fn(grid.points), dtype=float)
        if rank is None:
            rank = {1: "scalar", 2: {3: "vector", 4: "quaternion"}.get(vals.shape[-1])}[vals.ndim]
        return cls(grid, rank, vals)

    @property
    def accuracy_mask(self) -> np.ndarray:
        if self.accurate is None:
            return np.ones(self.grid.n_interior, dtype=bool)
        return self.accurate

    def with_values(self, values, rank: str | None = None) -> "GridField":
        return GridField(self.grid, rank or self.rank, values, self.accurate)

    def as_quaternion(self) -> "GridField":
        if self.rank == "quaternion":
            return self
        q = np.zeros((self.grid.n_interior, 4))
        if self.rank == "scalar":
            q[:, 0] = self.values
        else:
            q[:, 1:] = self.values
        return GridField(self.grid, "quaternion", q, self.accurate)

    def scalar_part(self) -> "GridField":
        return GridField(self.grid, "scalar", self.values[:, 0], self.accurate)

    def vector_part(self) -> "GridField":
        return GridField(self.grid, "vector", self.values[:, 1:], self.accurate)

    def norm(self, mask=None) -> float:
        """Discrete L2 norm, sqrt(sum |f|^2 h^3)."""
        v = self.values if mask is None else self.values[mask]
        return float(np.sqrt(np.sum(v**2) * self.grid.cell_volume))

    def __add__(self, other: "GridField") -> "GridField":
        _check_same_grid(self, other)
        return GridField(self.grid, self.rank, self.values + other.values, _and(self.accurate, other.accurate))

    def __sub__(self, other: "GridField") -> "GridField":
        _check_same_grid(self, other)
        return GridField(self.grid, self.rank, self.values - other.values, _and(self.accurate, other.accurate))

    def __mul__(self, a: float) -> "GridField":
        return GridField(self.grid, self.rank, a * self.values, self.accurate)

    __rmul__ = __mul__


def _and(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a & b


def _check_same_grid(*fields: GridField):
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid is not g:
            raise ValueError("fields live on different grids")


def _partial(grid: VoxelGrid, values: np.ndarray, acc: np.ndarray, axis: int):
    """Derivative along ``axis`` of per-voxel values (leading axis = voxel).

    Returns (derivative, full_stencil, accurate) where ``accurate`` also
    requires both neighbours to be accurate themselves.
    """
    idx = grid.index
    step = np.zeros(3, dtype=np.int64)
    step[axis] = 1
    nbr = []
    for sgn in (1, -1):
        j = idx + sgn * step
        ok = np.all((j >= 0) & (j < np.array(grid.dims)), axis=1)
        look = np.full(len(idx), -1, dtype=np.int64)
        look[ok] = grid.lookup[tuple(j[ok].T)]
        nbr.append(look)
    fwd, bwd = nbr
    has_f, has_b = fwd >= 0, bwd >= 0
    h = grid.h
    d = np.zeros_like(values)
    both = has_f & has_b
    d[both] = (values[fwd[both]] - values[bwd[both]]) / (2 * h)
    only_f = has_f & ~has_b
    d[only_f] = (values[fwd[only_f]] - values[only_f]) / h
    only_b = has_b & ~has_f
    d[only_b] = (values[only_b] - values[bwd[only_b]]) / h
    accurate = both.copy()
    accurate[both] &= acc[fwd[both]] & acc[bwd[both]]
    return d, both, accurate


def _gradient_all(f: GridField):
    grid = f.grid
    acc = f.accuracy_mask
    parts = [_partial(grid, f.values, acc, ax) for ax in range(3)]
    d = np.stack([p[0] for p in parts], axis=-1)
    full = parts[0][1] & parts[1][1] & parts[2][1]
    accurate = parts[0][2] & parts[1][2] & parts[2][2]
    return d, full, accurate


def fd_grad(f: GridField) -> GridField:
    if f.rank != "scalar":
        raise ValueError("fd_grad needs a scalar field")
    d, _, acc = _gradient_all(f)
    return GridField(f.grid, "vector", d, acc)


def fd_jacobian(f: GridField) -> tuple[np.ndarray, np.ndarray]:
    """J[n, i, j] = d f_i / d x_j for a vector field."""
    d, _, acc = _gradient_all(f)
    return d, acc


def fd_div(f: GridField) -> GridField:
    if f.rank != "vector":
        raise ValueError("fd_div needs a vector field")
    J, acc = fd_jacobian(f)
    return GridField(f.grid, "scalar", np.trace(J, axis1=1, axis2=2), acc)


def fd_curl(f: GridField) -> GridField:
    if f.rank != "vector":
        raise ValueError("fd_curl needs a vector field")
    J, acc = fd_jacobian(f)
    c = np.stack([J[:, 2, 1] - J[:, 1, 2], J[:, 0, 2] - J[:, 2, 0], J[:, 1, 0] - J[:, 0, 1]], axis=1)
    return GridField(f.grid, "vector", c, acc)


def fd_laplacian(f: GridField) -> GridField:
    """Seven-point Laplacian; accurate only where all six neighbours are interior."""
    grid = f.grid
    idx = grid.index
    acc_in = f.accuracy_mask
    out = -6.0 * f.values
    full = np.ones(len(idx), dtype=bool)
    for ax in range(3):
        for sgn in (1, -1):
            j = idx.copy()
            j[:, ax] += sgn
            ok = np.all((j >= 0) & (j < np.array(grid.dims)), axis=1)
            look = np.full(len(idx), -1, dtype=np.int64)
            look[ok] = grid.lookup[tuple(j[ok].T)]
            has = look >= 0
            full &= has
            out[has] += f.values[look[has]]
            full[has] &= acc_in[look[has]]
    out = out / grid.h**2
    out[~full] = 0.0
    return GridField(grid, f.rank, out, full)


def moisil_teodorescu(f: GridField) -> GridField:
    """D f = -div(Vec f) + grad(Sc f) + curl(Vec f)."""
    q = f.as_quaternion()
    _check_same_grid(q)
    s, v = q.scalar_part(), q.vector_part()
    div, curl, grad = fd_div(v), fd_curl(v), fd_grad(s)
    out = np.zeros_like(q.values)
    out[:, 0] = -div.values
    out[:, 1:] = grad.values + curl.values
    return GridField(f.grid, "quaternion", out, div.accurate & grad.accurate)


@dataclass(frozen=True)
class ScalarFunction:
    """Scalar evaluator with a gradient; the gradient falls back to central differences."""

    value: object
    grad_fn: object = None
    step: float = 1e-5

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.value(np.asarray(x, dtype=float)), dtype=float)

    def grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.grad_fn is not None:
            return np.asarray(self.grad_fn(x), dtype=float)
        out = np.empty(x.shape)
        for k in range(3):
            e = np.zeros(3)
            e[k] = self.step
            out[..., k] = (self(x + e) - self(x - e)) / (2 * self.step)
        return out


_NEAREST: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def interpolate(f: GridField, x) -> np.ndarray:
    """Trilinear interpolation of grid samples at arbitrary points.

    Exterior lattice cells take the value of their nearest interior cell,
    so points within a cell of the boundary still interpolate sensibly.
    """
    grid = f.grid
    x = np.asarray(x, dtype=float)
    lead = x.shape[:-1]
    comp = f.values.reshape(grid.n_interior, -1)
    nearest = _NEAREST.get(grid)
    if nearest is None:
        _, near = distance_transform_edt(~grid.mask, return_indices=True)
        nearest = _NEAREST[grid] = grid.lookup[tuple(near)]
    coords = ((x.reshape(-1, 3) - grid.origin) / grid.h).T
    out = np.stack(
        [map_coordinates(comp[nearest, k], coords, order=1, mode="nearest") for k in range(comp.shape[1])],
        axis=-1,
    )
    return out.reshape(lead + f.values.shape[1:])
