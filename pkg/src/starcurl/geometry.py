"""Star-shaped domains, their boundary meshes and voxelizations.

Three domain kinds are supported: balls, axis-aligned boxes, and general
star-shaped solids given by a radial function tabulated on an icosphere.
Boundary quadrature is one point per triangle.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree


@dataclass(frozen=True, eq=False)
class BoundaryMesh:
    """Triangulated closed surface with one quadrature node per triangle.

    ``points`` are the quadrature nodes (triangle centroids, projected onto
    the exact surface for the ball) and ``normals`` the unit outward normals
    at those nodes.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    normals: np.ndarray
    areas: np.ndarray
    points: np.ndarray

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())


@dataclass(frozen=True, eq=False)
class StarDomain:
    center: np.ndarray
    inside: Callable[[np.ndarray], np.ndarray]
    boundary: BoundaryMesh
    kind: str
    params: dict = field(default_factory=dict)

    def contains(self, x) -> bool:
        return bool(self.inside(np.atleast_2d(np.asarray(x, dtype=float)))[0])

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        v = self.boundary.vertices
        return v.min(axis=0), v.max(axis=0)

    @property
    def diameter(self) -> float:
        if self.kind == "ball":
            return 2.0 * self.params["radius"]
        if self.kind == "box":
            return 2.0 * float(np.linalg.norm(self.params["half_extents"]))
        v = self.boundary.vertices
        return float(np.max(np.linalg.norm(v[:, None, :] - v[None, :, :], axis=-1)))

    @property
    def volume(self) -> float:
        if self.kind == "ball":
            return 4.0 / 3.0 * np.pi * self.params["radius"] ** 3
        if self.kind == "box":
            return float(8.0 * np.prod(self.params["half_extents"]))
        # divergence theorem on the flat facets: V = (1/3) sum (x . n) A
        m = self.boundary
        return float(np.sum(np.einsum("ij,ij->i", m.points - self.center, m.normals) * m.areas) / 3.0)


def _triangle_areas(a, b, c):
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=-1)


def _spherical_triangle_areas(a, b, c):
    # Van Oosterom–Strackee solid angle of unit-vector triangles
    num = np.abs(np.einsum("ij,ij->i", a, np.cross(b, c)))
    den = 1.0 + np.einsum("ij,ij->i", a, b) + np.einsum("ij,ij->i", b, c) + np.einsum("ij,ij->i", c, a)
    return 2.0 * np.arctan2(num, den)


def icosphere(refinement: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit icosphere: vertices on the sphere, outward-oriented triangles."""
    r = (1.0 + np.sqrt(5.0)) / 2.0
    verts = [
        [-1, r, 0], [1, r, 0], [-1, -r, 0], [1, -r, 0],
        [0, -1, r], [0, 1, r], [0, -1, -r], [0, 1, -r],
        [r, 0, -1], [r, 0, 1], [-r, 0, -1], [-r, 0, 1],
    ]
    faces = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
    verts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]
    for _ in range(refinement):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = new_faces
    return np.array(verts), np.array(faces, dtype=np.int64)


def build_ball(radius: float = 1.0, center=(0.0, 0.0, 0.0), refinement: int = 3) -> StarDomain:
    if radius <= 0:
        raise ValueError(f"ball radius must be positive, got {radius}")
    if refinement < 0:
        raise ValueError(f"refinement must be >= 0, got {refinement}")
    center = np.asarray(center, dtype=float)
    unit, tris = icosphere(refinement)
    a, b, c = unit[tris[:, 0]], unit[tris[:, 1]], unit[tris[:, 2]]
    dirs = a + b + c
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    # spherical triangles tile the sphere exactly; normals are analytic
    mesh = BoundaryMesh(
        vertices=center + radius * unit,
        triangles=tris,
        normals=dirs,
        areas=radius**2 * _spherical_triangle_areas(a, b, c),
        points=center + radius * dirs,
    )

    def inside(x):
        x = np.atleast_2d(x)
        return np.einsum("ij,ij->i", x - center, x - center) < radius**2

    return StarDomain(center, inside, mesh, "ball", {"radius": float(radius)})


def build_box(half_extents=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0), facets_per_edge: int = 8) -> StarDomain:
    half = np.asarray(half_extents, dtype=float)
    if np.any(half <= 0):
        raise ValueError(f"box half extents must be positive, got {half.tolist()}")
    if facets_per_edge < 1:
        raise ValueError("facets_per_edge must be >= 1")
    center = np.asarray(center, dtype=float)
    k = facets_per_edge
    verts, tris = [], []
    s = np.linspace(-1.0, 1.0, k + 1)
    for axis in range(3):
        for sign in (-1.0, 1.0):
            u_ax, v_ax = (axis + 1) % 3, (axis + 2) % 3
            base = len(verts)
            for i in range(k + 1):
                for j in range(k + 1):
                    p = np.zeros(3)
                    p[axis] = sign
                    p[u_ax], p[v_ax] = s[i], s[j]
                    verts.append(center + half * p)
            for i in range(k):
                for j in range(k):
                    v00 = base + i * (k + 1) + j
                    v10, v01, v11 = v00 + k + 1, v00 + 1, v00 + k + 2
                    # (u, v, axis) is right-handed, so u x v = +axis
                    if sign > 0:
                        tris += [[v00, v10, v11], [v00, v11, v01]]
                    else:
                        tris += [[v00, v11, v10], [v00, v01, v11]]
    verts = np.array(verts)
    tris = np.array(tris, dtype=np.int64)
    a, b, c = verts[tris[:, 0]], verts[tris[:, 1]], verts[tris[:, 2]]
    n = np.cross(b - a, c - a)
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    mesh = BoundaryMesh(verts, tris, n, _triangle_areas(a, b, c), (a + b + c) / 3.0)

    def inside(x):
        x = np.atleast_2d(x)
        return np.all(np.abs(x - center) < half, axis=1)

    return StarDomain(center, inside, mesh, "box", {"half_extents": half})


def build_radial(rho: Callable[[np.ndarray], np.ndarray], center=(0.0, 0.0, 0.0), refinement: int = 3) -> StarDomain:
    """Star-shaped solid bounded by ``center + rho(u) u`` over unit directions u.

    ``rho`` is tabulated at icosphere vertices; the boundary is the resulting
    piecewise-flat surface and ``inside`` tests against it exactly, so the
    mesh and the predicate always agree.
    """
    center = np.asarray(center, dtype=float)
    unit, tris = icosphere(refinement)
    radii = np.asarray(rho(unit), dtype=float)
    if np.any(radii <= 0):
        raise ValueError("radial function must be positive in every direction")
    verts = center + radii[:, None] * unit
    a, b, c = verts[tris[:, 0]], verts[tris[:, 1]], verts[tris[:, 2]]
    n = np.cross(b - a, c - a)
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    mesh = BoundaryMesh(verts, tris, n, _triangle_areas(a, b, c), (a + b + c) / 3.0)

    tree = cKDTree(unit)
    vertex_tris: list[list[int]] = [[] for _ in range(len(unit))]
    for t, tri in enumerate(tris):
        for v in tri:
            vertex_tris[v].append(t)
    width = max(len(ts) for ts in vertex_tris)
    adj = np.array([ts + [ts[0]] * (width - len(ts)) for ts in vertex_tris])
    offsets = np.einsum("ij,ij->i", a - center, n)  # plane: (p - center) . n = offset

    def inside(x):
        x = np.atleast_2d(x)
        d = x - center
        r = np.linalg.norm(d, axis=1)
        out = r == 0.0
        nz = ~out
        u = d[nz] / r[nz, None]
        _, nearest = tree.query(u)
        # ray distance to the supporting plane of each candidate facet
        cand = adj[nearest]
        dots = np.einsum("ij,ikj->ik", u, n[cand])
        with np.errstate(divide="ignore", invalid="ignore"):
            dist = np.where(dots > 1e-14, offsets[cand] / dots, np.inf)
        hit = center + dist[..., None] * u[:, None, :]
        ok = _point_in_triangle(hit, a[cand], b[cand], c[cand], n[cand])
        dist = np.where(ok, dist, np.inf)
        s = dist.min(axis=1)
        if np.any(~np.isfinite(s)):
            # fall back to the closest plane when a ray grazes an edge
            s = np.where(np.isfinite(s), s, np.where(dots > 0, offsets[cand] / np.maximum(dots, 1e-300), np.inf).min(axis=1))
        out[nz] = r[nz] < s
        return out

    return StarDomain(center, inside, mesh, "radial", {"radii": radii, "refinement": refinement})


def _point_in_triangle(p, a, b, c, n, tol=1e-9):
    c0 = np.einsum("...j,...j->...", np.cross(b - a, p - a), n)
    c1 = np.einsum("...j,...j->...", np.cross(c - b, p - b), n)
    c2 = np.einsum("...j,...j->...", np.cross(a - c, p - c), n)
    scale = np.einsum("...j,...j->...", np.cross(b - a, c - a), n)
    return (c0 >= -tol * scale) & (c1 >= -tol * scale) & (c2 >= -tol * scale)


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    """Regular lattice of cubic cells; ``origin`` is the center of cell (0, 0, 0)."""

    origin: np.ndarray
    h: float
    dims: tuple[int, int, int]
    mask: np.ndarray
    domain: StarDomain | None = None

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("grid spacing must be positive")
        if self.mask.shape != tuple(self.dims):
            raise ValueError("mask shape does not match dims")
        idx = np.argwhere(self.mask)
        lookup = np.full(self.dims, -1, dtype=np.int64)
        lookup[tuple(idx.T)] = np.arange(len(idx))
        object.__setattr__(self, "index", idx)
        object.__setattr__(self, "lookup", lookup)
        object.__setattr__(self, "points", self.origin + self.h * idx)
        for a in (self.mask, idx, lookup):
            a.setflags(write=False)

    @property
    def n_interior(self) -> int:
        return len(self.index)

    @property
    def cell_volume(self) -> float:
        return self.h**3

    @property
    def volume(self) -> float:
        return self.n_interior * self.h**3

    def all_centers(self) -> np.ndarray:
        """Centers of every cell in the lattice, C-ordered."""
        ii = np.indices(self.dims).reshape(3, -1).T
        return self.origin + self.h * ii

    def distance_to_boundary(self) -> np.ndarray:
        """Distance from each interior voxel center to the boundary mesh nodes."""
        if self.domain is None:
            raise ValueError("grid has no domain attached")
        return distance_to_boundary(self.domain, self.points)


def distance_to_boundary(domain: StarDomain, x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(x)
    if domain.kind == "ball":
        d = domain.params["radius"] - np.linalg.norm(x - domain.center, axis=1)
        return np.abs(d)
    if domain.kind == "box":
        d = domain.params["half_extents"] - np.abs(x - domain.center)
        inside = np.all(d > 0, axis=1)
        return np.where(inside, d.min(axis=1), np.linalg.norm(np.maximum(-d, 0.0), axis=1))
    tree = cKDTree(domain.boundary.points)
    dist, _ = tree.query(x)
    return dist


def voxelize(domain: StarDomain, n: int) -> VoxelGrid:
    """Cover the bounding box of ``domain`` with cubic cells, ``n`` along the longest side."""
    if n < 8:
        raise ValueError(f"voxelization needs n >= 8, got {n}")
    lo, hi = domain.bounds
    h = float(np.max(hi - lo)) / n
    dims = tuple(int(max(1, np.ceil((hi[i] - lo[i]) / h - 1e-9))) for i in range(3))
    mid = 0.5 * (lo + hi)
    origin = mid - 0.5 * h * (np.array(dims) - 1)
    ii = np.indices(dims).reshape(3, -1).T
    mask = domain.inside(origin + h * ii).reshape(dims)
    if not mask.any():
        raise ValueError(f"n = {n} yields no interior voxels")
    return VoxelGrid(origin, h, dims, mask, domain)


def normal_trace(f: np.ndarray, mesh: BoundaryMesh) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (mesh.n_triangles, 3):
        raise ValueError(f"expected {mesh.n_triangles} vector samples, got shape {f.shape}")
    return np.einsum("ij,ij->i", f, mesh.normals)


def surface_integral(f: np.ndarray, mesh: BoundaryMesh) -> float:
    f = np.asarray(f, dtype=float)
    if f.shape[0] != mesh.n_triangles:
        raise ValueError(f"expected {mesh.n_triangles} samples, got {f.shape[0]}")
    return np.tensordot(mesh.areas, f, axes=(0, 0))
