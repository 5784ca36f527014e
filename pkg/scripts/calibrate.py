"""Measure identity residuals on the unit ball and derive the shared tolerances.

    python3 scripts/calibrate.py            # print the table and suggested constants
    python3 scripts/calibrate.py --write    # also rewrite src/starcurl/tolerances.py

tol_op(h) = C_OP (h + 1/N_t) with C_OP = safety * max(residual / (h + 1/N_t))
over the operator identities below, n in {24, 32}.
"""
import argparse
import math
import re
import time
from pathlib import Path

import numpy as np

from starcurl.algebra import GridField, fd_curl, fd_div
from starcurl.beltrami import BeltramiConfig, beltrami_series
from starcurl.bvp import right_inverse_curl_dirichlet
from starcurl.divcurl import double_curl_inverse, right_inverse_curl
from starcurl.fields import bump_curl, bump_quaternion, constant, random_solenoidal
from starcurl.geometry import build_ball, voxelize
from starcurl.potentials import DEFAULT_CONFIG, quaternion_potential
from starcurl.vekua import IrrotationalCoefficient, solve_d_minus_alpha, solve_d_plus_M

TOL_FILE = Path(__file__).resolve().parents[1] / "src" / "starcurl" / "tolerances.py"


def rel(a, b, m):
    return float(np.linalg.norm((a - b)[m]) / np.linalg.norm(b[m]))


def op_residuals(n, n_fields=5, seed=0):
    grid = voxelize(build_ball(1.0), n)
    inner = grid.distance_to_boundary() >= 2 * grid.h
    rng = np.random.default_rng(seed)
    out = {}
    worst_c = worst_d = 0.0
    for _ in range(n_fields):
        g = random_solenoidal(grid, rng)
        R = right_inverse_curl(g)
        m = inner & fd_div(R).accuracy_mask
        worst_c = max(worst_c, rel(fd_curl(R).values, g.values, m))
        worst_d = max(worst_d, float(np.linalg.norm(fd_div(R).values[m]) / np.linalg.norm(g.values[m])))
    out["curl R - g"] = worst_c
    out["div R"] = worst_d
    S = double_curl_inverse(g, check=False)
    cc = fd_curl(fd_curl(S))
    out["curl curl S - g"] = rel(cc.values, g.values, cc.accuracy_mask & (grid.distance_to_boundary() >= 3 * grid.h))
    w, Dw = bump_quaternion(grid.points, (1.0, -2.0, 0.5), 0.6, 4)
    out["T[Dw] - w"] = float(np.linalg.norm(quaternion_potential(grid, Dw, grid.points) - w) / np.linalg.norm(w))
    gb = GridField(grid, "vector", bump_curl((0.3, -0.5, 0.8))(grid.points))
    R0 = right_inverse_curl_dirichlet(gb)
    c = fd_curl(R0)
    out["curl R_0 - g"] = rel(c.values, gb.values, inner & c.accuracy_mask)
    return grid, out


def series_residuals(grid):
    _, rep, _ = beltrami_series(constant(grid, (0.3, -0.5, 0.8)), BeltramiConfig(0.2))
    x = grid.points
    phi = GridField(grid, "scalar", np.exp(x[:, 0]))
    coeff = IrrotationalCoefficient.from_phi(phi, phi.values[:, None] * np.array([1.0, 0.0, 0.0]))
    q = np.zeros((grid.n_interior, 4))
    q[:, 0] = x[:, 1]
    q[:, 3] = phi.values
    g = GridField(grid, "quaternion", q)
    _, r1 = solve_d_minus_alpha(g, coeff)
    _, r2 = solve_d_plus_M(g, coeff)
    vek = max(r1.residuals["div_residual"], r1.residuals["curl_residual"],
              r2.residuals["div_residual"], r2.residuals["curl_residual"])
    return rep.residuals["beltrami_residual"], vek


def quad_error(n):
    grid = voxelize(build_ball(1.0), n)
    c = np.array([0.3, -0.5, 0.8])
    # off-grid probes: at voxel centers the midpoint rule is superconvergent
    rng = np.random.default_rng(1)
    u = rng.normal(size=(400, 3))
    probes = 0.8 * u / np.linalg.norm(u, axis=1)[:, None] * rng.random((400, 1)) ** (1 / 3)
    exact = np.concatenate([(probes @ c)[:, None], -np.cross(probes, c)], axis=1) / 3.0
    got = quaternion_potential(grid, np.tile(np.r_[0.0, c], (grid.n_interior, 1)), probes)
    return float(np.abs(got - exact).max() / np.abs(exact).max())


def round_up(v, digits=1):
    e = math.floor(math.log10(v))
    q = 10 ** (e - digits + 1)
    return round(math.ceil(v / q) * q, digits - e + 1)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[24, 32])
    ap.add_argument("--safety", type=float, default=1.25)
    ap.add_argument("--write", action="store_true")
    args = ap.parse_args()

    nt = DEFAULT_CONFIG.ray_nodes
    ratios, belt, vek, quad = [], [], [], []
    for n in args.sizes:
        t = time.perf_counter()
        grid, res = op_residuals(n)
        scale = grid.h + 1.0 / nt
        for k, v in res.items():
            print(f"n={n:3d} {k:18s} {v:.3e}  ratio {v / scale:.3f}")
            ratios.append(v / scale)
        b, v = series_residuals(grid)
        q = quad_error(n)
        print(f"n={n:3d} beltrami residual {b:.3e}  vekua residual {v:.3e}  T[c] max rel error {q:.3e}"
              f"  ({time.perf_counter() - t:.1f} s)")
        belt.append(b)
        vek.append(v)
        quad.append(q)

    c_op = round_up(args.safety * max(ratios), 2)
    tol_quad = round_up(args.safety * max(quad))
    tol_belt = round_up(10 * max(belt))
    tol_vek = round_up(10 * max(vek))
    print(f"\nC_OP = {c_op}  TOL_QUAD = {tol_quad}  TOL_BELTRAMI = {tol_belt}  TOL_VEKUA = {tol_vek}")
    if args.write:
        text = TOL_FILE.read_text()
        for name, val in (("C_OP", c_op), ("TOL_QUAD", tol_quad), ("TOL_BELTRAMI", tol_belt), ("TOL_VEKUA", tol_vek)):
            text = re.sub(rf"^{name} = .*$", f"{name} = {val:g}", text, flags=re.M)
        TOL_FILE.write_text(text)
        print(f"wrote {TOL_FILE}")


if __name__ == "__main__":
    main()
