"""Grid-convergence study on the unit ball.

    python3 scripts/convergence.py                 # n = 16 24 32
    python3 scripts/convergence.py --sizes 16 32 48

Prints, per n, the relative errors of closed-form oracles and the observed
orders from a least-squares fit of log(error) against log(h).
"""
import argparse
import time

import numpy as np

from starcurl.algebra import GridField, fd_curl
from starcurl.divcurl import right_inverse_curl
from starcurl.fields import bump_quaternion, constant
from starcurl.geometry import build_ball, voxelize
from starcurl.potentials import quaternion_potential
from starcurl.vekua import MaxwellMedium, solve_conductivity, solve_maxwell_static

C = np.array([0.3, -0.5, 0.8])


def probes(m=400, radius=0.8, seed=1):
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(m, 3))
    return radius * u / np.linalg.norm(u, axis=1)[:, None] * rng.random((m, 1)) ** (1 / 3)


def l2(grid, v):
    return float(np.sqrt(np.sum(v**2) * grid.cell_volume))


def errors(grid):
    x = grid.points
    r2 = np.sum(x**2, axis=1)
    out = {}
    p = probes()
    exact = np.concatenate([(p @ C)[:, None], -np.cross(p, C)], axis=1) / 3.0
    got = quaternion_potential(grid, np.tile(np.r_[0.0, C], (grid.n_interior, 1)), p)
    out["T[c] off-grid max"] = float(np.abs(got - exact).max() / np.abs(exact).max())

    R = right_inverse_curl(constant(grid, C))
    out["R[c] vs -x*c/2"] = l2(grid, R.values + 0.5 * np.cross(x, C)) / l2(grid, 0.5 * np.cross(x, C))
    c = fd_curl(R)
    m = c.accuracy_mask
    out["curl R[c] - c"] = float(np.linalg.norm(c.values[m] - C) / np.linalg.norm(np.broadcast_to(C, (m.sum(), 3))))

    w, Dw = bump_quaternion(x, (1.0, -2.0, 0.5), 0.6, 4)
    out["T[Dw] - w"] = l2(grid, quaternion_potential(grid, Dw, x) - w) / l2(grid, w)

    phi = GridField(grid, "scalar", np.exp(x[:, 0]))
    rhs = np.exp(2 * x[:, 0]) * (-10 * x[:, 0] + 2 * (1 - r2 - 2 * x[:, 0] ** 2))
    u, _ = solve_conductivity(phi, GridField(grid, "scalar", rhs))
    ue = (1 - r2) * x[:, 0]
    out["conductivity u"] = l2(grid, u.values - ue) / l2(grid, ue)

    eps = np.exp(x[:, 2])
    rho = eps * x[:, 0] * (10 + 2 * x[:, 2])
    gh = np.stack([1 - r2 - 2 * x[:, 0] ** 2, -2 * x[:, 0] * x[:, 1], -2 * x[:, 0] * x[:, 2]], 1)
    zero = np.zeros((grid.n_interior, 3))
    med = MaxwellMedium(GridField(grid, "scalar", eps), GridField(grid, "scalar", np.ones(grid.n_interior)),
                        GridField(grid, "scalar", rho), GridField(grid, "vector", zero),
                        grad_eps=np.stack([0 * eps, 0 * eps, eps], 1), grad_mu=zero)
    E, _, _ = solve_maxwell_static(med)
    out["E, eps = exp(x3)"] = l2(grid, E.values + gh) / l2(grid, gh)
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[16, 24, 32])
    args = ap.parse_args()
    ball = build_ball(1.0)
    hs, table = [], {}
    for n in args.sizes:
        t = time.perf_counter()
        grid = voxelize(ball, n)
        hs.append(grid.h)
        for k, v in errors(grid).items():
            table.setdefault(k, []).append(v)
        print(f"n={n:3d} h={grid.h:.4f} done in {time.perf_counter() - t:.1f} s")
    print(f"\n{'quantity':22s}" + "".join(f"{'n=' + str(n):>11s}" for n in args.sizes) + "      order")
    for k, errs in table.items():
        p = np.polyfit(np.log(hs), np.log(errs), 1)[0] if len(hs) > 1 else float("nan")
        print(f"{k:22s}" + "".join(f"{e:11.3e}" for e in errs) + f"  {p:9.2f}")


if __name__ == "__main__":
    main()
