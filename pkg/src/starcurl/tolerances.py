"""Calibrated tolerances shared by tests, the CLI and the acceptance suite.

Values come from ``scripts/calibrate.py`` on the unit ball; rerun it after
changing quadrature or finite-difference defaults.
"""

# relative residual of identities such as curl R[g] = g, scaled as C (h + 1/N_t)
C_OP = 0.69
# relative fd divergence accepted as "solenoidal" input
TOL_COMPAT = 5e-2
# quadrature tolerance for pointwise operator values (relative to field scale)
TOL_QUAD = 0.05
# boundary residual of the Neumann / Dirichlet corrections relative to ||g||_2
TOL_BVP = 1e-2
TOL_BELTRAMI = 0.03
TOL_VEKUA = 0.03


def tol_op(h: float, ray_nodes: int = 32) -> float:
    return C_OP * (h + 1.0 / ray_nodes)
