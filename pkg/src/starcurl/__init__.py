"""Quaternionic div-curl, Beltrami and Vekua solvers on star-shaped domains.

Volume integral operators (Teodorescu transform, Newton potential, monogenic
completion) are evaluated by voxel quadrature; boundary corrections use
polynomial harmonic bases fitted on a triangulated boundary.
"""
from .algebra import GridField, Quaternion, ScalarFunction, fd_curl, fd_div, fd_grad, fd_laplacian, moisil_teodorescu, quat_mul
from .beltrami import BeltramiConfig, SeriesDivergenceError, beltrami_neumann_bvp, beltrami_series, operator_norm_bound
from .bvp import right_inverse_curl_dirichlet, right_inverse_curl_neumann, solve_laplace_neumann
from .divcurl import CompatibilityError, DivCurlData, double_curl_inverse, helmholtz_potentials, right_inverse_curl, solve_div_curl
from .geometry import StarDomain, VoxelGrid, build_ball, build_box, build_radial, voxelize
from .potentials import VolumeOperatorConfig, cauchy_operator, newton_potential, single_layer, t0, t1, t2, teodorescu
from .report import SolveReport
from .vekua import (
    IrrotationalCoefficient,
    MaxwellMedium,
    SolverError,
    antigradient,
    phi_teodorescu,
    solve_conductivity,
    solve_d_minus_alpha,
    solve_d_plus_M,
    solve_maxwell_static,
)

__version__ = "0.1.0"
