"""Direct pairwise kernel sums (numba).

The hot loops use the plain point kernels with coincident points skipped;
near-field modifications (excluded or smeared singular cells) are applied
afterwards as sparse corrections, which keeps the inner loops branch-light.
Coordinates and channels are passed structure-of-arrays.
"""
import os

import numba
import numpy as np
from numba import njit, prange

if os.environ.get("STARCURL_THREADS"):
    numba.set_num_threads(max(1, min(int(os.environ["STARCURL_THREADS"]), numba.config.NUMBA_NUM_THREADS)))


@njit(parallel=True, fastmath=True, cache=True)
def quaternion_moments(tgt, src, w, q):
    """Sum over sources of w |d|^-3 (d . qv, q0 d + d x qv) with d = y - x.

    With E(d) = -d / (4 pi |d|^3) this is -4 pi sum w E(d) q, up to the sign
    of the scalar part: sum w E q = -(1/4pi) (-a0, avec).
    """
    n = tgt.shape[1]
    m = src.shape[1]
    out = np.zeros((n, 4))
    sx, sy, sz = src[0], src[1], src[2]
    q0, q1, q2, q3 = q[0], q[1], q[2], q[3]
    for i in prange(n):
        x0 = tgt[0, i]
        x1 = tgt[1, i]
        x2 = tgt[2, i]
        a0 = 0.0
        a1 = 0.0
        a2 = 0.0
        a3 = 0.0
        for j in range(m):
            d0 = sx[j] - x0
            d1 = sy[j] - x1
            d2 = sz[j] - x2
            r2 = d0 * d0 + d1 * d1 + d2 * d2
            ir = 1.0 / np.sqrt(r2) if r2 > 1e-30 else 0.0
            f = ir * ir * ir * w[j]
            v0 = q0[j] * f
            v1 = q1[j] * f
            v2 = q2[j] * f
            v3 = q3[j] * f
            a0 += d0 * v1 + d1 * v2 + d2 * v3
            a1 += d0 * v0 + d1 * v3 - d2 * v2
            a2 += d1 * v0 + d2 * v1 - d0 * v3
            a3 += d2 * v0 + d0 * v2 - d1 * v1
        out[i, 0] = a0
        out[i, 1] = a1
        out[i, 2] = a2
        out[i, 3] = a3
    return out


@njit(parallel=True, fastmath=True, cache=True)
def dot_moment(tgt, src, w, g):
    """Sum over sources of w |d|^-3 d . g with d = y - x."""
    n = tgt.shape[1]
    m = src.shape[1]
    out = np.zeros(n)
    sx, sy, sz = src[0], src[1], src[2]
    g0, g1, g2 = g[0], g[1], g[2]
    for i in prange(n):
        x0 = tgt[0, i]
        x1 = tgt[1, i]
        x2 = tgt[2, i]
        acc = 0.0
        for j in range(m):
            d0 = sx[j] - x0
            d1 = sy[j] - x1
            d2 = sz[j] - x2
            r2 = d0 * d0 + d1 * d1 + d2 * d2
            ir = 1.0 / np.sqrt(r2) if r2 > 1e-30 else 0.0
            acc += (d0 * g0[j] + d1 * g1[j] + d2 * g2[j]) * (ir * ir * ir * w[j])
        out[i] = acc
    return out


@njit(parallel=True, fastmath=True, cache=True)
def inverse_distance_sum(tgt, src, w, u):
    """Sum over sources of w u / |y - x|."""
    n = tgt.shape[1]
    m = src.shape[1]
    out = np.zeros(n)
    sx, sy, sz = src[0], src[1], src[2]
    for i in prange(n):
        x0 = tgt[0, i]
        x1 = tgt[1, i]
        x2 = tgt[2, i]
        acc = 0.0
        for j in range(m):
            d0 = sx[j] - x0
            d1 = sy[j] - x1
            d2 = sz[j] - x2
            r2 = d0 * d0 + d1 * d1 + d2 * d2
            ir = 1.0 / np.sqrt(r2) if r2 > 1e-30 else 0.0
            acc += u[j] * w[j] * ir
        out[i] = acc
    return out
