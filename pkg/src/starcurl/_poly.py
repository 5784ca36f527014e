"""Dense monomial machinery for small polynomial bases in three variables."""
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def exponents(degree: int, exact: bool = False) -> np.ndarray:
    """Exponent triples of total degree <= degree (or == degree), graded order."""
    out = []
    degs = [degree] if exact else range(degree + 1)
    for d in degs:
        for a in range(d, -1, -1):
            for b in range(d - a, -1, -1):
                out.append((a, b, d - a - b))
    e = np.array(out, dtype=np.int64).reshape(-1, 3)
    e.setflags(write=False)
    return e


def index_of(exps: np.ndarray) -> dict:
    return {tuple(int(v) for v in e): i for i, e in enumerate(exps)}


def monomials(y: np.ndarray, exps: np.ndarray) -> np.ndarray:
    """y^a for points y (..., 3) and exponents (M, 3) -> (..., M)."""
    y = np.asarray(y, dtype=float)
    out = np.ones(y.shape[:-1] + (len(exps),))
    for k in range(3):
        p = int(exps[:, k].max()) if len(exps) else 0
        powers = y[..., k, None] ** np.arange(p + 1)
        out *= powers[..., exps[:, k]]
    return out


def monomial_gradients(y: np.ndarray, exps: np.ndarray) -> np.ndarray:
    """d/dy_k y^a -> (..., M, 3)."""
    y = np.asarray(y, dtype=float)
    out = np.empty(y.shape[:-1] + (len(exps), 3))
    for k in range(3):
        e = exps.copy()
        coef = e[:, k].astype(float)
        e[:, k] = np.maximum(e[:, k] - 1, 0)
        out[..., k] = coef * monomials(y, e)
    return out


def laplacian_matrix(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Matrix of the Laplacian from coefficients over ``src`` to ``dst`` monomials."""
    look = index_of(dst)
    A = np.zeros((len(dst), len(src)))
    for j, e in enumerate(src):
        for k in range(3):
            if e[k] >= 2:
                f = e.copy()
                f[k] -= 2
                A[look[tuple(int(v) for v in f)], j] += e[k] * (e[k] - 1)
    return A


def times_r2(coef: np.ndarray, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Coefficients of |y|^2 p(y) over ``dst`` given p over ``src``."""
    look = index_of(dst)
    out = np.zeros((len(dst),) + coef.shape[1:])
    for j, e in enumerate(src):
        for k in range(3):
            f = e.copy()
            f[k] += 2
            out[look[tuple(int(v) for v in f)]] += coef[j]
    return out


def derivative(coef: np.ndarray, exps: np.ndarray, axis: int) -> np.ndarray:
    """Coefficients of d/dy_axis over the same exponent set."""
    look = index_of(exps)
    out = np.zeros_like(coef)
    for j, e in enumerate(exps):
        if e[axis] > 0:
            f = e.copy()
            f[axis] -= 1
            out[look[tuple(int(v) for v in f)]] += e[axis] * coef[j]
    return out
