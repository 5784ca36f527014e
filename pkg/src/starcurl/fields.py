"""Analytic test fields: constants, curls of interior bumps, random solenoidal polynomials."""
from __future__ import annotations

import numpy as np

from . import _poly
from .algebra import GridField


def constant(grid, c) -> GridField:
    c = np.asarray(c, dtype=float)
    return GridField(grid, "vector", np.tile(c, (grid.n_interior, 1)))


def bump(x, radius: float = 0.75, power: int = 4, center=(0.0, 0.0, 0.0)):
    """(1 - |x-c|^2/s^2)^p inside the ball of radius s, zero outside; returns (value, gradient)."""
    y = np.asarray(x, dtype=float) - np.asarray(center, dtype=float)
    s2 = np.einsum("...i,...i->...", y, y) / radius**2
    base = np.clip(1.0 - s2, 0.0, None)
    val = base**power
    grad = (-2.0 * power / radius**2) * (base ** (power - 1))[..., None] * y
    return val, grad


def bump_hessian(x, radius: float = 0.75, power: int = 4, center=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Hessian of ``bump``, shape (..., 3, 3)."""
    y = np.asarray(x, dtype=float) - np.asarray(center, dtype=float)
    s2 = np.einsum("...i,...i->...", y, y) / radius**2
    base = np.clip(1.0 - s2, 0.0, None)
    a = (-2.0 * power / radius**2) * base ** (power - 1)
    b = (4.0 * power * (power - 1) / radius**4) * base ** (power - 2)
    return a[..., None, None] * np.eye(3) + b[..., None, None] * y[..., :, None] * y[..., None, :]


def bump_quaternion(x, c=(1.0, 0.0, 0.0), radius: float = 0.75, power: int = 4, center=(0.0, 0.0, 0.0)):
    """w = b + grad b x c and its exact D w = grad b + (c . grad) grad b - c lap b."""
    c = np.asarray(c, dtype=float)
    val, grad = bump(x, radius, power, center)
    H = bump_hessian(x, radius, power, center)
    w = np.concatenate([val[..., None], np.cross(grad, c)], axis=-1)
    lap = np.trace(H, axis1=-2, axis2=-1)
    Dw = np.concatenate([np.zeros_like(val)[..., None], grad + H @ c - lap[..., None] * c], axis=-1)
    return w, Dw


def bump_curl(a=(0.0, 0.0, 1.0), radius: float = 0.75, power: int = 4, center=(0.0, 0.0, 0.0)):
    """Evaluator of curl(a b) = grad b x a, solenoidal with support inside the bump ball."""
    a = np.asarray(a, dtype=float)

    def f(x):
        _, gb = bump(x, radius, power, center)
        return np.cross(gb, a)

    return f


class SolenoidalPolynomial:
    """curl of a random vector polynomial A of total degree <= degree (analytic)."""

    def __init__(self, rng: np.random.Generator, degree: int = 3, center=(0.0, 0.0, 0.0), scale: float = 1.0):
        self.exps = _poly.exponents(degree)
        self.center = np.asarray(center, dtype=float)
        self.scale = float(scale)
        self.coef = rng.normal(size=(len(self.exps), 3))
        d = [[_poly.derivative(self.coef[:, i], self.exps, j) for j in range(3)] for i in range(3)]
        # curl A = (d2 A3 - d3 A2, d3 A1 - d1 A3, d1 A2 - d2 A1)
        self.curl_coef = np.stack([d[2][1] - d[1][2], d[0][2] - d[2][0], d[1][0] - d[0][1]], axis=1) / self.scale

    def __call__(self, x) -> np.ndarray:
        y = (np.asarray(x, dtype=float) - self.center) / self.scale
        return _poly.monomials(y, self.exps) @ self.curl_coef

    def curl(self, x) -> np.ndarray:
        """curl of the field itself, for convenience in oracles."""
        y = (np.asarray(x, dtype=float) - self.center) / self.scale
        d = [[_poly.derivative(self.curl_coef[:, i], self.exps, j) for j in range(3)] for i in range(3)]
        cc = np.stack([d[2][1] - d[1][2], d[0][2] - d[2][0], d[1][0] - d[0][1]], axis=1) / self.scale
        return _poly.monomials(y, self.exps) @ cc


def random_solenoidal(grid, rng: np.random.Generator, degree: int = 3) -> GridField:
    dom = grid.domain
    center = dom.center if dom is not None else np.zeros(3)
    scale = 0.5 * dom.diameter if dom is not None else 1.0
    p = SolenoidalPolynomial(rng, degree, center, scale)
    return GridField(grid, "vector", p(grid.points))
