"""Smooth convex potentials ``f`` with first-order oracles.

A potential is defined on all of R^n; samplers only evaluate it on K.
The Lipschitz constant depends on the body, so it is obtained through
``lipschitz_on(body)``; the smoothness constant is intrinsic.
"""
from __future__ import annotations

import numpy as np


class Potential:
    """Base class.  ``value`` and ``grad`` accept ``(n,)`` or ``(..., n)``."""

    is_uniform = False

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def line_values(self, x, d, t):
        """``f(x_i + t_ij d_i)`` for a batch of lines; ``t`` has shape ``(B, m)``."""
        return self.value(x[:, None, :] + t[..., None] * d[:, None, :])

    @property
    def smoothness(self):
        raise NotImplementedError

    def lipschitz_on(self, body):
        raise NotImplementedError


class Uniform(Potential):
    """Constant potential; the target is the uniform measure on K."""

    is_uniform = True

    def __repr__(self):
        return "Uniform()"

    def value(self, x):
        return np.zeros(np.shape(x)[:-1])

    def grad(self, x):
        return np.zeros(np.shape(x))

    @property
    def smoothness(self):
        return 0.0

    def lipschitz_on(self, body):
        return 0.0


class IsotropicGaussian(Potential):
    """``f(x) = |x|^2 / (2 sigma^2)``."""

    def __init__(self, sigma):
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        self.sigma = float(sigma)

    def __repr__(self):
        return f"IsotropicGaussian(sigma={self.sigma})"

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return np.einsum("...i,...i->...", x, x) / (2 * self.sigma**2)

    def grad(self, x):
        return np.asarray(x, dtype=float) / self.sigma**2

    def line_values(self, x, d, t):
        xx = np.einsum("ij,ij->i", x, x)[:, None]
        xd = np.einsum("ij,ij->i", x, d)[:, None]
        dd = np.einsum("ij,ij->i", d, d)[:, None]
        return (xx + t * (2 * xd + t * dd)) / (2 * self.sigma**2)

    @property
    def smoothness(self):
        return 1.0 / self.sigma**2

    def lipschitz_on(self, body):
        return body.circumradius / self.sigma**2


class Quadratic(Potential):
    """``f(x) = x^T H x / 2 + <c, x>`` with ``H`` symmetric positive semidefinite."""

    def __init__(self, H, c=None):
        H = np.array(H, dtype=float)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ValueError("H must be square")
        H = 0.5 * (H + H.T)
        eig = np.linalg.eigvalsh(H)
        if eig[0] < -1e-12 * max(1.0, abs(eig[-1])):
            raise ValueError("H must be positive semidefinite")
        self.H = H
        self.c = np.zeros(len(H)) if c is None else np.array(c, dtype=float)
        self._norm = float(max(eig[-1], 0.0))

    def __repr__(self):
        return f"Quadratic(n={len(self.H)})"

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", x, self.H, x) + x @ self.c

    def grad(self, x):
        return np.asarray(x, dtype=float) @ self.H + self.c

    def line_values(self, x, d, t):
        f0 = self.value(x)[:, None]
        slope = (np.einsum("ij,ij->i", x @ self.H, d) + d @ self.c)[:, None]
        curv = 0.5 * np.einsum("ij,ij->i", d @ self.H, d)[:, None]
        return f0 + t * (slope + t * curv)

    @property
    def smoothness(self):
        return self._norm

    def lipschitz_on(self, body):
        return self._norm * body.circumradius + float(np.linalg.norm(self.c))


def _interior_points(body, count, rng):
    lo, hi = body.bounding_box()
    out = []
    while sum(len(o) for o in out) < count:
        x = rng.uniform(lo, hi, size=(4 * count, body.dimension))
        out.append(x[body.membership(x)])
    return np.concatenate(out)[:count]


def check_grad(potential, body, samples=100, h=1e-5, seed=0):
    """Worst relative error of ``grad`` against central finite differences.

    The error at a point is ``|g - g_fd| / max(1, |g|)``.
    """
    rng = np.random.default_rng(seed)
    x = _interior_points(body, samples, rng)
    n = body.dimension
    fd = np.empty_like(x)
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        fd[:, i] = (potential.value(x + e) - potential.value(x - e)) / (2 * h)
    g = potential.grad(x)
    err = np.linalg.norm(g - fd, axis=1) / np.maximum(1.0, np.linalg.norm(g, axis=1))
    return float(np.max(err))


def verify_constants(potential, body, pairs=1000, seed=0):
    """Check the declared Lipschitz and smoothness constants on random pairs in K.

    Returns ``(lipschitz_ok, smooth_ok, monotone_ok)``; the last flag is the
    gradient-monotonicity (convexity) spot check.
    """
    rng = np.random.default_rng(seed)
    x = _interior_points(body, pairs, rng)
    y = _interior_points(body, pairs, rng)
    gx, gy = potential.grad(x), potential.grad(y)
    L = potential.lipschitz_on(body)
    beta = potential.smoothness
    lip = np.all(np.linalg.norm(gx, axis=1) <= L * (1 + 1e-9) + 1e-300)
    dist = np.linalg.norm(x - y, axis=1)
    smooth = np.all(np.linalg.norm(gx - gy, axis=1) <= beta * dist * (1 + 1e-9) + 1e-300)
    mono = np.all(np.einsum("ij,ij->i", gx - gy, x - y) >= -1e-12)
    return bool(lip), bool(smooth), bool(mono)
