"""Finite-difference partial derivatives and a tiny 2D jet algebra.

A jet is a dict ``{(i, j): array}`` holding d^(i+j)/dx^i dy^j of a function
at a set of points, for i + j <= 3.
"""

from math import comb

import numpy as np

ORDER = 3
KEYS = [(i, n - i) for n in range(ORDER + 1) for i in range(n, -1, -1)]
STENCIL = np.arange(-4, 5, dtype=float)


def fd_weights(offsets, m):
    """Weights w with sum_k w_k f(k h) ~ h^m f^(m)(0) (Vandermonde solve)."""
    offsets = np.asarray(offsets, dtype=float)
    n = len(offsets)
    V = np.vander(offsets, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[m] = float(np.prod(np.arange(1, m + 1)))
    return np.linalg.solve(V, rhs)


_W = np.array([fd_weights(STENCIL, m) for m in range(ORDER + 1)])


def partials_2d(fun, x, y, h, order=ORDER):
    """All partials of ``fun(x, y)`` up to ``order`` via 9x9 tensor stencils."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    X = x[:, None, None] + h * STENCIL[None, :, None]
    Y = y[:, None, None] + h * STENCIL[None, None, :]
    F = fun(X, Y)
    out = {}
    for i, j in KEYS:
        if i + j > order:
            continue
        out[(i, j)] = np.einsum("nab,a,b->n", F, _W[i], _W[j]) / h ** (i + j)
    return out


def derivatives_1d(fun, t, h, order=ORDER):
    """List [f, f', ..., f^(order)] of a scalar function via 9-point stencils."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    F = fun(t[:, None] + h * STENCIL[None, :])
    return [F @ _W[m] / h ** m for m in range(order + 1)]


def separable_jet(dv1, dv2):
    """Jet of V1(x) + V2(y) from the two 1D derivative lists."""
    n = len(dv1[0])
    jet = {k: np.zeros(n) for k in KEYS}
    jet[(0, 0)] = dv1[0] + dv2[0]
    for m in range(1, ORDER + 1):
        jet[(m, 0)] = dv1[m]
        jet[(0, m)] = dv2[m]
    return jet


class Jet(dict):
    """Truncated Taylor data with Leibniz-rule multiplication."""

    @classmethod
    def constant(cls, value, n):
        j = cls({k: np.zeros(n) for k in KEYS})
        j[(0, 0)] = np.full(n, float(value)) if np.isscalar(value) else np.asarray(value, float)
        return j

    def __add__(self, other):
        return Jet({k: self[k] + other[k] for k in KEYS})

    def __sub__(self, other):
        return Jet({k: self[k] - other[k] for k in KEYS})

    def scale(self, c):
        return Jet({k: c * self[k] for k in KEYS})

    def __mul__(self, other):
        if not isinstance(other, dict):
            return self.scale(other)
        out = {}
        for i, j in KEYS:
            s = 0.0
            for a in range(i + 1):
                for b in range(j + 1):
                    s = s + comb(i, a) * comb(j, b) * self[(a, b)] * other[(i - a, j - b)]
            out[(i, j)] = s
        return Jet(out)

    __rmul__ = __mul__


def polynomial_jet(coeffs, x, y):
    """Exact jet of sum c[(p, q)] x^p y^q."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = {k: np.zeros(x.shape) for k in KEYS}
    for (p, q), c in coeffs.items():
        if c == 0:
            continue
        for i, j in KEYS:
            if i > p or j > q:
                continue
            fx = float(np.prod(np.arange(p - i + 1, p + 1))) * x ** (p - i)
            fy = float(np.prod(np.arange(q - j + 1, q + 1))) * y ** (q - j)
            out[(i, j)] = out[(i, j)] + c * fx * fy
    return Jet(out)
