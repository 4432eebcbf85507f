"""Integrals of motion: the cubic ansatz, determining equations, certification.

Conventions used throughout the package:

* L = x p2 - y p1.
* Quantum integral  X = sum A_ijk {L^i, p1^j p2^k} + {g1, p1} + {g2, p2}.
* Classical symbol  X = 2 (f1 p1^3 + f2 p1^2 p2 + f3 p1 p2^2 + f4 p2^3 + g1 p1 + g2 p2),
  so phi = 2 g1 and psi = 2 g2 in the trajectory equation.

With P = 3 f1 Vx + f2 Vy, Q = f3 Vx + 3 f4 Vy and R = 2 (f2 Vx + f3 Vy) the
determining equations read

    g1_x = P,   g2_y = Q,   g1_y + g2_x = R,
    g1 Vx + g2 Vy = hbar^2/4 [f1 Vxxx + f2 Vxxy + f3 Vxyy + f4 Vyyy
                              + 8 A300 (x Vy - y Vx) + 2 (A210 Vx + A201 Vy)].

The first three are solvable for g only if R_xy - P_yy - Q_xx = 0, which is
the linear compatibility condition on V.
"""

import datetime
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import chebyshev as C

from .errors import (DerivativeUnavailable, IncompatibleAnsatz, QuadratureFailure, UndefinedG,
                     ValidationError)
from .potentials import GUARD, PotentialSpec, sample_region
from .derivatives import polynomial_jet

A_KEYS = ("300", "210", "201", "120", "111", "102", "030", "021", "012", "003")
IDX = {k: i for i, k in enumerate(A_KEYS)}
EPS13 = np.finfo(float).eps ** (1 / 3)


# ------------------------------------------------------------------ f polys

def f_coeffs(A):
    """Monomial coefficients {(p, q): c} of f1..f4 (powers of x, y)."""
    a = dict(zip(A_KEYS, np.asarray(A, dtype=float)))
    f1 = {(0, 3): -a["300"], (0, 2): a["210"], (0, 1): -a["120"], (0, 0): a["030"]}
    f2 = {(1, 2): 3 * a["300"], (1, 1): -2 * a["210"], (0, 2): a["201"], (1, 0): a["120"],
          (0, 1): -a["111"], (0, 0): a["021"]}
    f3 = {(2, 1): -3 * a["300"], (2, 0): a["210"], (1, 1): -2 * a["201"], (1, 0): a["111"],
          (0, 1): -a["102"], (0, 0): a["012"]}
    f4 = {(3, 0): a["300"], (2, 0): a["201"], (1, 0): a["102"], (0, 0): a["003"]}
    return f1, f2, f3, f4


def f_polys(A, point):
    """(f1, f2, f3, f4) at a point (or array of points)."""
    pt = np.asarray(point, dtype=float)
    x, y = pt[..., 0], pt[..., 1]
    out = []
    for cf in f_coeffs(A):
        out.append(sum(c * x ** p * y ** q for (p, q), c in cf.items()))
    return tuple(out)


def basis_A(name):
    A = np.zeros(10)
    A[IDX[name]] = 1.0
    return A


# ------------------------------------------------------------- g functions

class ZeroG:
    def __call__(self, x, y):
        z = np.zeros(np.broadcast(x, y).shape)
        return z, z.copy()

    def jacobian(self, x, y):
        z = np.zeros(np.broadcast(x, y).shape)
        return z, z.copy(), z.copy(), z.copy()


class FunctionG:
    """g from callables; ``jac`` returns (g1_x, g1_y, g2_x, g2_y)."""

    def __init__(self, g1, g2, jac=None, scale=1.0):
        self.g1, self.g2, self.jac, self.scale = g1, g2, jac, scale

    def __call__(self, x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        return self.g1(x, y) + 0 * y, self.g2(x, y) + 0 * x

    def jacobian(self, x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        if self.jac is not None:
            return tuple(np.broadcast_to(j, np.broadcast(x, y).shape) for j in self.jac(x, y))
        h = EPS13 * self.scale
        out = []
        for g in (self.g1, self.g2):
            out.append((g(x + h, y) - g(x - h, y)) / (2 * h))
            out.append((g(x, y + h) - g(x, y - h)) / (2 * h))
        return tuple(out)


class ChebyshevG:
    """Tensor Chebyshev fit of (g1, g2) on a rectangle."""

    def __init__(self, c1, c2, region):
        self.c1, self.c2 = np.asarray(c1), np.asarray(c2)
        self.region = tuple(float(r) for r in region)
        xlo, xhi, ylo, yhi = self.region
        self._sx, self._sy = 2 / (xhi - xlo), 2 / (yhi - ylo)
        self._deg = self.c1.shape[0] - 1
        self._slack_u, self._slack_v = 1e-9 * self._sx, 1e-9 * self._sy
        pad = lambda a: np.pad(a, [(0, self.c1.shape[0] - a.shape[0]), (0, self.c1.shape[1] - a.shape[1])])
        # stacked (g1, g2, g1x, g1y, g2x, g2y) coefficient blocks
        self._all = np.stack([self.c1, self.c2,
                              pad(C.chebder(self.c1, axis=0)) * self._sx,
                              pad(C.chebder(self.c1, axis=1)) * self._sy,
                              pad(C.chebder(self.c2, axis=0)) * self._sx,
                              pad(C.chebder(self.c2, axis=1)) * self._sy])

    @classmethod
    def fit(cls, g, region, deg=32, n=None):
        xlo, xhi, ylo, yhi = region
        n = n or deg + 12
        t = np.cos(np.pi * (np.arange(n) + 0.5) / n)
        X, Y = np.meshgrid(0.5 * (xlo + xhi) + 0.5 * (xhi - xlo) * t,
                           0.5 * (ylo + yhi) + 0.5 * (yhi - ylo) * t, indexing="ij")
        g1, g2 = g(X.ravel(), Y.ravel())
        T, S = np.meshgrid(t, t, indexing="ij")
        Vm = C.chebvander2d(T.ravel(), S.ravel(), [deg, deg])
        sol = np.linalg.lstsq(Vm, np.column_stack([g1, g2]), rcond=None)[0]
        shape = (deg + 1, deg + 1)
        return cls(sol[:, 0].reshape(shape), sol[:, 1].reshape(shape), region)

    def _uv(self, x, y):
        xlo, xhi, ylo, yhi = self.region
        return (np.asarray(x, float) - 0.5 * (xlo + xhi)) * self._sx, \
            (np.asarray(y, float) - 0.5 * (ylo + yhi)) * self._sy

    def inside(self, x, y, slack=1e-9):
        xlo, xhi, ylo, yhi = self.region
        return (x >= xlo - slack) & (x <= xhi + slack) & (y >= ylo - slack) & (y <= yhi + slack)

    def _eval(self, x, y, which):
        if np.ndim(x) == 0 and np.ndim(y) == 0:
            return self._eval_scalar(float(x), float(y), which)
        u, v = self._uv(x, y)
        shape = np.broadcast(u, v).shape
        u = np.broadcast_to(u, shape).ravel()
        v = np.broadcast_to(v, shape).ravel()
        k = np.arange(self._deg + 1)
        with np.errstate(invalid="ignore"):
            # T_k(u) = cos(k arccos u); NaN outside [-1, 1] is masked below anyway
            Tu = np.cos(np.arccos(np.clip(u, -1, 1))[:, None] * k)
            Tv = np.cos(np.arccos(np.clip(v, -1, 1))[:, None] * k)
        vals = np.einsum("ni,kin->kn", Tu, np.tensordot(self._all[which], Tv, axes=([2], [1])))
        out = np.abs(u) > 1 + self._slack_u
        out |= np.abs(v) > 1 + self._slack_v
        if np.any(out):
            vals = np.where(out, np.nan, vals)
        return tuple(r.reshape(shape) for r in vals)

    def _eval_scalar(self, x, y, which):
        xlo, xhi, ylo, yhi = self.region
        u = (x - 0.5 * (xlo + xhi)) * self._sx
        v = (y - 0.5 * (ylo + yhi)) * self._sy
        n = (which.stop - which.start)
        if abs(u) > 1 + self._slack_u or abs(v) > 1 + self._slack_v:
            return tuple(np.float64(np.nan) for _ in range(n))
        k = np.arange(self._deg + 1)
        Tu = np.cos(k * math.acos(min(max(u, -1.0), 1.0)))
        Tv = np.cos(k * math.acos(min(max(v, -1.0), 1.0)))
        return tuple((self._all[which] @ Tv) @ Tu)

    def __call__(self, x, y):
        return self._eval(x, y, slice(0, 2))

    def jacobian(self, x, y):
        return self._eval(x, y, slice(2, 6))


# ---------------------------------------------------------------- jets

def _shift(J, axis):
    di, dj = (1, 0) if axis == "x" else (0, 1)
    return {(i, j): J[(i + di, j + dj)] for (i, j) in J if (i + di, j + dj) in J}


def _jmul(a, b, order):
    out = {}
    for i in range(order + 1):
        for j in range(order + 1 - i):
            s = 0.0
            for p in range(i + 1):
                for q in range(j + 1):
                    s = s + _binom(i, p) * _binom(j, q) * a[(p, q)] * b[(i - p, j - q)]
            out[(i, j)] = s
    return out


def _binom(n, k):
    from math import comb
    return comb(n, k)


def _jlin(terms, order):
    keys = [(i, j) for i in range(order + 1) for j in range(order + 1 - i)]
    return {k: sum(c * t[k] for c, t in terms) for k in keys}


def strain_jets(A, Vjet, x, y, order=2):
    """Jets of P, Q, R (up to ``order``) for coefficient vector A."""
    f1, f2, f3, f4 = (polynomial_jet(cf, x, y) for cf in f_coeffs(A))
    Vx, Vy = _shift(Vjet, "x"), _shift(Vjet, "y")
    m = lambda f, v: _jmul(f, v, order)
    P = _jlin([(3, m(f1, Vx)), (1, m(f2, Vy))], order)
    Q = _jlin([(1, m(f3, Vx)), (3, m(f4, Vy))], order)
    R = _jlin([(2, m(f2, Vx)), (2, m(f3, Vy))], order)
    return P, Q, R, (f1, f2, f3, f4)


def hbar_bracket(A, Vjet, x, y, f=None):
    """The bracket multiplying hbar^2/4 on the right-hand side."""
    a = dict(zip(A_KEYS, np.asarray(A, float)))
    if f is None:
        f = [polynomial_jet(cf, x, y) for cf in f_coeffs(A)]
    f1, f2, f3, f4 = (fj[(0, 0)] for fj in f)
    V = Vjet
    return (f1 * V[(3, 0)] + f2 * V[(2, 1)] + f3 * V[(1, 2)] + f4 * V[(0, 3)]
            + 8 * a["300"] * (x * V[(0, 1)] - y * V[(1, 0)])
            + 2 * (a["210"] * V[(1, 0)] + a["201"] * V[(0, 1)]))


def _vjet(spec, x, y):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    d = spec.guard_distance(x, y)
    if d is not None and np.any(d < 10 * GUARD):
        raise DerivativeUnavailable("sample point inside a pole guard band")
    try:
        J = spec.jet(x, y)
    except Exception as e:
        raise DerivativeUnavailable(f"{type(e).__name__}: {e}")
    if not all(np.all(np.isfinite(v)) for v in J.values()):
        raise DerivativeUnavailable("non-finite potential derivatives")
    return J


# ------------------------------------------------------- Cesaro integration

_GL_T, _GL_W = np.polynomial.legendre.leggauss(48)
_GL_T, _GL_W = 0.5 * (_GL_T + 1), 0.5 * _GL_W


class CesaroG:
    """g reconstructed from the strain-like data (P, Q, R/2) by line integrals.

    Straight segments from ``base`` are used (Cesaro-Volterra formula); the
    result is path independent exactly when the compatibility condition
    holds.  ``rigid = (k, m1, m2)`` adds (m1 - k (y - y0), m2 + k (x - x0)).
    """

    def __init__(self, spec, A, base, rigid=(0.0, 0.0, 0.0), nodes=None):
        self.spec, self.A = spec, np.asarray(A, float)
        self.base = tuple(float(b) for b in base)
        self.rigid = tuple(float(r) for r in rigid)
        self.t, self.w = (_GL_T, _GL_W) if nodes is None else nodes

    def _nodes(self, x, y):
        x = np.atleast_1d(np.asarray(x, float))
        y = np.atleast_1d(np.asarray(y, float))
        x0, y0 = self.base
        d = [x - x0, y - y0]
        XI = x0 + np.outer(d[0], self.t)
        YI = y0 + np.outer(d[1], self.t)
        return x, y, d, XI, YI

    def _line(self, A, J, XI, YI, d, want_rot=False):
        P, Q, R, _ = strain_jets(A, J, XI.ravel(), YI.ravel(), order=1)
        shp = XI.shape
        eps = {(0, 0): P, (1, 1): Q, (0, 1): {k: 0.5 * v for k, v in R.items()}}
        eps[(1, 0)] = eps[(0, 1)]
        E = lambda i, j, der=(0, 0): eps[(i, j)][der].reshape(shp)
        dk = lambda k: (1, 0) if k == 0 else (0, 1)
        omt = 1.0 - self.t
        u = []
        for i in range(2):
            acc = 0.0
            for j in range(2):
                acc = acc + E(i, j) * d[j][:, None]
                for k in range(2):
                    term = E(i, j, dk(k)) - E(k, j, dk(i))
                    acc = acc + omt * d[k][:, None] * term * d[j][:, None]
            u.append(acc @ self.w)
        if not want_rot:
            return u
        # rotation omega_12 = int (d_2 eps_1k - d_1 eps_2k) d_k
        w12 = sum((E(0, k, dk(1)) - E(1, k, dk(0))) * d[k][:, None] for k in range(2)) @ self.w
        return u, w12

    def _eval(self, x, y, want_jac=False):
        x, y, d, XI, YI = self._nodes(x, y)
        J = _vjet(self.spec, XI.ravel(), YI.ravel())
        out = self._line(self.A, J, XI, YI, d, want_jac)
        u, w12 = out if want_jac else (out, None)
        k_, m1, m2 = self.rigid
        g1 = u[0] + m1 - k_ * d[1]
        g2 = u[1] + m2 + k_ * d[0]
        if not want_jac:
            return g1, g2
        Jend = _vjet(self.spec, x, y)
        Pe, Qe, Re, _ = strain_jets(self.A, Jend, x, y, order=0)
        e12 = 0.5 * Re[(0, 0)]
        return g1, g2, (Pe[(0, 0)], e12 + w12 - k_, e12 - w12 + k_, Qe[(0, 0)])

    def basis_values(self, x, y):
        """g at the points for every unit A (shape (10, n)), rigid excluded."""
        x, y, d, XI, YI = self._nodes(x, y)
        J = _vjet(self.spec, XI.ravel(), YI.ravel())
        out1, out2 = [], []
        for j in range(10):
            u = self._line(np.eye(10)[j], J, XI, YI, d)
            out1.append(u[0])
            out2.append(u[1])
        return np.array(out1), np.array(out2)

    def __call__(self, x, y):
        g1, g2 = self._eval(x, y)
        return g1.reshape(np.shape(x)), g2.reshape(np.shape(x))

    def jacobian(self, x, y):
        return self._eval(x, y, want_jac=True)[2]


# --------------------------------------------------------------- integrals

@dataclass
class ThirdOrderIntegral:
    A: np.ndarray
    g: object = field(default_factory=ZeroG)
    hbar: float = 0.0
    verified: bool = False
    tolerance: Optional[float] = None
    residual: Optional[float] = None
    label: str = ""

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float).reshape(10)
        self._f = f_coeffs(self.A)

    def f(self, x, y):
        return tuple(sum(c * x ** p * y ** q for (p, q), c in cf.items()) + 0 * x * y
                     for cf in self._f)

    def df(self, x, y):
        """Partials (d/dx, d/dy) of f1..f4."""
        out = []
        for cf in self._f:
            dx = sum(c * p * x ** (p - 1) * y ** q for (p, q), c in cf.items() if p) + 0 * x * y
            dy = sum(c * q * x ** p * y ** (q - 1) for (p, q), c in cf.items() if q) + 0 * x * y
            out.append((dx, dy))
        return out

    def symbol(self, x, y):
        """(mu, nu, rho, sigma, phi, psi) of the classical cubic form."""
        f1, f2, f3, f4 = self.f(x, y)
        g1, g2 = self.g(x, y)
        return 2 * f1, 2 * f2, 2 * f3, 2 * f4, 2 * g1, 2 * g2

    def classical(self, x, y, p1, p2):
        mu, nu, rho, sig, phi, psi = self.symbol(x, y)
        val = (mu * p1 ** 3 + nu * p1 ** 2 * p2 + rho * p1 * p2 ** 2 + sig * p2 ** 3
               + phi * p1 + psi * p2)
        if np.any(~np.isfinite(val)):
            raise UndefinedG("g-functions undefined at the requested point")
        return val

    __call__ = classical

    def term_scale(self, x, y, p1, p2):
        """Sum of the magnitudes of the six terms; a natural size for X - K."""
        mu, nu, rho, sig, phi, psi = self.symbol(x, y)
        return (np.abs(mu * p1 ** 3) + np.abs(nu * p1 ** 2 * p2) + np.abs(rho * p1 * p2 ** 2)
                + np.abs(sig * p2 ** 3) + np.abs(phi * p1) + np.abs(psi * p2))

    def grad(self, x, y, p1, p2):
        """(dX/dx, dX/dy, dX/dp1, dX/dp2)."""
        f1, f2, f3, f4 = self.f(x, y)
        (f1x, f1y), (f2x, f2y), (f3x, f3y), (f4x, f4y) = self.df(x, y)
        g1, g2 = self.g(x, y)
        g1x, g1y, g2x, g2y = self.g.jacobian(x, y)
        m = [p1 ** 3, p1 ** 2 * p2, p1 * p2 ** 2, p2 ** 3]
        dx = 2 * (f1x * m[0] + f2x * m[1] + f3x * m[2] + f4x * m[3] + g1x * p1 + g2x * p2)
        dy = 2 * (f1y * m[0] + f2y * m[1] + f3y * m[2] + f4y * m[3] + g1y * p1 + g2y * p2)
        dp1 = 2 * (3 * f1 * p1 ** 2 + 2 * f2 * p1 * p2 + f3 * p2 ** 2 + g1)
        dp2 = 2 * (f2 * p1 ** 2 + 2 * f3 * p1 * p2 + 3 * f4 * p2 ** 2 + g2)
        return dx, dy, dp1, dp2


def eval_X_classical(X: ThirdOrderIntegral, s):
    return float(X.classical(s.x1, s.x2, s.p1, s.p2))


@dataclass
class SecondOrderIntegral:
    """a L^2 + 2b L p1 + 2c L p2 + d (p1^2 - p2^2) + 2f p1 p2 + phi(x, y) (classical)."""

    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    d: float = 0.5
    f: float = 0.0
    phi: Callable = lambda x, y: 0.0 * x

    def __call__(self, x, y, p1, p2):
        L = x * p2 - y * p1
        return (self.a * L * L + 2 * self.b * L * p1 + 2 * self.c * L * p2
                + self.d * (p1 ** 2 - p2 ** 2) + 2 * self.f * p1 * p2 + self.phi(x, y))


def cartesian_second_order(spec: PotentialSpec):
    """Y = (p1^2 - p2^2)/2 + V1(x) - V2(y) of a separable potential."""
    V1, V2 = spec.parts()
    return SecondOrderIntegral(d=0.5, phi=lambda x, y: V1(x) - V2(y))


# -------------------------------------------------------- phase functions

class PhaseFunction:
    """A function of (x, y, p1, p2) with an optional analytic gradient."""

    def __init__(self, fn, grad=None, scale=1.0, name=""):
        self.fn, self._grad, self.scale, self.name = fn, grad, scale, name

    def __call__(self, x, y, p1, p2):
        return self.fn(x, y, p1, p2)

    def grad(self, x, y, p1, p2):
        if self._grad is not None:
            return self._grad(x, y, p1, p2)
        z = [np.asarray(v, float) for v in (x, y, p1, p2)]
        out = []
        for i in range(4):
            h = EPS13 * self.scale * np.maximum(1.0, np.abs(z[i]))
            up = list(z)
            dn = list(z)
            up2 = list(z)
            dn2 = list(z)
            up[i], dn[i], up2[i], dn2[i] = z[i] + h, z[i] - h, z[i] + 2 * h, z[i] - 2 * h
            out.append((8 * (self.fn(*up) - self.fn(*dn)) - (self.fn(*up2) - self.fn(*dn2))) / (12 * h))
        return tuple(out)


def as_phase_function(F, scale=1.0):
    if isinstance(F, PhaseFunction):
        return F
    grad = getattr(F, "grad", None)
    return PhaseFunction(F, grad, scale)


def hamiltonian(spec: PotentialSpec):
    def grad(x, y, p1, p2):
        gx, gy = spec.raw_grad(x, y)
        return gx, gy, p1, p2
    return PhaseFunction(lambda x, y, p1, p2: 0.5 * (p1 * p1 + p2 * p2) + spec.raw(x, y), grad,
                         name="H")


def partial_energy(spec: PotentialSpec, axis):
    """H1 = p1^2/2 + V1(x) or H2 = p2^2/2 + V2(y)."""
    V1, V2 = spec.parts()
    d1, d2 = spec.dparts()
    if axis == 0:
        return PhaseFunction(lambda x, y, p1, p2: 0.5 * p1 * p1 + V1(x),
                             lambda x, y, p1, p2: (d1(x), 0 * y, p1, 0 * p2), name="H1")
    return PhaseFunction(lambda x, y, p1, p2: 0.5 * p2 * p2 + V2(y),
                         lambda x, y, p1, p2: (0 * x, d2(y), 0 * p1, p2), name="H2")


angular_momentum = PhaseFunction(lambda x, y, p1, p2: x * p2 - y * p1,
                                 lambda x, y, p1, p2: (p2, -p1, -y, x), name="L")


def coordinate(i):
    def grad(x, y, p1, p2):
        z = [0 * x, 0 * x, 0 * x, 0 * x]
        z[i] = 1 + 0 * x
        return tuple(z)
    return PhaseFunction(lambda *s: s[i], grad, name=("x", "y", "p1", "p2")[i])


def runge_lenz(spec: PotentialSpec, i):
    """Runge-Lenz component for V = alpha/r (with L = x p2 - y p1)."""
    al = spec.params["alpha"]

    def fn(x, y, p1, p2):
        L = x * p2 - y * p1
        r = np.sqrt(x * x + y * y)
        return p2 * L + al * x / r if i == 0 else -p1 * L + al * y / r
    return PhaseFunction(fn, name=f"A{i + 1}")


def poisson_bracket(F, G, s, scale=1.0):
    """{F, G} = sum dF/dx dG/dp - dF/dp dG/dx at a PhaseState (or 4-tuple)."""
    F, G = as_phase_function(F, scale), as_phase_function(G, scale)
    z = (s.x1, s.x2, s.p1, s.p2) if hasattr(s, "x1") else tuple(s)
    a, b = F.grad(*z), G.grad(*z)
    return a[0] * b[2] + a[1] * b[3] - a[2] * b[0] - a[3] * b[1]


def build_reducible_X(Y1, Y2, square=True, scale=1.0):
    """Phase function {Y2, Y1^2} (or {Y2, Y1} when ``square`` is False)."""
    Y1, Y2 = as_phase_function(Y1, scale), as_phase_function(Y2, scale)

    def fn(x, y, p1, p2):
        br = poisson_bracket(Y2, Y1, (x, y, p1, p2), scale)
        return 2 * Y1(x, y, p1, p2) * br if square else br
    return PhaseFunction(fn, scale=scale, name="reducible")


def extract_A(F, points, rng=None, n_mom=8):
    """Least-squares A of the cubic-in-momenta part of a classical phase function."""
    rng = np.random.default_rng(1) if rng is None else rng
    rows, rhs = [], []
    pts = np.asarray(points, float)
    for (x, y) in pts:
        p = rng.normal(size=(n_mom, 2))
        v1 = np.array([F(x, y, a, b) for a, b in p])
        v2 = np.array([F(x, y, 2 * a, 2 * b) for a, b in p])
        cubic = (v2 - 2 * v1) / 6.0
        for (a, b), c in zip(p, cubic):
            mono = [a ** 3, a * a * b, a * b * b, b ** 3]
            row = np.zeros(10)
            for j in range(10):
                fj = f_polys(np.eye(10)[j], (x, y))
                row[j] = 2 * sum(m * fv for m, fv in zip(mono, fj))
            rows.append(row)
            rhs.append(c)
    return np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)[0]


# ----------------------------------------------------- determining residuals

def determining_residuals(spec: PotentialSpec, X: ThirdOrderIntegral, sample):
    """Max and RMS absolute residuals of the four determining equations."""
    pts = np.atleast_2d(np.asarray(sample, float))
    x, y = pts[:, 0], pts[:, 1]
    J = _vjet(spec, x, y)
    P, Q, R, f = strain_jets(X.A, J, x, y, order=0)
    g1, g2 = X.g(x, y)
    g1x, g1y, g2x, g2y = X.g.jacobian(x, y)
    res = {
        "g1_x": g1x - P[(0, 0)],
        "g2_y": g2y - Q[(0, 0)],
        "cross": g1y + g2x - R[(0, 0)],
        "hbar": g1 * J[(1, 0)] + g2 * J[(0, 1)] - X.hbar ** 2 / 4 * hbar_bracket(X.A, J, x, y, f),
    }
    out = {k: {"max": float(np.max(np.abs(v))), "rms": float(np.sqrt(np.mean(v ** 2)))}
           for k, v in res.items()}
    out["max"] = max(v["max"] for v in out.values())
    return out


def compatibility(spec, A, sample):
    """R_xy - P_yy - Q_xx at the sample points."""
    pts = np.atleast_2d(np.asarray(sample, float))
    x, y = pts[:, 0], pts[:, 1]
    J = _vjet(spec, x, y)
    P, Q, R, _ = strain_jets(A, J, x, y, order=2)
    return R[(1, 1)] - P[(0, 2)] - Q[(2, 0)]


# ---------------------------------------------------------- certification

@dataclass
class Certificate:
    spec: PotentialSpec
    hbar: float
    A: np.ndarray
    rigid: tuple
    base: tuple
    region: tuple
    residual: float
    singular_values: np.ndarray
    null_basis: np.ndarray
    exclude: tuple = ()
    n_points: int = 0

    def g(self):
        return CesaroG(self.spec, self.A, self.base, self.rigid)

    def integral(self, chebyshev=True, region=None, deg=32):
        g = self.g()
        if chebyshev:
            g = ChebyshevG.fit(g, self.region if region is None else region, deg=deg)
        return ThirdOrderIntegral(self.A, g, self.hbar, verified=True, tolerance=1e-6,
                                  residual=self.residual, label=self.spec.family)


def _block_scale(M):
    rn = np.sqrt(np.mean(np.sum(M * M, axis=1)))
    return M / rn if rn > 0 else M


def certify_integrability(spec: PotentialSpec, hbar=None, region=None, n=200, exclude=(),
                          rng=None, null_tol=1e-6):
    """Least-squares search for a third-order integral.

    Returns a Certificate holding the minimising A (unit norm), the rigid
    integration constants of g and residual = sigma_min / sqrt(rows).  A
    residual near zero certifies an integral; a large one is a valid
    negative answer.  ``exclude`` lists A directions (names or vectors) to
    project out, e.g. integrals that merely multiply known lower-order ones.
    """
    hbar = spec.hbar if hbar is None else float(hbar)
    region = tuple(spec.region() if region is None else region)
    rng = np.random.default_rng(0) if rng is None else rng
    xlo, xhi, ylo, yhi = region
    base = (0.5 * (xlo + xhi), 0.5 * (ylo + yhi))
    pts = sample_region(spec, n, rng, region)
    x, y = pts[:, 0], pts[:, 1]
    J = _vjet(spec, x, y)

    compat = np.zeros((n, 10))
    eq = np.zeros((n, 13))
    probe = CesaroG(spec, np.zeros(10), base)
    G1, G2 = probe.basis_values(x, y)
    for j in range(10):
        e = np.eye(10)[j]
        P, Q, R, f = strain_jets(e, J, x, y, order=2)
        compat[:, j] = R[(1, 1)] - P[(0, 2)] - Q[(2, 0)]
        eq[:, j] = G1[j] * J[(1, 0)] + G2[j] * J[(0, 1)] - hbar ** 2 / 4 * hbar_bracket(e, J, x, y, f)
    eq[:, 10] = -(y - base[1]) * J[(1, 0)] + (x - base[0]) * J[(0, 1)]
    eq[:, 11] = J[(1, 0)]
    eq[:, 12] = J[(0, 1)]

    M = np.vstack([np.hstack([_block_scale(compat), np.zeros((n, 3))]), _block_scale(eq)])
    MA, MR = M[:, :10], M[:, 10:]
    # eliminate the rigid constants
    U, s, _ = np.linalg.svd(MR, full_matrices=False)
    Ur = U[:, s > 1e-12 * max(s.max(), 1e-300)] if s.size and s.max() > 0 else U[:, :0]
    Mp = MA - Ur @ (Ur.T @ MA)

    ex = [basis_A(e) if isinstance(e, str) else np.asarray(e, float) for e in exclude]
    if ex:
        Qx, _ = np.linalg.qr(np.array(ex).T)
        B = np.linalg.svd(np.eye(10) - Qx @ Qx.T)[0][:, :10 - len(ex)]
    else:
        B = np.eye(10)
    _, sv, Vt = np.linalg.svd(Mp @ B)
    z = Vt[-1]
    A = B @ z
    A = A / np.linalg.norm(A)
    big = np.argmax(np.abs(A))
    A = A * np.sign(A[big])
    rigid = -np.linalg.lstsq(MR, MA @ A, rcond=None)[0]
    # rigid solution is in the scaled system; that is fine since the scaling is per row
    rows = M.shape[0]
    residual = float(sv[-1] / np.sqrt(rows))
    null = (B @ Vt[(sv / np.sqrt(rows)) < null_tol].T).T
    return Certificate(spec, hbar, A, tuple(float(r) for r in rigid), base, region, residual,
                       sv / np.sqrt(rows), null, tuple(str(e) if isinstance(e, str) else "vec"
                                                       for e in exclude), n)


def reconstruct_g(spec: PotentialSpec, A, base_point, region, n=41, tol=1e-6, hbar=None):
    """g on an n x n grid by line integration from base_point, plus residuals.

    The rigid constants are fixed by least squares on the hbar equation.
    Raises IncompatibleAnsatz when the compatibility residual exceeds ``tol``
    (relative to the size of its terms).
    """
    hbar = spec.hbar if hbar is None else float(hbar)
    A = np.asarray(A, float)
    xlo, xhi, ylo, yhi = region
    xs, ys = np.linspace(xlo, xhi, n), np.linspace(ylo, yhi, n)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    x, y = X.ravel(), Y.ravel()
    try:
        g0 = CesaroG(spec, A, base_point)
        g1, g2 = g0(x, y)
    except (FloatingPointError, ValueError) as e:
        raise QuadratureFailure(str(e))
    if not (np.all(np.isfinite(g1)) and np.all(np.isfinite(g2))):
        raise QuadratureFailure("non-finite line integral")
    J = _vjet(spec, x, y)
    P, Q, R, f = strain_jets(A, J, x, y, order=2)
    comp = R[(1, 1)] - P[(0, 2)] - Q[(2, 0)]
    # second derivatives of P, Q, R are measured against their size / length^2
    ell = 0.5 * min(xhi - xlo, yhi - ylo)
    size = max(np.max(np.abs(P[(0, 0)])), np.max(np.abs(Q[(0, 0)])), np.max(np.abs(R[(0, 0)])))
    rel = float(np.max(np.abs(comp)) * ell ** 2 / size) if size > 0 else 0.0
    x0, y0 = base_point
    rhs = hbar ** 2 / 4 * hbar_bracket(A, J, x, y, f) - (g1 * J[(1, 0)] + g2 * J[(0, 1)])
    Mr = np.column_stack([-(y - y0) * J[(1, 0)] + (x - x0) * J[(0, 1)], J[(1, 0)], J[(0, 1)]])
    if np.any(Mr):
        rigid = np.linalg.lstsq(Mr, rhs, rcond=None)[0]
    else:
        rigid = np.zeros(3)
    g = CesaroG(spec, A, base_point, rigid)
    g1 = g1 + rigid[1] - rigid[0] * (y - y0)
    g2 = g2 + rigid[2] + rigid[0] * (x - x0)
    eq25 = g1 * J[(1, 0)] + g2 * J[(0, 1)] - hbar ** 2 / 4 * hbar_bracket(A, J, x, y, f)
    report = {"compatibility": rel, "hbar_equation": float(np.max(np.abs(eq25))),
              "rigid": [float(r) for r in rigid]}
    if rel > tol:
        raise IncompatibleAnsatz(f"compatibility residual {rel:.3e} exceeds {tol:g}: "
                                 "no third-order integral with these A")
    return g1.reshape(X.shape), g2.reshape(X.shape), report, g


# --------------------------------------------------------- explicit cases

def antiderivative(fun, x, x0=0.0, seg=0.25):
    """int_{x0}^{x} fun(t) dt by composite Gauss-Legendre (vectorised in x)."""
    x = np.asarray(x, float)
    t, w = np.polynomial.legendre.leggauss(20)
    span = x - x0
    nseg = int(np.ceil(np.max(np.abs(span)) / seg)) if span.size and np.max(np.abs(span)) > 0 else 1
    total = np.zeros(x.shape)
    for k in range(nseg):
        a = x0 + span * k / nseg
        b = x0 + span * (k + 1) / nseg
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        nodes = mid[..., None] + half[..., None] * t
        total = total + half * (fun(nodes) @ w)
    return total


def one_dimensional_integral(spec: PotentialSpec, sigma=None, x_base=None):
    """The explicit cubic integral of the one-dimensional quantum families.

    X = {L, p1^2} + {(sigma - 3V) y, p1} + {-sigma x + 2 x V + W, p2} with W' = V
    and sigma the sum of the roots of the cubic ODE satisfied by V.
    """
    from .potentials import elliptic_sigma
    if not spec.separable:
        raise ValidationError("needs a V(x) family")
    V, _ = spec.parts()
    dV, _ = spec.dparts()
    sig = elliptic_sigma(spec) if sigma is None else float(sigma)
    xb = 0.5 * sum(spec.region()[:2]) if x_base is None else x_base

    def g1(x, y):
        return (sig - 3 * V(x)) * y

    def g2(x, y):
        return -sig * x + 2 * x * V(x) + antiderivative(V, x, xb)

    def jac(x, y):
        v, dv = V(x), dV(x)
        return -3 * dv * y, sig - 3 * v, -sig + 3 * v + 2 * x * dv, 0 * x
    return ThirdOrderIntegral(basis_A("120"), FunctionG(g1, g2, jac), spec.hbar,
                              label=f"{spec.family} explicit")


# -------------------------------------------------------------- cache

def save_certificate(cert: Certificate, path, tolerance=1e-6, deg=32):
    """JSON record plus an npz with the Chebyshev coefficients of g."""
    path = Path(path)
    cg = ChebyshevG.fit(cert.g(), cert.region, deg=deg)
    npz = path.with_suffix(".npz")
    np.savez(npz, c1=cg.c1, c2=cg.c2, region=np.array(cert.region))
    rec = {
        "potential_id": cert.spec.family,
        "params": {k: v for k, v in cert.spec.params.items()},
        "hbar": cert.hbar,
        "A": [float(a) for a in cert.A],
        "g_grid_ref": npz.name,
        "residual": cert.residual,
        "tolerance": tolerance,
        "date": datetime.date.today().isoformat(),
        "provenance": "certify_integrability",
    }
    path.write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n")
    return rec


def load_certificate(path):
    """ThirdOrderIntegral from a saved record (g from the Chebyshev grid)."""
    path = Path(path)
    rec = json.loads(path.read_text())
    data = np.load(path.parent / rec["g_grid_ref"])
    g = ChebyshevG(data["c1"], data["c2"], tuple(data["region"]))
    return rec, ThirdOrderIntegral(np.array(rec["A"]), g, rec["hbar"], verified=True,
                                   tolerance=rec["tolerance"], residual=rec["residual"],
                                   label=rec["potential_id"])
