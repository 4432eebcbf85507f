"""Jacobi elliptic functions, Weierstrass p, and Painleve transcendents.

Jacobi functions use the descending Landen (AGM) scheme.  Weierstrass p is
reduced to Jacobi functions through the roots of 4t^3 - g2 t - g3.
Painleve solutions are integrated once with an error-controlled
Runge-Kutta method and cached as dense output.

Painleve conventions (Ince):

    ====  =============================================================
    P_I   w'' = 6 w^2 + x
    P_II  w'' = 2 w^3 + x w + a
    P_IV  w'' = w'^2/(2w) + 3/2 w^3 + 4 x w^2 + 2 (x^2 - a) w + b/w
    ====  =============================================================

The catalog potentials pass their scaled arguments straight into these
equations; e.g. the P_IV potential's "second argument" is the ``a`` above.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainViolation, NotCached, PoleCrossed, PoleProximity

_AGM_TOL = 1e-16
_MAX_AGM = 40


def agm(a, b):
    a, b = float(a), float(b)
    for _ in range(_MAX_AGM):
        if abs(a - b) <= _AGM_TOL * a:
            break
        a, b = 0.5 * (a + b), np.sqrt(a * b)
    return a


def ellipk(k):
    """Complete elliptic integral K for modulus ``k`` (not parameter)."""
    kp = np.sqrt(1.0 - k * k)
    if kp == 0.0:
        return np.inf
    return np.pi / (2.0 * agm(1.0, kp))


def _landen_tables(k):
    a = [1.0]
    b = [np.sqrt(max(0.0, 1.0 - k * k))]
    c = [k]
    while abs(c[-1]) > _AGM_TOL and len(a) < _MAX_AGM:
        an, bn = a[-1], b[-1]
        a.append(0.5 * (an + bn))
        b.append(np.sqrt(an * bn))
        c.append(0.5 * (an - bn))
    return np.array(a), np.array(c)


def _sn_cn_dn_scalar_k(u, k):
    if k == 0.0:
        return np.sin(u), np.cos(u), np.ones_like(u)
    if k == 1.0:
        s = 1.0 / np.cosh(u)
        return np.tanh(u), s, s.copy()
    a, c = _landen_tables(k)
    n = len(a) - 1
    phi = (2.0 ** n) * a[n] * u
    prev = phi
    for j in range(n, 0, -1):
        prev = phi
        phi = 0.5 * (phi + np.arcsin(np.clip(c[j] * np.sin(phi) / a[j], -1.0, 1.0)))
    sn = np.sin(phi)
    cn = np.cos(phi)
    # phi now holds phi_0 and prev holds phi_1; the square root is exact
    # enough (and keeps the identity tight) unless k sn is close to 1
    ksn2 = (k * sn) ** 2
    dn = np.where(ksn2 < 0.5, np.sqrt(np.abs(1.0 - ksn2)), cn / np.cos(prev - phi))
    return sn, cn, dn


def jacobi_sn_cn_dn(x, k):
    """Return ``(sn, cn, dn)`` of real argument ``x`` for modulus ``0 <= k <= 1``."""
    x = np.asarray(x, dtype=float)
    k = np.asarray(k, dtype=float)
    if np.any((k < 0) | (k > 1)):
        raise ValueError("modulus must lie in [0, 1]")
    if k.ndim == 0:
        return _sn_cn_dn_scalar_k(x, float(k))
    x, k = np.broadcast_arrays(x, k)
    sn, cn, dn = (np.empty(x.shape) for _ in range(3))
    for kv in np.unique(k):
        m = k == kv
        sn[m], cn[m], dn[m] = _sn_cn_dn_scalar_k(x[m], float(kv))
    return sn, cn, dn


def landen_sn(x, k):
    """sn through one explicit descending Landen step (consistency check)."""
    kp = np.sqrt(1.0 - k * k)
    k1 = (1.0 - kp) / (1.0 + kp)
    v = np.asarray(x, dtype=float) / (1.0 + k1)
    s1 = jacobi_sn_cn_dn(v, k1)[0]
    return (1.0 + k1) * s1 / (1.0 + k1 * s1 * s1)


# ---------------------------------------------------------------- Weierstrass


@dataclass(frozen=True)
class EllipticParams:
    """Invariants of a real Weierstrass lattice plus derived data."""

    g2: float
    g3: float

    @property
    def discriminant(self):
        return self.g2 ** 3 - 27.0 * self.g3 ** 2

    def roots(self):
        r = np.roots([4.0, 0.0, -self.g2, -self.g3])
        if self.discriminant >= 0:
            return np.sort(r.real)[::-1]
        real = r[np.argmin(np.abs(r.imag))].real
        cplx = r[np.argmax(r.imag)]
        return real, cplx

    def real_half_period(self):
        if self.g2 == 0.0 and self.g3 == 0.0:
            return np.inf
        if self.discriminant >= 0:
            e1, e2, e3 = self.roots()
            k = np.sqrt(np.clip((e2 - e3) / (e1 - e3), 0.0, 1.0))
            return ellipk(k) / np.sqrt(e1 - e3)
        e2, e1 = self.roots()
        H = abs(e2 - e1)
        k = np.sqrt(np.clip(0.5 - 0.75 * e2 / H, 0.0, 1.0))
        return ellipk(k) / np.sqrt(H)


def weierstrass_p(x, g2, g3, guard=1e-3):
    """Return ``(p, p')`` for real ``x``.

    Raises PoleProximity when ``x`` lies within ``guard`` (relative to the
    real half-period) of a lattice point.
    """
    x = np.asarray(x, dtype=float)
    lat = EllipticParams(float(g2), float(g3))
    w1 = lat.real_half_period()
    scale = w1 if np.isfinite(w1) else 1.0
    if np.isfinite(w1):
        dist = np.abs(x - 2.0 * w1 * np.round(x / (2.0 * w1)))
    else:
        dist = np.abs(x)
    if np.any(dist < guard * scale):
        raise PoleProximity("Weierstrass p evaluated near a lattice pole")

    delta = lat.discriminant
    if g2 == 0.0 and g3 == 0.0:
        return 1.0 / x ** 2, -2.0 / x ** 3
    if delta >= 0:
        e1, e2, e3 = lat.roots()
        span = e1 - e3
        k = np.sqrt(np.clip((e2 - e3) / span, 0.0, 1.0))
        sn, cn, dn = jacobi_sn_cn_dn(np.sqrt(span) * x, k)
        p = e3 + span / sn ** 2
        dp = -2.0 * span ** 1.5 * cn * dn / sn ** 3
        return p, dp
    e2, e1 = lat.roots()
    H = abs(e2 - e1)
    k = np.sqrt(np.clip(0.5 - 0.75 * e2 / H, 0.0, 1.0))
    sn, cn, dn = jacobi_sn_cn_dn(2.0 * np.sqrt(H) * x, k)
    one_minus = 1.0 - cn
    p = e2 + H * (1.0 + cn) / one_minus
    dp = -4.0 * H ** 1.5 * sn * dn / one_minus ** 2
    return p, dp


# ------------------------------------------------------------------ Painleve

BLOWUP = 1e8
PAINLEVE_KINDS = ("P_I", "P_II", "P_IV")


def painleve_rhs(kind, a=0.0, b=0.0):
    """Second derivative ``w''`` as a function of ``(x, w, w')``."""
    if kind == "P_I":
        return lambda x, w, dw: 6.0 * w * w + x
    if kind == "P_II":
        return lambda x, w, dw: 2.0 * w ** 3 + x * w + a
    if kind == "P_IV":
        return lambda x, w, dw: (dw * dw / (2.0 * w) + 1.5 * w ** 3 + 4.0 * x * w * w
                                 + 2.0 * (x * x - a) * w + b / w)
    raise ValueError(f"unknown Painleve kind {kind!r}")


@dataclass(frozen=True)
class PainleveSolution:
    """One Painleve solution integrated over ``interval`` from ``x0``.

    ``poles`` holds estimated movable singularities where the integration
    stopped; ``lo``/``hi`` bound the region actually covered.
    """

    kind: str
    a: float
    b: float
    x0: float
    w0: float
    dw0: float
    interval: tuple
    lo: float = field(default=0.0, compare=False)
    hi: float = field(default=0.0, compare=False)
    poles: tuple = field(default=(), compare=False)
    _segments: tuple = field(default=(), compare=False, repr=False)

    @classmethod
    def solve(cls, kind, x0=0.0, w0=None, dw0=0.0, interval=(-4.0, 4.0), a=0.0, b=0.0,
              rtol=1e-10, atol=1e-12):
        if w0 is None:
            # P_IV is singular at w = 0
            w0 = 1.0 if kind == "P_IV" else 0.0
        if kind == "P_IV" and w0 == 0.0:
            raise DomainViolation("P_IV is singular at w = 0; choose w0 != 0")
        f = painleve_rhs(kind, a, b)

        def rhs(x, z):
            return [z[1], f(x, z[0], z[1])]

        def blowup(x, z):
            return BLOWUP - abs(z[0])
        blowup.terminal = True

        events = [blowup]
        if kind == "P_IV":
            def zero(x, z):
                return z[0]
            zero.terminal = True
            events.append(zero)

        segments, poles = [], []
        lo, hi = x0, x0
        for end in interval:
            if end == x0:
                continue
            sol = solve_ivp(rhs, (x0, end), [w0, dw0], method="DOP853", rtol=rtol,
                            atol=atol, dense_output=True, events=events)
            reached = sol.t[-1]
            if sol.status == 1:
                z = sol.y[:, -1]
                direction = np.sign(end - x0)
                if abs(z[0]) >= 0.5 * BLOWUP:
                    # w ~ c/(x - xp)^2 near a pole: |x - xp| ~ 2|w/w'|
                    poles.append(float(reached + direction * 2.0 * abs(z[0] / z[1])))
                else:
                    poles.append(float(reached))
            segments.append((min(x0, reached), max(x0, reached), sol.sol))
            lo, hi = min(lo, reached), max(hi, reached)
        return cls(kind, float(a), float(b), float(x0), float(w0), float(dw0),
                   tuple(interval), float(lo), float(hi), tuple(poles), tuple(segments))

    def __call__(self, x):
        return painleve_eval(self, x)

    def ode_residual(self, x, h=1e-4):
        """Relative mismatch of the dense interpolant against the ODE.

        Derivatives use a fourth-order central stencil; points closer than
        two steps to the cached ends are pulled inside.
        """
        x = np.clip(np.asarray(x, dtype=float), self.lo + 2 * h, self.hi - 2 * h)
        f = painleve_rhs(self.kind, self.a, self.b)
        (w2m, d2m), (w1m, d1m), (w1p, d1p), (w2p, d2p) = (
            painleve_eval(self, x + s * h) for s in (-2, -1, 1, 2))
        w, dw = painleve_eval(self, x)
        rhs = f(x, w, dw)
        dw_fd = (w2m - 8 * w1m + 8 * w1p - w2p) / (12 * h)
        ddw_fd = (d2m - 8 * d1m + 8 * d1p - d2p) / (12 * h)
        r1 = np.abs(dw_fd - dw) / (1.0 + np.abs(dw))
        r2 = np.abs(ddw_fd - rhs) / (1.0 + np.abs(rhs))
        return np.maximum(r1, r2)

    def grid(self, n=400, guard=0.05):
        """Sample points of the cached interval outside pole guard bands."""
        x = np.linspace(self.lo, self.hi, n)
        for p in self.poles:
            x = x[np.abs(x - p) > guard]
        return x


def painleve_eval(sol, x):
    """Return ``(w, w')`` from the cached dense output."""
    x = np.asarray(x, dtype=float)
    if np.any(x < sol.lo) or np.any(x > sol.hi):
        lo_hit = np.any(x < sol.lo) and any(p <= sol.lo + 1e-12 for p in sol.poles)
        hi_hit = np.any(x > sol.hi) and any(p >= sol.hi - 1e-12 for p in sol.poles)
        if lo_hit or hi_hit:
            raise PoleCrossed(f"movable singularity between x0={sol.x0} and requested x")
        raise NotCached(f"x outside cached interval [{sol.lo}, {sol.hi}]")
    w = np.empty(x.shape)
    dw = np.empty(x.shape)
    for a, b, dense in sol._segments:
        m = (x >= a) & (x <= b)
        if np.any(m):
            z = dense(x[m])
            w[m], dw[m] = z[0], z[1]
    return w, dw
