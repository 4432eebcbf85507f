"""Catalog of superintegrable potentials.

Every family has a stable string id, default parameters, a pole-free
sampling region and (where it exists) an analytic gradient.  Families with
an overall hbar^2 prefactor vanish in the classical limit; the limit is
taken by ``classical=True`` rather than a tiny hbar.

Lengths called ``a`` may be imaginary for the rational families; this is
encoded as ``{"a": "i", "a0": a0}`` and carried internally as the signed
square ``a2 = -a0**2``.  Only even powers of ``a`` appear, so everything
stays real.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .derivatives import derivatives_1d, partials_2d, separable_jet
from .errors import (BranchJump, DomainViolation, FitDegenerate, NoRealRoot, NotCached,
                     PoleCrossed, PoleProximity, ValidationError)
from .special_functions import (EllipticParams, PainleveSolution, ellipk, jacobi_sn_cn_dn, painleve_rhs,
                      weierstrass_p)

GUARD = 1e-3
COMMON_KEYS = ("hbar",)


@dataclass(frozen=True)
class Family:
    id: str
    tag: str
    defaults: dict
    classical: bool
    quantum: bool
    hbar2: bool = False
    separable: bool = False
    reducible: bool = False
    v: Optional[Callable] = None
    v1: Optional[Callable] = None
    v2: Optional[Callable] = None
    grad: Optional[Callable] = None
    dv1: Optional[Callable] = None
    dv2: Optional[Callable] = None
    guard: Optional[Callable] = None
    region: Optional[Callable] = None
    kinks: tuple = ()
    domain: Optional[Callable] = None
    note: str = ""


FAMILIES: dict = {}


def _register(fam):
    FAMILIES[fam.id] = fam
    return fam


@dataclass(frozen=True)
class PotentialSpec:
    """One potential family with resolved parameters."""

    family: str
    params: dict = field(hash=False)
    classical: bool = False
    domain: Optional[tuple] = None
    custom: Optional[Family] = field(default=None, compare=False, repr=False)

    @property
    def fam(self) -> Family:
        return self.custom if self.custom is not None else FAMILIES[self.family]

    @property
    def hbar(self):
        return 0.0 if self.classical else float(self.params.get("hbar", 1.0))

    @property
    def separable(self):
        return self.fam.separable

    def _p(self):
        p = dict(self.params)
        p["hbar"] = self.hbar
        return p

    # raw, unchecked, vectorised evaluation
    def raw(self, x, y):
        fam, p = self.fam, self._p()
        if fam.hbar2 and self.classical:
            return np.zeros(np.broadcast(x, y).shape)
        if fam.separable:
            return fam.v1(x, p) + fam.v2(y, p)
        return fam.v(x, y, p)

    def parts(self):
        """(V1, V2) callables of a separable family."""
        if not self.separable:
            return None
        fam, p = self.fam, self._p()
        if fam.hbar2 and self.classical:
            zero = lambda t: np.zeros(np.shape(t))
            return zero, zero
        return (lambda t: fam.v1(np.asarray(t, float), p)), (lambda t: fam.v2(np.asarray(t, float), p))

    def dparts(self):
        """(V1', V2') callables (analytic when available)."""
        V1, V2 = self.parts()
        fam, p = self.fam, self._p()
        h = 1e-3 * self.length_scale()
        if fam.hbar2 and self.classical:
            return V1, V2
        d1 = (lambda t: fam.dv1(np.asarray(t, float), p)) if fam.dv1 else \
            (lambda t: derivatives_1d(V1, t, h, order=1)[1].reshape(np.shape(t)))
        d2 = (lambda t: fam.dv2(np.asarray(t, float), p)) if fam.dv2 else \
            (lambda t: derivatives_1d(V2, t, h, order=1)[1].reshape(np.shape(t)))
        return d1, d2

    def raw_grad(self, x, y):
        fam, p = self.fam, self._p()
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if fam.hbar2 and self.classical:
            z = np.zeros(np.broadcast(x, y).shape)
            return z, z.copy()
        if fam.separable:
            d1, d2 = self.dparts()
            return d1(x) + 0 * y, d2(y) + 0 * x
        if fam.grad is not None:
            return fam.grad(x, y, p)
        return fd_gradient(self.raw, x, y, self.length_scale())

    def grad_fn(self):
        """raw_grad with the family lookups bound once (for inner loops)."""
        fam, p = self.fam, self._p()
        if fam.hbar2 and self.classical:
            return lambda x, y: (0 * x, 0 * y)
        if fam.separable:
            d1, d2 = self.dparts()
            return lambda x, y: (d1(x), d2(y))
        if fam.grad is not None:
            g = fam.grad
            return lambda x, y: g(x, y, p)
        return self.raw_grad

    def guard_distance(self, x, y):
        if self.fam.guard is None:
            return None
        return self.fam.guard(np.asarray(x, float), np.asarray(y, float), self._p())

    def region(self):
        return self.fam.region(self._p())

    def length_scale(self):
        xlo, xhi, ylo, yhi = self.region()
        return 0.5 * min(xhi - xlo, yhi - ylo)

    def jet(self, x, y, h=None):
        """Partials of V up to third order at the points (finite differences)."""
        h = 5e-3 * self.length_scale() if h is None else h
        if self.separable:
            V1, V2 = self.parts()
            d1, d2 = self.dparts()
            fam = self.fam
            return separable_jet(_lift(V1, d1, x, h, fam.dv1 is not None),
                                 _lift(V2, d2, y, h, fam.dv2 is not None))
        return partials_2d(self.raw, x, y, h)

    def declared_domain(self):
        if self.domain is not None:
            return self.domain
        if self.fam.domain is not None:
            return self.fam.domain(self._p())
        return (-np.inf, np.inf, -np.inf, np.inf)


def _lift(V, dV, t, h, analytic):
    """Derivative list up to third order, differencing V' when it is analytic."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if not analytic:
        return derivatives_1d(V, t, h)
    d = derivatives_1d(dV, t, h, order=2)
    return [V(t), d[0], d[1], d[2]]


def fd_gradient(fun, x, y, scale=1.0):
    """Fourth-order central differences with step eps^(1/3)*scale."""
    h = np.finfo(float).eps ** (1 / 3) * scale
    gx = (-fun(x + 2 * h, y) + 8 * fun(x + h, y) - 8 * fun(x - h, y) + fun(x - 2 * h, y)) / (12 * h)
    gy = (-fun(x, y + 2 * h) + 8 * fun(x, y + h) - 8 * fun(x, y - h) + fun(x, y - 2 * h)) / (12 * h)
    return gx, gy


# ------------------------------------------------------------ construction

def _resolve_a(params, fam_id):
    a = params.pop("a", None)
    a0 = params.pop("a0", None)
    if a is None:
        return
    if isinstance(a, str):
        if a.strip().lower() not in ("i", "1j", "+i"):
            raise ValidationError(f"{fam_id}: a must be a real number or 'i'")
        if a0 is None:
            raise ValidationError(f"{fam_id}: imaginary a needs a0")
        a0 = float(a0)
        if a0 == 0:
            raise ValidationError("a0 must be non-zero")
        params["a2"] = -a0 * a0
        params["alen"] = abs(a0)
    else:
        a = float(a)
        if a == 0:
            raise ValidationError("a must be non-zero")
        params["a2"] = a * a
        params["alen"] = abs(a)


def make_spec(family_id, params=None, classical=False, domain=None) -> PotentialSpec:
    """Build a PotentialSpec from a family id and a flat parameter dict."""
    if family_id not in FAMILIES:
        raise ValidationError(f"unknown potential {family_id!r}")
    fam = FAMILIES[family_id]
    given = dict(params or {})
    allowed = set(fam.defaults) | set(COMMON_KEYS)
    if "a" in fam.defaults:
        allowed |= {"a0"}
    unknown = set(given) - allowed
    if unknown:
        raise ValidationError(f"{family_id}: unknown parameters {sorted(unknown)}")
    merged = dict(fam.defaults)
    if "a" in given and not isinstance(given["a"], str):
        merged.pop("a0", None)
    merged.update(given)
    merged.setdefault("hbar", 1.0)
    if "a" in fam.defaults and fam.defaults.get("a") is not None and _is_length_a(fam):
        _resolve_a(merged, family_id)
    for k, v in merged.items():
        try:
            merged[k] = float(v)
        except (TypeError, ValueError):
            raise ValidationError(f"{family_id}: parameter {k} must be real, got {v!r}")
    if classical and not fam.classical:
        if not fam.hbar2:
            raise ValidationError(f"{family_id} has no classical limit")
    if "k" in merged and not 0.0 <= merged["k"] <= 1.0:
        raise ValidationError("elliptic modulus k must lie in [0, 1]")
    spec = PotentialSpec(family_id, merged, bool(classical), domain)
    return spec


def custom_spec(name, v=None, v1=None, v2=None, region=(-1.0, 1.0, -1.0, 1.0), classical=True,
                grad=None, guard=None):
    """Ad-hoc potential from callables of (x, y) or of x and y separately."""
    sep = v is None
    fam = Family(name, "Custom", {}, classical, not classical, separable=sep,
                 v=(lambda x, y, p: v(x, y)) if v is not None else None,
                 v1=(lambda t, p: v1(t)) if sep else None,
                 v2=(lambda t, p: v2(t)) if sep else None,
                 grad=(lambda x, y, p: grad(x, y)) if grad is not None else None,
                 guard=(lambda x, y, p: guard(x, y)) if guard is not None else None,
                 region=lambda p: tuple(region))
    return PotentialSpec(name, {"hbar": 0.0 if classical else 1.0}, False, None, fam)


def _is_length_a(fam):
    return fam.id.startswith("rational")


def _as_points(point):
    pt = np.asarray(point, dtype=float)
    if pt.shape[-1] != 2:
        raise ValidationError("points must have shape (2,) or (n, 2)")
    return pt[..., 0], pt[..., 1]


def _check(spec, x, y):
    xlo, xhi, ylo, yhi = spec.declared_domain()
    if np.any((x < xlo) | (x > xhi) | (y < ylo) | (y > yhi)):
        raise DomainViolation(f"point outside the domain of {spec.family}")
    d = spec.guard_distance(x, y)
    if d is not None and np.any(d < GUARD):
        raise PoleProximity(f"point inside a pole guard band of {spec.family}")


def eval_potential(spec: PotentialSpec, point):
    x, y = _as_points(point)
    _check(spec, x, y)
    try:
        v = spec.raw(x, y)
    except (NotCached, PoleCrossed) as e:
        raise DomainViolation(str(e))
    return float(v) if np.ndim(v) == 0 else v


def grad_potential(spec: PotentialSpec, point):
    x, y = _as_points(point)
    _check(spec, x, y)
    for axis, c in spec.fam.kinks:
        t = x if axis == "x" else y
        if np.any(np.abs(t - c) < GUARD * spec.length_scale()):
            raise PoleProximity(f"gradient undefined at the kink {axis}={c}")
    try:
        gx, gy = spec.raw_grad(x, y)
    except (NotCached, PoleCrossed) as e:
        raise DomainViolation(str(e))
    return np.stack([gx, gy], axis=-1)


def sample_region(spec, n, rng=None, region=None, margin=0.0):
    """Uniform random points inside the sampling region, avoiding guard bands."""
    rng = np.random.default_rng(0) if rng is None else rng
    xlo, xhi, ylo, yhi = spec.region() if region is None else region
    out = []
    while sum(len(o) for o in out) < n:
        x = rng.uniform(xlo + margin, xhi - margin, 4 * n)
        y = rng.uniform(ylo + margin, yhi - margin, 4 * n)
        d = spec.guard_distance(x, y)
        keep = np.ones(x.shape, bool) if d is None else d > 10 * GUARD
        out.append(np.column_stack([x[keep], y[keep]]))
    return np.concatenate(out)[:n]


# ------------------------------------------------------- algebraic branches

def quartic_coeffs(x, omega, b=None, c=None, d=None):
    """Coefficients (highest first) of the quartic in V at position x."""
    w2 = omega * omega
    x2 = np.asarray(x, dtype=float) ** 2
    return np.array([
        -9.0 + 0 * x2,
        14.0 * w2 * x2,
        6.0 * d - 7.5 * w2 ** 2 * x2 ** 2,
        1.5 * w2 ** 3 * x2 ** 3 - 2.0 * d * w2 * x2,
        c * x2 - d * d - 0.5 * d * w2 ** 2 * x2 ** 2 - w2 ** 4 * x2 ** 4 / 16.0,
    ])


def quartic_residual(V, x, omega, c, d):
    x = np.asarray(x, dtype=float)
    V = np.asarray(V, dtype=float)
    cf = quartic_coeffs(x, omega, c=c, d=d)
    return (((cf[0] * V + cf[1]) * V + cf[2]) * V + cf[3]) * V + cf[4]


def double_root_constants(omega, b):
    """(c, d) at which the quartic acquires the double root V3 = V4."""
    return 8.0 * omega ** 8 * b ** 3 / 3 ** 6, omega ** 4 * b ** 2 / 3 ** 3


def quartic_closed_forms(x, omega, b):
    """Closed-form roots (V1, V2, V3) at the double-root parameters."""
    x = np.asarray(x, dtype=float)
    s = np.sqrt(b + x * x)
    w2 = omega * omega
    v1 = w2 / 18.0 * (2 * b + 5 * x * x + 4 * x * s)
    v2 = w2 / 18.0 * (2 * b + 5 * x * x - 4 * x * s)
    v3 = w2 * x * x / 2.0 - w2 * b / 9.0
    return v1, v2, v3


def cubic_coeffs(x, b, d):
    """Coefficients of f (f - b x)^2 - d, the cubic behind the |y| family."""
    x = np.asarray(x, dtype=float)
    return np.array([1.0 + 0 * x, -2.0 * b * x, b * b * x * x, -d + 0 * x])


def cubic_coeffs_printed(x, b, d):
    """The cubic exactly as transcribed: f^3 - 2 b x f^2 + b^2 x^4 f - d."""
    x = np.asarray(x, dtype=float)
    return np.array([1.0 + 0 * x, -2.0 * b * x, b * b * x ** 4, -d + 0 * x])


def _real_roots(coeffs, tol=1e-9):
    r = np.roots(coeffs)
    scale = max(1.0, np.max(np.abs(r))) if len(r) else 1.0
    return np.sort(r[np.abs(r.imag) <= tol * scale].real)


def _polish(coeffs, r, iters=3):
    dc = np.polyder(coeffs)
    for _ in range(iters):
        d = np.polyval(dc, r)
        if d == 0:
            break
        r = r - np.polyval(coeffs, r) / d
    return r


def track_root(coeff_fn, x, x_anchor=0.0, root0=None, step=0.01, sep_tol=1e-6):
    """Follow one real root of a polynomial family continuously in x.

    ``coeff_fn(x)`` returns coefficients (highest first).  The branch is
    anchored at ``x_anchor`` on the real root closest to ``root0`` (largest
    root when ``root0`` is None).
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(xs.shape)
    r0 = _real_roots(coeff_fn(x_anchor))
    if len(r0) == 0:
        raise NoRealRoot(f"no real root at the anchor x={x_anchor}")
    start = r0[-1] if root0 is None else r0[np.argmin(np.abs(r0 - root0))]
    for direction in (1.0, -1.0):
        mask = (xs - x_anchor) * direction >= 0
        if not np.any(mask):
            continue
        idx = np.where(mask)[0]
        order = idx[np.argsort(np.abs(xs[idx] - x_anchor))]
        cur_x, cur = x_anchor, start
        for i in order:
            target = xs[i]
            n = max(1, int(np.ceil(abs(target - cur_x) / step)))
            for t in np.linspace(cur_x, target, n + 1)[1:]:
                cf = coeff_fn(t)
                if len(_real_roots(cf)) == 0:
                    raise NoRealRoot(f"no real root at x={t:g}")
                # follow the nearest root in the complex plane: if it has left the
                # real axis, or another root sits on top of it, the branch is lost
                roots = np.roots(cf)
                dist = np.abs(roots - cur)
                j = np.argmin(dist)
                scale = 1.0 + abs(cur)
                if len(roots) > 1 and np.min(np.abs(np.delete(roots, j) - roots[j])) < sep_tol * scale:
                    raise BranchJump(f"root collision near x={t:g}")
                if abs(roots[j].imag) > 1e-9 * scale or dist[j] > 0.25 * scale + 10 * step * scale:
                    raise BranchJump(f"tracked root vanished near x={t:g}")
                roots = roots.real
                cur = _polish(coeff_fn(t), roots[j])
            cur_x = target
            out[i] = cur
    return out if np.ndim(x) else float(out[0])


def quartic_branch_V(x, params, x_anchor=0.0, anchor=None):
    """One real root of the quartic in V, continued from ``anchor`` at ``x_anchor``."""
    omega = float(params.get("omega", 1.0))
    if "c" in params and "d" in params:
        c, d = float(params["c"]), float(params["d"])
    else:
        c, d = double_root_constants(omega, float(params["b"]))
    return track_root(lambda t: quartic_coeffs(t, omega, c=c, d=d), x, x_anchor, anchor)


def cubic_branch_f(x, params, x_anchor=0.0, anchor=None, printed=False):
    """Continuous real branch of the cubic for the a|y| + f(x) family."""
    b, d = float(params["b"]), float(params["d"])
    fn = cubic_coeffs_printed if printed else cubic_coeffs
    return track_root(lambda t: fn(t, b, d), x, x_anchor, anchor)


def _largest_cubic_root(b, d, x):
    """Vectorised largest real root of f (f - b x)^2 = d for d > 0."""
    x = np.asarray(x, dtype=float)
    s = b * x
    # f (f - s)^2 is increasing for f > max(s, 0) and the root lies below that plus d^(1/3)
    lo = np.maximum(s, 0.0)
    f = lo + np.cbrt(d)
    for _ in range(60):
        g = f * (f - s) ** 2 - d
        dg = (f - s) * (3 * f - s)
        step = g / np.where(dg == 0, 1.0, dg)
        f_new = f - step
        f = np.where(f_new > lo, f_new, 0.5 * (f + lo))
        if np.all(np.abs(step) <= 1e-15 * (1 + np.abs(f))):
            break
    return f


def _cubic_f(x, p):
    b, d = p["b"], p["d"]
    if d <= 0:
        raise DomainViolation("the |y| + f(x) family needs d > 0")
    return _largest_cubic_root(b, d, x)


def _cubic_df(x, p):
    b = p["b"]
    f = _cubic_f(x, p)
    # implicit differentiation of f (f - b x)^2 = d
    return 2 * b * f / (3 * f - b * x)


# ------------------------------------------------------- elliptic ODE check

def check_elliptic_ode(spec: PotentialSpec, n=200, region=None, rng=None):
    """Fit hbar^2 V'^2 = 4 V^3 + alpha V^2 + beta V + gamma; return fit and max residual."""
    if not spec.separable:
        raise ValidationError("elliptic ODE check applies to one-dimensional V(x) families")
    V1, _ = spec.parts()
    dV1, _ = spec.dparts()
    xlo, xhi = (spec.region()[:2] if region is None else region)
    x = np.linspace(xlo, xhi, n)
    d = spec.guard_distance(x, np.zeros_like(x) + 1.0)
    if d is not None:
        x = x[d > 10 * GUARD]
    V = V1(x)
    dV = dV1(x)
    lhs = spec.hbar ** 2 * dV ** 2 - 4 * V ** 3
    M = np.column_stack([V ** 2, V, np.ones_like(V)])
    coef, _, rank, _ = np.linalg.lstsq(M, lhs, rcond=None)
    res = np.max(np.abs(M @ coef - lhs)) if len(x) else 0.0
    if rank < 3 and res > 1e-12 * (1 + np.max(np.abs(lhs))):
        raise FitDegenerate(f"design matrix rank {rank} < 3")
    return {"alpha": float(coef[0]), "beta": float(coef[1]), "gamma": float(coef[2]),
            "max_residual": float(res), "n": int(len(x))}


def elliptic_sigma(spec: PotentialSpec, **kw):
    """Sum of the cubic's roots A1 + A2 + A3 = -alpha / 4."""
    return -check_elliptic_ode(spec, **kw)["alpha"] / 4.0


# -------------------------------------------------------------- Painleve

@lru_cache(maxsize=64)
def _painleve(kind, pa, pb, x0, w0, dw0, zmin, zmax):
    return PainleveSolution.solve(kind, x0=x0, w0=w0, dw0=dw0, interval=(zmin, zmax), a=pa, b=pb)


def painleve_of(p, kind):
    w0 = p["w0"]
    return _painleve(kind, p.get("pa", 0.0), p.get("pb", 0.0), p["x0"], w0, p["dw0"],
                     p["zmin"], p["zmax"])


def _pw(p, kind, z, order=1):
    """(w, w', w'') of the cached solution at z."""
    sol = painleve_of(p, kind)
    w, dw = sol(z)
    if order < 2:
        return w, dw
    return w, dw, painleve_rhs(kind, sol.a, sol.b)(z, w, dw)


def _pole_dist(p, kind, z):
    sol = painleve_of(p, kind)
    d = np.full(np.shape(z), np.inf)
    for zp in sol.poles:
        d = np.minimum(d, np.abs(z - zp))
    return d


def _z_interval(p, kind, s):
    sol = painleve_of(p, kind)
    lo, hi = sorted((sol.lo / s, sol.hi / s))
    return lo, hi


def _pain_region(p, kind, s, other=(-1.0, 1.0)):
    lo, hi = _z_interval(p, kind, s)
    span = hi - lo
    return (lo + 0.1 * span, hi - 0.1 * span) + tuple(other)


# --------------------------------------------------------------- families

def _r(x, y):
    return np.sqrt(x * x + y * y)


def _q(t, a2):
    """1/(t-a)^2 + 1/(t+a)^2 written through the signed square a2."""
    return 2.0 * (t * t + a2) / (t * t - a2) ** 2


def _dq(t, a2):
    return -4.0 * t * (t * t + 3 * a2) / (t * t - a2) ** 3


def _a_guard(t, p):
    if p["a2"] <= 0:
        return np.full(np.shape(t), np.inf)
    a = np.sqrt(p["a2"])
    return np.minimum(np.abs(t - a), np.abs(t + a)) / a


def _a_box(p, f=1.5):
    a = p["alen"]
    if p["a2"] > 0:
        return (-0.8 * a, 0.8 * a)
    return (-f * a, f * a)


def _hw(p):
    return (p["hbar"] * p["omega"]) ** 2


def _K(p):
    return ellipk(p["k"])


def _sn(x, p):
    return jacobi_sn_cn_dn(p["omega"] * x, p["k"])


_register(Family(
    "kepler", "Kepler", {"alpha": -1.0}, True, True, reducible=True,
    v=lambda x, y, p: p["alpha"] / _r(x, y),
    grad=lambda x, y, p: (-p["alpha"] * x / _r(x, y) ** 3, -p["alpha"] * y / _r(x, y) ** 3),
    guard=lambda x, y, p: _r(x, y),
    region=lambda p: (0.5, 2.0, -1.0, 1.0)))

_register(Family(
    "oscillator", "Oscillator", {"alpha": 0.5}, True, True, separable=True, reducible=True,
    v1=lambda t, p: p["alpha"] * t * t, v2=lambda t, p: p["alpha"] * t * t,
    dv1=lambda t, p: 2 * p["alpha"] * t, dv2=lambda t, p: 2 * p["alpha"] * t,
    region=lambda p: (-1.0, 1.0, -1.0, 1.0)))

_register(Family(
    "linear-x", "LinearX", {"a": 1.0}, True, True, separable=True, reducible=True,
    v1=lambda t, p: p["a"] * t, v2=lambda t, p: 0.0 * t,
    dv1=lambda t, p: p["a"] + 0.0 * t, dv2=lambda t, p: 0.0 * t,
    region=lambda p: (-1.0, 1.0, -1.0, 1.0)))

_register(Family(
    "inverse-square-x", "InverseSquareX", {"a": 1.0}, True, True, separable=True, reducible=True,
    v1=lambda t, p: p["a"] / t ** 2, v2=lambda t, p: 0.0 * t,
    dv1=lambda t, p: -2 * p["a"] / t ** 3, dv2=lambda t, p: 0.0 * t,
    guard=lambda x, y, p: np.abs(x) + 0 * y,
    region=lambda p: (0.5, 2.0, -1.0, 1.0)))

_register(Family(
    "v1", "V_I", {"alpha": 0.5, "beta": 0.1, "gamma": 0.1}, True, True, separable=True,
    reducible=True,
    v1=lambda t, p: p["alpha"] * t * t + p["beta"] / t ** 2,
    v2=lambda t, p: p["alpha"] * t * t + p["gamma"] / t ** 2,
    dv1=lambda t, p: 2 * p["alpha"] * t - 2 * p["beta"] / t ** 3,
    dv2=lambda t, p: 2 * p["alpha"] * t - 2 * p["gamma"] / t ** 3,
    guard=lambda x, y, p: np.minimum(np.abs(x), np.abs(y)),
    region=lambda p: (0.5, 2.0, 0.5, 2.0)))

_register(Family(
    "v2", "V_II", {"alpha": 0.5, "beta": 0.1, "gamma": 0.2}, True, True, separable=True,
    reducible=True,
    v1=lambda t, p: p["alpha"] * t * t + p["beta"] / t ** 2,
    v2=lambda t, p: 4 * p["alpha"] * t * t + p["gamma"] * t,
    dv1=lambda t, p: 2 * p["alpha"] * t - 2 * p["beta"] / t ** 3,
    dv2=lambda t, p: 8 * p["alpha"] * t + p["gamma"],
    guard=lambda x, y, p: np.abs(x) + 0 * y,
    region=lambda p: (0.5, 2.0, -1.0, 1.0)))


def _v3(x, y, p):
    r = _r(x, y)
    # 1/r^2 * 1/(1 +- cos phi) = 1/(r (r +- x))
    return p["alpha"] / r + p["gamma"] / (r * (r + x)) + p["beta"] / (r * (r - x))


def _v4(x, y, p):
    r = _r(x, y)
    c = np.sqrt(np.maximum(r + x, 0) / (2 * r))
    s = np.sign(y) * np.sqrt(np.maximum(r - x, 0) / (2 * r))
    return p["alpha"] / r + (p["beta"] * c + p["gamma"] * s) / r


_register(Family(
    "v3", "V_III", {"alpha": -1.0, "beta": 0.1, "gamma": 0.1}, True, True, reducible=True,
    v=_v3,
    guard=lambda x, y, p: np.minimum(_r(x, y), np.sqrt(np.minimum(_r(x, y) + x, _r(x, y) - x))),
    region=lambda p: (-1.0, 1.0, 0.5, 2.0),
    note="the second alpha of the angular part is the independent constant gamma"))

_register(Family(
    "v4", "V_IV", {"alpha": -1.0, "beta": 0.2, "gamma": 0.1}, True, True, reducible=True,
    v=_v4,
    guard=lambda x, y, p: np.where(x < 0, np.minimum(np.abs(y), _r(x, y)), _r(x, y)),
    region=lambda p: (-1.0, 1.0, 0.5, 2.0)))

# elliptic and degenerate one-dimensional families (overall hbar^2)
_Q = {"hbar": 1.0, "omega": 1.0}
_QK = {"hbar": 1.0, "omega": 1.0, "k": 0.5}
_zero = lambda t, p: 0.0 * t


def _sn_v(t, p):
    sn, cn, dn = _sn(t, p)
    return _hw(p) * p["k"] ** 2 * sn ** 2


def _sn_dv(t, p):
    sn, cn, dn = _sn(t, p)
    return 2 * _hw(p) * p["k"] ** 2 * p["omega"] * sn * cn * dn


def _cn_v(t, p):
    sn, cn, dn = _sn(t, p)
    return _hw(p) / (2 * (cn + 1))


def _cn_dv(t, p):
    sn, cn, dn = _sn(t, p)
    return _hw(p) * p["omega"] * sn * dn / (2 * (1 + cn) ** 2)


def _sninv_v(t, p):
    sn, cn, dn = _sn(t, p)
    return _hw(p) / sn ** 2


def _sninv_dv(t, p):
    sn, cn, dn = _sn(t, p)
    return -2 * _hw(p) * p["omega"] * cn * dn / sn ** 3


def _mod_dist(u, period, offset=0.0):
    v = u - offset
    return np.abs(v - period * np.round(v / period))


_register(Family(
    "elliptic-sn", "EllipticSn", dict(_QK), False, True, hbar2=True, separable=True,
    v1=_sn_v, v2=_zero, dv1=_sn_dv, dv2=_zero,
    region=lambda p: (-1.0 / p["omega"], 1.0 / p["omega"], -1.0, 1.0)))

_register(Family(
    "elliptic-cn-well", "EllipticCnWell", dict(_QK), False, True, hbar2=True, separable=True,
    v1=_cn_v, v2=_zero, dv1=_cn_dv, dv2=_zero,
    guard=lambda x, y, p: _mod_dist(p["omega"] * x, 4 * _K(p), 2 * _K(p)) + 0 * y,
    region=lambda p: (-1.0 / p["omega"], 1.0 / p["omega"], -1.0, 1.0)))

_register(Family(
    "elliptic-sn-inverse", "EllipticSnInverse", dict(_QK), False, True, hbar2=True,
    separable=True, v1=_sninv_v, v2=_zero, dv1=_sninv_dv, dv2=_zero,
    guard=lambda x, y, p: _mod_dist(p["omega"] * x, 2 * _K(p)) + 0 * y,
    region=lambda p: (0.3 / p["omega"], (2 * _K(p) - 0.3) / p["omega"], -1.0, 1.0)))


def _sech2(u):
    return 1.0 / np.cosh(u) ** 2


_register(Family(
    "degenerate-cosh", "DegenerateCosh", dict(_Q), False, True, hbar2=True, separable=True,
    v1=lambda t, p: -_hw(p) * _sech2(p["omega"] * t), v2=_zero,
    dv1=lambda t, p: 2 * _hw(p) * p["omega"] * _sech2(p["omega"] * t) * np.tanh(p["omega"] * t),
    dv2=_zero,
    region=lambda p: (-1.5 / p["omega"], 1.5 / p["omega"], -1.0, 1.0),
    note="attractive sign: only -(hbar w)^2/cosh^2 satisfies the cubic ODE with leading 4V^3"))

_register(Family(
    "degenerate-sinh", "DegenerateSinh", dict(_Q), False, True, hbar2=True, separable=True,
    v1=lambda t, p: _hw(p) / np.sinh(p["omega"] * t) ** 2, v2=_zero,
    dv1=lambda t, p: -2 * _hw(p) * p["omega"] * np.cosh(p["omega"] * t) / np.sinh(p["omega"] * t) ** 3,
    dv2=_zero,
    guard=lambda x, y, p: np.abs(p["omega"] * x) + 0 * y,
    region=lambda p: (0.3 / p["omega"], 2.0 / p["omega"], -1.0, 1.0)))

_register(Family(
    "degenerate-sin", "DegenerateSin", dict(_Q), False, True, hbar2=True, separable=True,
    v1=lambda t, p: _hw(p) / np.sin(p["omega"] * t) ** 2, v2=_zero,
    dv1=lambda t, p: -2 * _hw(p) * p["omega"] * np.cos(p["omega"] * t) / np.sin(p["omega"] * t) ** 3,
    dv2=_zero,
    guard=lambda x, y, p: _mod_dist(p["omega"] * x, np.pi) + 0 * y,
    region=lambda p: (0.3 / p["omega"], (np.pi - 0.3) / p["omega"], -1.0, 1.0)))

_register(Family(
    "aniso-9-1", "Aniso9to1", {"omega": 1.0}, True, True, separable=True,
    v1=lambda t, p: 4.5 * p["omega"] ** 2 * t * t, v2=lambda t, p: 0.5 * p["omega"] ** 2 * t * t,
    dv1=lambda t, p: 9 * p["omega"] ** 2 * t, dv2=lambda t, p: p["omega"] ** 2 * t,
    region=lambda p: (-1.0, 1.0, -1.0, 1.0)))


def _sqrt_abs(t):
    return np.sqrt(np.abs(t))


def _dsqrt_abs(t):
    return np.sign(t) / (2 * np.sqrt(np.abs(t)))


_register(Family(
    "sqrt-sqrt", "SqrtSqrt", {"beta1": 1.0, "beta2": 1.0}, True, False, separable=True,
    v1=lambda t, p: p["beta1"] ** 2 * _sqrt_abs(t), v2=lambda t, p: p["beta2"] ** 2 * _sqrt_abs(t),
    dv1=lambda t, p: p["beta1"] ** 2 * _dsqrt_abs(t), dv2=lambda t, p: p["beta2"] ** 2 * _dsqrt_abs(t),
    region=lambda p: (0.5, 2.0, 0.5, 2.0), kinks=(("x", 0.0), ("y", 0.0))))

_register(Family(
    "abs-sqrt", "AbsSqrt", {"a": 1.0, "b": 1.0}, True, False, separable=True,
    v1=lambda t, p: p["b"] ** 2 * _sqrt_abs(t), v2=lambda t, p: p["a"] ** 2 * np.abs(t),
    dv1=lambda t, p: p["b"] ** 2 * _dsqrt_abs(t), dv2=lambda t, p: p["a"] ** 2 * np.sign(t),
    region=lambda p: (0.5, 2.0, 0.5, 2.0), kinks=(("x", 0.0), ("y", 0.0))))


def _quartic_v(t, p):
    v1, v2, _ = quartic_closed_forms(t, p["omega"], p["b"])
    return v1 if p["branch"] > 0 else v2


def _quartic_dv(t, p):
    s = np.sqrt(p["b"] + t * t)
    sign = 1.0 if p["branch"] > 0 else -1.0
    return p["omega"] ** 2 / 18 * (10 * t + sign * 4 * (s + t * t / s))


_register(Family(
    "osc-quartic-root", "OscPlusQuarticRoot", {"omega": 1.0, "b": 1.0, "branch": 1.0}, True,
    False, separable=True,
    v1=_quartic_v, v2=lambda t, p: 0.5 * p["omega"] ** 2 * t * t,
    dv1=_quartic_dv, dv2=lambda t, p: p["omega"] ** 2 * t,
    region=lambda p: (-1.0, 1.0, -1.0, 1.0),
    domain=lambda p: (-np.inf, np.inf, -np.inf, np.inf) if p["b"] >= 0 else (np.sqrt(-p["b"]), np.inf, -np.inf, np.inf),
    note="closed-form branch V1 (branch=+1) or V2 (branch=-1) at the double-root constants"))

_register(Family(
    "abs-cubic-root", "AbsPlusCubicRoot", {"a": 1.0, "b": 1.0, "d": 1.0}, True, False,
    separable=True,
    v1=_cubic_f, v2=lambda t, p: p["a"] * np.abs(t),
    dv1=_cubic_df, dv2=lambda t, p: p["a"] * np.sign(t),
    region=lambda p: (-1.0, 1.0, 0.5, 2.0), kinks=(("y", 0.0),),
    note="f is the largest real root of f (f - b x)^2 = d"))

# rational families (overall hbar^2 unless an oscillator part is present)
_RA = {"hbar": 1.0, "a": "i", "a0": 1.0}


def _ra4(p):
    return 8.0 * p["a2"] ** 2


_register(Family(
    "rational-1", "Rational1", dict(_RA), False, True, hbar2=True, separable=True,
    v1=lambda t, p: p["hbar"] ** 2 * (t * t / _ra4(p) + _q(t, p["a2"])),
    v2=lambda t, p: p["hbar"] ** 2 * t * t / _ra4(p),
    dv1=lambda t, p: p["hbar"] ** 2 * (2 * t / _ra4(p) + _dq(t, p["a2"])),
    dv2=lambda t, p: p["hbar"] ** 2 * 2 * t / _ra4(p),
    guard=lambda x, y, p: _a_guard(x, p) + 0 * y,
    region=lambda p: _a_box(p) + _a_box(p)))

_register(Family(
    "rational-2", "Rational2", dict(_RA), False, True, hbar2=True, separable=True,
    v1=lambda t, p: p["hbar"] ** 2 * (t * t / _ra4(p) + _q(t, p["a2"])),
    v2=lambda t, p: p["hbar"] ** 2 * (t * t / _ra4(p) + 1 / t ** 2),
    dv1=lambda t, p: p["hbar"] ** 2 * (2 * t / _ra4(p) + _dq(t, p["a2"])),
    dv2=lambda t, p: p["hbar"] ** 2 * (2 * t / _ra4(p) - 2 / t ** 3),
    guard=lambda x, y, p: np.minimum(_a_guard(x, p), np.abs(y) / p["alen"]),
    region=lambda p: _a_box(p) + (0.3 * p["alen"], 0.8 * p["alen"] if p["a2"] > 0 else 1.5 * p["alen"])))

_register(Family(
    "rational-3", "Rational3", dict(_RA), False, True, hbar2=True, separable=True,
    v1=lambda t, p: p["hbar"] ** 2 * (t * t / _ra4(p) + _q(t, p["a2"])),
    v2=lambda t, p: p["hbar"] ** 2 * (t * t / _ra4(p) + _q(t, p["a2"])),
    dv1=lambda t, p: p["hbar"] ** 2 * (2 * t / _ra4(p) + _dq(t, p["a2"])),
    dv2=lambda t, p: p["hbar"] ** 2 * (2 * t / _ra4(p) + _dq(t, p["a2"])),
    guard=lambda x, y, p: np.minimum(_a_guard(x, p), _a_guard(y, p)),
    region=lambda p: _a_box(p) + _a_box(p)))

_register(Family(
    "aniso-9-1-inv-y", "Aniso9to1InvY", {"hbar": 1.0, "omega": 1.0}, False, True, separable=True,
    v1=lambda t, p: 4.5 * p["omega"] ** 2 * t * t,
    v2=lambda t, p: 0.5 * p["omega"] ** 2 * t * t + p["hbar"] ** 2 / t ** 2,
    dv1=lambda t, p: 9 * p["omega"] ** 2 * t,
    dv2=lambda t, p: p["omega"] ** 2 * t - 2 * p["hbar"] ** 2 / t ** 3,
    guard=lambda x, y, p: np.abs(y) + 0 * x,
    region=lambda p: (-1.0, 1.0, 0.5, 2.0)))

_register(Family(
    "rational-6", "Rational6", dict(_RA), False, True, hbar2=True, separable=True,
    v1=lambda t, p: p["hbar"] ** 2 * 9 * t * t / _ra4(p),
    v2=lambda t, p: p["hbar"] ** 2 * (t * t / _ra4(p) + _q(t, p["a2"])),
    dv1=lambda t, p: p["hbar"] ** 2 * 18 * t / _ra4(p),
    dv2=lambda t, p: p["hbar"] ** 2 * (2 * t / _ra4(p) + _dq(t, p["a2"])),
    guard=lambda x, y, p: _a_guard(y, p) + 0 * x,
    region=lambda p: _a_box(p) + _a_box(p)))


def _wp(t, p):
    return weierstrass_p(t, p["g2"], p["g3"], guard=GUARD)


def _w_half(p):
    return EllipticParams(p["g2"], p["g3"]).real_half_period()


_register(Family(
    "weierstrass-sum", "WeierstrassSum", {"hbar": 1.0, "g2": 4.0, "g3": 0.0}, False, True,
    hbar2=True, separable=True,
    v1=lambda t, p: p["hbar"] ** 2 * _wp(t, p)[0], v2=lambda t, p: p["hbar"] ** 2 * _wp(t, p)[0],
    dv1=lambda t, p: p["hbar"] ** 2 * _wp(t, p)[1], dv2=lambda t, p: p["hbar"] ** 2 * _wp(t, p)[1],
    guard=lambda x, y, p: np.minimum(_mod_dist(x, 2 * _w_half(p)), _mod_dist(y, 2 * _w_half(p))) / _w_half(p),
    region=lambda p: (0.3 * _w_half(p), 1.7 * _w_half(p), 0.3 * _w_half(p), 1.7 * _w_half(p))))

# Painleve families; the Ince constants are pa, pb and the initial data
# (x0, w0, dw0) live in the transcendent's own variable z
_PD = {"x0": 0.0, "w0": 0.0, "dw0": 0.0, "zmin": -4.0, "zmax": 4.0}


def _p1_v1(t, p):
    w1 = p["omega1"]
    return p["hbar"] ** 2 * w1 ** 2 * _pw(p, "P_I", w1 * t)[0]


def _p1_dv1(t, p):
    w1 = p["omega1"]
    return p["hbar"] ** 2 * w1 ** 3 * _pw(p, "P_I", w1 * t)[1]


def _p1_guard(x, y, p, use_y):
    d = _pole_dist(p, "P_I", p["omega1"] * x)
    if use_y:
        d = np.minimum(d, _pole_dist(p, "P_I", p["omega2"] * y))
    return d


def _p1_domain(p, use_y):
    xl, xh = _z_interval(p, "P_I", p["omega1"])
    if not use_y:
        return (xl, xh, -np.inf, np.inf)
    return (xl, xh) + _z_interval(p, "P_I", p["omega2"])


_register(Family(
    "painleve-1-1", "PainleveI_I", dict(hbar=1.0, omega1=1.0, omega2=1.0, **_PD), False, True,
    hbar2=True, separable=True,
    v1=_p1_v1,
    v2=lambda t, p: p["hbar"] ** 2 * p["omega2"] ** 2 * _pw(p, "P_I", p["omega2"] * t)[0],
    dv1=_p1_dv1,
    dv2=lambda t, p: p["hbar"] ** 2 * p["omega2"] ** 3 * _pw(p, "P_I", p["omega2"] * t)[1],
    guard=lambda x, y, p: _p1_guard(x, y, p, True),
    domain=lambda p: _p1_domain(p, True),
    region=lambda p: _pain_region(p, "P_I", p["omega1"], _pain_region(p, "P_I", p["omega2"])[:2])))

_register(Family(
    "painleve-1-linear", "PainleveI_linear", dict(hbar=1.0, omega1=1.0, a=1.0, **_PD), False, True,
    separable=True,
    v1=_p1_v1, v2=lambda t, p: p["a"] * t, dv1=_p1_dv1, dv2=lambda t, p: p["a"] + 0 * t,
    guard=lambda x, y, p: _p1_guard(x, y, p, False),
    domain=lambda p: _p1_domain(p, False),
    region=lambda p: _pain_region(p, "P_I", p["omega1"])))


def _p2a_s(p):
    return np.cbrt(2 * p["b"] / p["hbar"] ** 2)


def _p2a_v1(t, p):
    s = _p2a_s(p)
    w = _pw(p, "P_II", s * t)[0]
    return p["b"] * t + np.cbrt(2 * p["hbar"] * p["b"]) ** 2 * w * w


def _p2a_dv1(t, p):
    s = _p2a_s(p)
    w, dw = _pw(p, "P_II", s * t)
    return p["b"] + np.cbrt(2 * p["hbar"] * p["b"]) ** 2 * 2 * w * dw * s


def _p2b_s(p):
    return np.cbrt(-4 * p["b"] / p["hbar"] ** 2)


def _p2b_v1(t, p):
    s = _p2b_s(p)
    w, dw = _pw(p, "P_II", s * t)
    return np.cbrt(2 * p["hbar"] ** 2 * p["b"] ** 2) * (dw + w * w)


def _p2b_dv1(t, p):
    s = _p2b_s(p)
    w, dw, ddw = _pw(p, "P_II", s * t, order=2)
    return np.cbrt(2 * p["hbar"] ** 2 * p["b"] ** 2) * (ddw + 2 * w * dw) * s


def _pain_guard(kind, sfun):
    return lambda x, y, p: _pole_dist(p, kind, sfun(p) * x) + 0 * y


def _pain_domain(kind, sfun):
    return lambda p: _z_interval(p, kind, sfun(p)) + (-np.inf, np.inf)


_register(Family(
    "painleve-2-a", "PainleveII_a", dict(hbar=1.0, a=1.0, b=1.0, pa=0.0, **_PD), False, True,
    separable=True,
    v1=_p2a_v1, v2=lambda t, p: p["a"] * t, dv1=_p2a_dv1, dv2=lambda t, p: p["a"] + 0 * t,
    guard=_pain_guard("P_II", _p2a_s), domain=_pain_domain("P_II", _p2a_s),
    region=lambda p: _pain_region(p, "P_II", _p2a_s(p))))

_register(Family(
    "painleve-2-b", "PainleveII_b", dict(hbar=1.0, a=1.0, b=1.0, pa=0.0, **_PD), False, True,
    separable=True,
    v1=_p2b_v1, v2=lambda t, p: p["a"] * t, dv1=_p2b_dv1, dv2=lambda t, p: p["a"] + 0 * t,
    guard=_pain_guard("P_II", _p2b_s), domain=_pain_domain("P_II", _p2b_s),
    region=lambda p: _pain_region(p, "P_II", _p2b_s(p))))


def _p4_s(p):
    return -8 * p["a"] / p["hbar"] ** 2


def _p4_v1(t, p):
    s, r = _p4_s(p), np.sqrt(8 * p["a"])
    w, dw = _pw(p, "P_IV", s * t)
    return p["a"] * t * t + 0.5 * p["hbar"] ** 2 * (dw - 0.5 * r * w * w - 0.5 * r * t * w)


def _p4_dv1(t, p):
    s, r = _p4_s(p), np.sqrt(8 * p["a"])
    w, dw, ddw = _pw(p, "P_IV", s * t, order=2)
    return 2 * p["a"] * t + 0.5 * p["hbar"] ** 2 * (
        s * ddw - r * w * dw * s - 0.5 * r * (w + t * dw * s))


_register(Family(
    "painleve-4", "PainleveIV",
    dict(hbar=1.0, a=0.25, pa=0.0, pb=-2.0, x0=0.0, w0=1.0, dw0=0.0, zmin=-4.0, zmax=4.0), False,
    True, separable=True,
    v1=_p4_v1, v2=lambda t, p: p["a"] * t * t, dv1=_p4_dv1, dv2=lambda t, p: 2 * p["a"] * t,
    guard=_pain_guard("P_IV", _p4_s), domain=_pain_domain("P_IV", _p4_s),
    region=lambda p: _pain_region(p, "P_IV", _p4_s(p)),
    note="transcribed argument scaling; see the certification report"))


def catalog():
    """Rows describing every family, for listings."""
    rows = []
    for fam in FAMILIES.values():
        params = [k for k in fam.defaults if k not in ("alen", "a2")]
        if "a" in fam.defaults and _is_length_a(fam):
            params = [k for k in params if k != "a0"] + ["a0"]
        rows.append({"id": fam.id, "tag": fam.tag, "classical": fam.classical,
                     "quantum": fam.quantum, "separable": fam.separable,
                     "reducible": fam.reducible, "hbar2": fam.hbar2,
                     "params": params})
    return rows
