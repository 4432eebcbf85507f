"""Orbits as level sets of the integrals, without time integration.

For a separable potential the partial energies H1 = p1^2/2 + V1(x) and
H2 = p2^2/2 + V2(y) are conserved.  Together with a third-order integral X
they cut phase space down to a curve, which is traced here by
pseudo-arclength continuation on

    H1 = E1,  H2 = E2,  X = K          (three equations, four unknowns)

Working in phase space rather than in (x, y) means turning points are
ordinary points where a momentum passes through zero, so the sign-branch
bookkeeping reduces to reading off sign(p1), sign(p2).
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import BranchDeadEnd, ClassicallyForbidden, NotSeparable, SeedNotOnOrbit
from .integrals import ThirdOrderIntegral
from .potentials import PotentialSpec

SIGNS = ((1, 1), (1, -1), (-1, 1), (-1, -1))


def _parts(spec):
    if not spec.separable:
        raise NotSeparable(f"{spec.family} has no cartesian separation")
    return spec.parts(), spec.dparts()


def momenta_from_energies(spec: PotentialSpec, x, y, E1, E2, signs=(1, 1)):
    (V1, V2), _ = _parts(spec)
    r1 = 2 * (E1 - float(V1(np.array(float(x)))))
    r2 = 2 * (E2 - float(V2(np.array(float(y)))))
    tol = 1e-13 * max(1.0, abs(E1), abs(E2))
    if r1 < -tol or r2 < -tol:
        raise ClassicallyForbidden(f"({x}, {y}) is outside the region allowed by E1={E1}, E2={E2}")
    return signs[0] * np.sqrt(max(r1, 0.0)), signs[1] * np.sqrt(max(r2, 0.0))


def implicit_residual(spec, X: ThirdOrderIntegral, x, y, E1, E2, K, signs=(1, 1)):
    p1, p2 = momenta_from_energies(spec, x, y, E1, E2, signs)
    return float(X.classical(x, y, p1, p2)) - K


def separated_energies(spec, x, y, p1, p2):
    (V1, V2), _ = _parts(spec)
    return 0.5 * p1 * p1 + V1(np.asarray(x, float)), 0.5 * p2 * p2 + V2(np.asarray(y, float))


@dataclass
class AlgebraicOrbit:
    E1: float
    E2: float
    K: float
    sign_state: tuple
    curve: np.ndarray                      # (n, 2) positions
    branches: np.ndarray                   # (n, 2) signs of p1, p2
    residual: np.ndarray                   # X - K along the curve
    phase: np.ndarray = field(repr=False, default=None)   # (n, 4)
    closed: bool = False
    dead_end: str = ""

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "y", "branch_p1", "branch_p2", "residual"])
            for (x, y), (b1, b2), r in zip(self.curve, self.branches, self.residual):
                w.writerow([repr(float(x)), repr(float(y)), int(b1), int(b2), repr(float(r))])


class _System:
    """F(z) = (H1 - E1, H2 - E2, X - K) and its Jacobian."""

    def __init__(self, spec, X, E1, E2, K):
        (self.V1, self.V2), (self.d1, self.d2) = _parts(spec)
        self.X, self.target = X, np.array([E1, E2, K], float)

    def F(self, z):
        x, y, p1, p2 = z
        return np.array([0.5 * p1 * p1 + float(self.V1(np.array(x))),
                         0.5 * p2 * p2 + float(self.V2(np.array(y))),
                         float(self.X.classical(x, y, p1, p2))]) - self.target

    def J(self, z):
        x, y, p1, p2 = z
        gx = [float(v) for v in self.X.grad(x, y, p1, p2)]
        return np.array([[float(self.d1(np.array(x))), 0.0, p1, 0.0],
                         [0.0, float(self.d2(np.array(y))), 0.0, p2],
                         gx])


def _scales(spec, E1, E2, K):
    ell = spec.length_scale()
    pm = np.sqrt(2 * max(abs(E1) + abs(E2), 1e-12))
    return ell, pm, max(abs(K), 1e-12)


def _tangent(J, prev=None):
    _, s, vt = np.linalg.svd(J)
    t = vt[-1]
    rank_gap = s[-1] / s[0] if s[0] > 0 else 0.0
    if prev is not None and np.dot(t, prev) < 0:
        t = -t
    return t, rank_gap


def _correct(sysm, z, fscale, tol, maxit=8):
    for it in range(maxit):
        f = sysm.F(z)
        if np.all(np.abs(f) <= tol * fscale):
            return z, it
        dz = np.linalg.lstsq(sysm.J(z), -f, rcond=None)[0]
        z = z + dz
    f = sysm.F(z)
    return (z, maxit) if np.all(np.abs(f) <= tol * fscale) else (None, maxit)


def trace_orbit(spec: PotentialSpec, X: ThirdOrderIntegral, E1, E2, K, seed_point, tol=1e-10,
                chord_tol=1e-6, max_points=400000, signs=None):
    """Trace the closed phase curve through ``seed_point`` = (x, y).

    The sign pair is chosen as the one whose implicit residual at the seed
    is smallest; it must be below 1e-6 times the integral scale.  Step
    length follows the local curvature so that the chord sagitta stays
    below ``chord_tol`` times the length scale, with a floor of 1e-5.
    """
    ell, pm, ks = _scales(spec, E1, E2, K)
    x0, y0 = map(float, seed_point)
    cand = [signs] if signs is not None else list(SIGNS)
    res = []
    for sg in cand:
        try:
            res.append((abs(implicit_residual(spec, X, x0, y0, E1, E2, K, sg)), sg))
        except ClassicallyForbidden:
            raise
    r0, sg = min(res)
    if not r0 < 1e-6 * ks:
        raise SeedNotOnOrbit(f"seed residual {r0:.3e} exceeds 1e-6 * |K|")
    p1, p2 = momenta_from_energies(spec, x0, y0, E1, E2, sg)
    sysm = _System(spec, X, E1, E2, K)
    fscale = np.array([max(abs(E1), pm * pm), max(abs(E2), pm * pm), ks])
    z = np.array([x0, y0, p1, p2])
    # metric so positions and momenta weigh the same
    W = np.array([1 / ell, 1 / ell, 1 / pm, 1 / pm])
    zc, _ = _correct(sysm, z, fscale, tol)
    z = z if zc is None else zc
    # orientation: along the Hamiltonian flow
    flow = np.array([p1, p2, -float(sysm.d1(np.array(x0))), -float(sysm.d2(np.array(y0)))])
    t, _ = _tangent(sysm.J(z) / W[None, :])
    if np.dot(t / W, flow) < 0:
        t = -t
    ds_min, ds_max = 1e-5, 0.02        # in scaled units
    ds = 1e-3
    pts = [z.copy()]
    length = 0.0
    closed = False
    dead = ""
    start_scaled = z * W
    while len(pts) < max_points:
        zs = z * W
        ok = False
        while ds >= ds_min:
            pred = (zs + ds * t) / W
            zn, its = _correct(sysm, pred, fscale, tol)
            if zn is not None:
                tn, gap = _tangent(sysm.J(zn) / W[None, :], t)
                turn = np.linalg.norm(tn - t)
                if turn < 0.2 and gap > 1e-12:
                    ok = True
                    break
            ds *= 0.5
        if not ok:
            dead = f"continuation stalled after {len(pts)} points"
            break
        step = np.linalg.norm(zn * W - zs)
        kappa = np.linalg.norm(tn - t) / max(step, 1e-300)
        length += step
        z, t = zn, tn
        pts.append(z.copy())
        # back at the seed: close the loop
        if length > 10 * ds_max and np.linalg.norm(z * W - start_scaled) < 1.5 * step:
            closed = True
            pts.append(pts[0].copy())
            break
        ds = ds_max if kappa == 0 else min(ds_max, max(ds_min, np.sqrt(8 * chord_tol / kappa)))
        if its > 4:
            ds *= 0.5
        # do not overshoot the seed on the way back
        d_seed = np.linalg.norm(z * W - start_scaled)
        if length > 10 * ds_max and d_seed < 2 * ds:
            ds = max(ds_min, 0.6 * d_seed)
    P = np.array(pts)
    resid = np.array([sysm.F(q)[2] for q in P])
    br = np.where(P[:, 2:] >= 0, 1, -1)
    orbit = AlgebraicOrbit(E1, E2, K, tuple(sg), P[:, :2].copy(), br, resid, P, closed, dead)
    if dead:
        raise BranchDeadEnd(dead, orbit)
    return orbit


# ----------------------------------------------------------- comparison

def _point_to_polyline(P, Q):
    """Distance from each point of P to the polyline Q (nearest-vertex segments)."""
    tree = cKDTree(Q)
    k = min(4, len(Q))
    dist, near = tree.query(P, k=k)
    near = near.reshape(len(P), k)
    best = dist.reshape(len(P), k)[:, 0]
    for c in range(k):
        for off in (-1, 0):
            a = np.clip(near[:, c] + off, 0, len(Q) - 2)
            A, B = Q[a], Q[a + 1]
            AB = B - A
            L2 = np.einsum("ij,ij->i", AB, AB)
            s = np.clip(np.einsum("ij,ij->i", P - A, AB) / np.where(L2 > 0, L2, 1.0), 0.0, 1.0)
            best = np.minimum(best, np.linalg.norm(P - (A + s[:, None] * AB), axis=1))
    return best


def hausdorff(P, Q, normalize=True):
    """Symmetric point-to-polyline Hausdorff distance.

    Normalised by the diagonal of the joint bounding box.
    """
    P = np.asarray(P, float)
    Q = np.asarray(Q, float)
    d = max(np.max(_point_to_polyline(P, Q)), np.max(_point_to_polyline(Q, P)))
    if normalize:
        allp = np.vstack([P, Q])
        diag = np.linalg.norm(allp.max(axis=0) - allp.min(axis=0))
        d /= max(diag, 1e-300)
    return float(d)


def allowed_box(spec, E1, E2, n=4001):
    """Bounding box of the classically allowed rectangle (turning-point scan)."""
    (V1, V2), _ = _parts(spec)
    xlo, xhi, ylo, yhi = spec.region()
    out = []
    for V, E, lo, hi in ((V1, E1, xlo, xhi), (V2, E2, ylo, yhi)):
        c, w = 0.5 * (lo + hi), 0.5 * (hi - lo)
        for grow in range(12):
            t = np.linspace(c - w, c + w, n)
            with np.errstate(all="ignore"):
                ok = np.where(np.isfinite(V(t)), V(t), np.inf) <= E
            if not ok.any():
                raise ClassicallyForbidden("no allowed interval in the scan window")
            if not ok[0] and not ok[-1]:
                break
            w *= 2
        idx = np.where(ok)[0]
        h = t[1] - t[0]
        out += [t[idx[0]] - h, t[idx[-1]] + h]
    return tuple(out)
