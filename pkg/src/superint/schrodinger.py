"""Finite-difference Schroedinger solver used as an independent spectral oracle.

1D problems use the standard three-point Laplacian with Dirichlet walls,
which gives a symmetric tridiagonal matrix; eigenpairs come from LAPACK's
tridiagonal routines.  Two grids (N and 2N) give a Richardson estimate.
"""

import csv
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import NotConverged, NotSeparable, StencilBoundary, ValidationError
from .potentials import PotentialSpec


@dataclass(frozen=True)
class Grid1D:
    L: float
    N: int
    center: float = 0.0

    def __post_init__(self):
        if self.N < 64:
            raise ValidationError("a 1D grid needs N >= 64 interior points")
        if self.L <= 0:
            raise ValidationError("L must be positive")

    @property
    def h(self):
        return 2 * self.L / (self.N + 1)

    @property
    def x(self):
        return self.center - self.L + self.h * np.arange(1, self.N + 1)

    def refined(self):
        return Grid1D(self.L, 2 * self.N, self.center)


@dataclass
class EigenResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray          # (N, n) L2-normalised on the grid
    richardson_estimate: np.ndarray
    fine_eigenvalues: np.ndarray = None
    grid: Grid1D = None

    @property
    def richardson_error(self):
        return np.abs(self.richardson_estimate - self.fine_eigenvalues)


def _eig(V, grid, n, hbar, vectors=True):
    x = grid.x
    v = np.asarray(V(x), dtype=float) + 0 * x
    if not np.all(np.isfinite(v)):
        raise ValidationError("potential is not finite on the grid; truncate the domain")
    k = hbar * hbar / (2 * grid.h ** 2)
    d = 2 * k + v
    e = np.full(grid.N - 1, -k)
    if not vectors:
        return eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, n - 1)), None
    w, U = eigh_tridiagonal(d, e, select="i", select_range=(0, n - 1))
    # reorthogonalise (inverse iteration can drift for close pairs)
    Q, R = np.linalg.qr(U)
    Q *= np.sign(np.diag(R))
    return w, Q / np.sqrt(grid.h)


def solve_1d(V, grid: Grid1D, n_levels, hbar=1.0, tol=None):
    """Lowest eigenpairs of -(hbar^2/2) d^2/dx^2 + V on ``grid``.

    The Richardson estimate combines grids N and 2N assuming O(h^2) error.
    With ``tol`` set, NotConverged is raised when the two grids differ by
    more than tol * max(1, |E|) for any requested level.
    """
    n = int(n_levels)
    if n < 1 or n > grid.N:
        raise ValidationError("n_levels out of range")
    w1, U = _eig(V, grid, n, hbar)
    fine = grid.refined()
    w2, _ = _eig(V, fine, n, hbar, vectors=False)
    r = (grid.h / fine.h) ** 2
    rich = w2 + (w2 - w1) / (r - 1)
    if tol is not None:
        bad = np.abs(w2 - w1) > tol * np.maximum(1.0, np.abs(w2))
        if np.any(bad):
            raise NotConverged(f"levels {np.where(bad)[0].tolist()} differ between N and 2N "
                               f"by more than {tol:g}")
    return EigenResult(w1, U, rich, w2, grid)


def convergence_ratios(V, grid: Grid1D, n_levels, hbar=1.0):
    """|E(N) - E(2N)| / |E(2N) - E(4N)| per level (about 4 for O(h^2))."""
    g2 = grid.refined()
    g4 = g2.refined()
    w = [_eig(V, g, n_levels, hbar, vectors=False)[0] for g in (grid, g2, g4)]
    return np.abs(w[0] - w[1]) / np.maximum(np.abs(w[1] - w[2]), 1e-300)


# ----------------------------------------------------------- 1D domains

def find_poles(V, L, center=0.0, n=20001, jump=1e6):
    """Locations in [center - L, center + L] where V is singular (scan)."""
    t = np.linspace(center - L, center + L, n)
    with np.errstate(all="ignore"):
        v = np.asarray(V(t), float) + 0 * t
    scale = np.median(np.abs(v[np.isfinite(v)])) if np.any(np.isfinite(v)) else 1.0
    bad = ~np.isfinite(v) | (np.abs(v) > jump * max(scale, 1.0))
    poles = []
    i = 0
    while i < n:
        if bad[i]:
            j = i
            while j + 1 < n and bad[j + 1]:
                j += 1
            seg = slice(i, j + 1)
            k = i + int(np.argmax(np.where(np.isfinite(v[seg]), np.abs(v[seg]), np.inf)))
            poles.append(float(t[k]))
            i = j + 1
        else:
            i += 1
    return poles


def domain_interval(V, L, poles=None, guard=1e-3, which="middle"):
    """(lo, hi) for the 1D problem: [-L, L] cut at poles with guard bands.

    ``which`` picks the piece containing the origin ("middle"), else the
    longest piece.  Walls sit at the guard-band edges.
    """
    poles = sorted(find_poles(V, L) if poles is None else poles)
    cuts = [-L] + [p for p in poles if -L < p < L] + [L]
    pieces = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        lo2 = lo + (guard if lo > -L else 0.0)
        hi2 = hi - (guard if hi < L else 0.0)
        if hi2 > lo2:
            pieces.append((lo2, hi2))
    if not pieces:
        raise ValidationError("no pole-free interval")
    if which == "middle":
        for lo, hi in pieces:
            if lo <= 0 <= hi:
                return lo, hi
    return max(pieces, key=lambda p: p[1] - p[0])


def _grid_for(V, L, N, poles, guard):
    lo, hi = domain_interval(V, L, poles, guard)
    return Grid1D(0.5 * (hi - lo), N, 0.5 * (hi + lo))


def _axis_poles(spec, axis):
    p = spec.params
    if "a2" in p and axis == 0 and p["a2"] > 0:
        return [-np.sqrt(p["a2"]), np.sqrt(p["a2"])]
    return None


# ------------------------------------------------------------- 2D sums

@dataclass
class Level2D:
    E: float
    nx: int
    ny: int
    richardson_error: float


def spectrum_2d_separable(spec: PotentialSpec, cutoff, L=12.0, N=2000, n_levels=60, hbar=None,
                          guard=None, tol=None):
    """All E_x(n_x) + E_y(n_y) below ``cutoff`` from Richardson-extrapolated 1D levels."""
    if not spec.separable:
        raise NotSeparable(f"{spec.family} is not separable")
    hbar = spec.params.get("hbar", 1.0) if hbar is None else hbar
    guard = 1e-3 * spec.params.get("alen", 1.0) if guard is None else guard
    V1, V2 = spec.parts()
    res = []
    for axis, V in enumerate((V1, V2)):
        g = _grid_for(V, L, N, _axis_poles(spec, axis), guard)
        res.append(solve_1d(V, g, min(n_levels, g.N), hbar, tol))
    ex, ey = res[0].richardson_estimate, res[1].richardson_estimate
    er_x, er_y = res[0].richardson_error, res[1].richardson_error
    out = []
    for i, a in enumerate(ex):
        for j, b in enumerate(ey):
            if a + b < cutoff:
                out.append(Level2D(float(a + b), i, j, float(er_x[i] + er_y[j])))
    # the requested 1D levels must reach past the cutoff, otherwise levels are missing
    if ex[-1] + ey[0] < cutoff or ey[-1] + ex[0] < cutoff:
        raise NotConverged("n_levels too small to cover the cutoff")
    out.sort(key=lambda lv: (lv.E, lv.nx, lv.ny))
    return out


def write_spectrum_csv(levels, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["E", "n_x", "n_y", "richardson_error"])
        for lv in levels:
            w.writerow([repr(lv.E), lv.nx, lv.ny, repr(lv.richardson_error)])


def compare_levels(numeric, algebraic, rel_tol=1e-3, cutoff=None):
    """Match each algebraic level to the nearest numeric level.

    Returns a report dict; numeric levels with no algebraic partner are
    listed as extras (data, not failures).
    """
    vals = np.sort([lv.E if hasattr(lv, "E") else float(lv) for lv in numeric])
    num = []
    for v in vals:          # merge degenerate copies
        if not num or abs(v - num[-1]) > 1e-7 * max(1.0, abs(v)):
            num.append(v)
    num = np.array(num)
    alg = np.array(sorted(a for a in algebraic if cutoff is None or a < cutoff))
    rows = []
    for a in alg:
        k = int(np.argmin(np.abs(num - a)))
        rel = abs(num[k] - a) / max(abs(a), 1e-300)
        rows.append({"algebraic": float(a), "numeric": float(num[k]), "rel_error": float(rel),
                     "match": bool(rel < rel_tol)})
    used = {r["numeric"] for r in rows if r["match"]}
    num = [round(float(e), 10) for e in num]
    used = {round(u, 10) for u in used}
    extras = [float(e) for e in num if e not in used]
    return {"levels": rows, "all_matched": all(r["match"] for r in rows), "extras": extras,
            "max_rel_error": max((r["rel_error"] for r in rows), default=0.0)}


# ----------------------------------------------------- grid commutator

@dataclass(frozen=True)
class Grid2D:
    lo: tuple
    hi: tuple
    n: int

    @property
    def h(self):
        return ((self.hi[0] - self.lo[0]) / (self.n - 1), (self.hi[1] - self.lo[1]) / (self.n - 1))

    def mesh(self):
        x = np.linspace(self.lo[0], self.hi[0], self.n)
        y = np.linspace(self.lo[1], self.hi[1], self.n)
        return np.meshgrid(x, y, indexing="ij")


# 5-point central stencils, fourth order, for first and second derivatives
_D1 = np.array([1, -8, 0, 8, -1]) / 12.0
_D2 = np.array([-1, 16, -30, 16, -1]) / 12.0


def _diff(F, h, axis, kind):
    w = _D1 if kind == 1 else _D2
    out = np.zeros_like(F)
    sl = [slice(None)] * 2
    n = F.shape[axis]
    acc = 0
    for k, c in zip(range(-2, 3), w):
        src = [slice(None)] * 2
        src[axis] = slice(2 + k, n - 2 + k)
        acc = acc + c * F[tuple(src)]
    sl[axis] = slice(2, n - 2)
    out[tuple(sl)] = acc / h ** kind
    return out


class _Ops:
    """p_j = -i hbar d_j and multiplication, on a uniform mesh (interior valid)."""

    def __init__(self, grid, hbar):
        self.hx, self.hy = grid.h
        self.hbar = hbar

    def p(self, F, j):
        return -1j * self.hbar * _diff(F, self.hx if j == 0 else self.hy, j, 1)

    def lap(self, F):
        return _diff(F, self.hx, 0, 2) + _diff(F, self.hy, 1, 2)


def _apply_X(X, ops, x, y, F):
    """X psi with X = sum A {L^i, p1^j p2^k} + {g1, p1} + {g2, p2} (symmetrised)."""
    from .integrals import A_KEYS

    def Lop(G):
        return x * ops.p(G, 1) - y * ops.p(G, 0)

    def mono(G, i, j, k):
        for _ in range(k):
            G = ops.p(G, 1)
        for _ in range(j):
            G = ops.p(G, 0)
        for _ in range(i):
            G = Lop(G)
        return G

    def mono_rev(G, i, j, k):
        for _ in range(i):
            G = Lop(G)
        for _ in range(k):
            G = ops.p(G, 1)
        for _ in range(j):
            G = ops.p(G, 0)
        return G
    out = np.zeros_like(F, dtype=complex)
    for c, key in zip(X.A, A_KEYS):
        if c == 0:
            continue
        i, j, k = (int(ch) for ch in key)
        out += c * (mono(F, i, j, k) + mono_rev(F, i, j, k))
    g1, g2 = X.g(x, y)
    out += g1 * ops.p(F, 0) + ops.p(g1 * F, 0) + g2 * ops.p(F, 1) + ops.p(g2 * F, 1)
    return out


def _apply_H(spec, ops, x, y, F):
    return -0.5 * ops.hbar ** 2 * ops.lap(F) + spec.raw(x, y) * F


def bump(center, radius):
    """Smooth compactly supported test function exp(-1/(1 - r^2))."""
    cx, cy = center

    def f(x, y):
        r2 = ((x - cx) ** 2 + (y - cy) ** 2) / radius ** 2
        with np.errstate(all="ignore"):
            v = np.where(r2 < 1, np.exp(-1.0 / np.maximum(1 - r2, 1e-300)), 0.0)
        return v
    f.center, f.radius = center, radius
    return f


def grid_commutator_residual(spec: PotentialSpec, X, grid: Grid2D, test_functions, hbar=None,
                             levels=3):
    """Interior max of [H, X] psi on ``levels`` successively refined grids.

    The operators are products of fourth-order central stencils; near the
    edges of the mesh these are invalid, so each test function must keep a
    margin of 12 mesh cells from the boundary.  Returns per-level residuals
    (relative to max |H X psi|) and the observed order.
    """
    hbar = spec.params.get("hbar", 1.0) if hbar is None else hbar
    reports = []
    for lev in range(levels):
        g = Grid2D(grid.lo, grid.hi, (grid.n - 1) * 2 ** lev + 1)
        x, y = g.mesh()
        hx, hy = g.h
        ops = _Ops(g, hbar)
        worst = 0.0
        for f in test_functions:
            c, r = getattr(f, "center", None), getattr(f, "radius", None)
            if c is not None:
                margin = 12 * max(hx, hy)
                if (c[0] - r < g.lo[0] + margin or c[0] + r > g.hi[0] - margin or
                        c[1] - r < g.lo[1] + margin or c[1] + r > g.hi[1] - margin):
                    raise StencilBoundary("test function support reaches the stencil boundary")
            F = f(x, y).astype(complex)
            HX = _apply_H(spec, ops, x, y, _apply_X(X, ops, x, y, F))
            XH = _apply_X(X, ops, x, y, _apply_H(spec, ops, x, y, F))
            inner = (slice(12, -12), slice(12, -12))
            comm = np.abs(HX - XH)[inner]
            scale = max(np.max(np.abs(HX[inner])), 1e-300)
            worst = max(worst, float(np.max(comm) / scale))
        reports.append({"n": g.n, "h": max(hx, hy), "residual": worst})
    orders = [np.log2(reports[i]["residual"] / reports[i + 1]["residual"])
              if reports[i + 1]["residual"] > 0 else np.inf for i in range(len(reports) - 1)]
    return {"levels": reports, "orders": orders,
            "order": float(min(orders)) if orders else float("nan"),
            "final": reports[-1]["residual"]}
