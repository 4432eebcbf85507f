"""Spectra from the cubic algebra of the integrals via a deformed oscillator.

The algebra is

    [A, B] = C,   [A, C] = alpha B,   [B, C] = beta A^3 + gamma A^2 + delta A + eps

with gamma, delta, eps polynomials in the energy.  It is realised on a Fock
space {b, b^dagger, N} with b^dagger b = Phi(N), b b^dagger = Phi(N + 1), by

    A = sqrt(alpha) (N + u),     B = b + b^dagger.

Then [A, C] = alpha B holds identically and
[B, C] = 2 sqrt(alpha) (Phi(N + 1) - Phi(N)), which ties beta..eps to the
forward difference of Phi in z = N + u.  A (p+1)-dimensional unitary
representation needs Phi(0) = Phi(p+1) = 0 and Phi(x) > 0 for 0 < x <= p.
"""

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import NewtonDivergence, NoSolution, RepresentationInconsistent, ValidationError


# ---------------------------------------------------------------- models

@dataclass
class StructureFunction:
    """Phi(x, u, E).

    ``factored_roots`` holds pairs (s, c) meaning a factor (x + u - (s E + c));
    ``coefficient`` multiplies the product.
    """
    phi: Callable
    factored_roots: Optional[list] = None
    coefficient: float = 1.0
    name: str = "custom"

    def __call__(self, x, u, E):
        return self.phi(x, u, E)

    def from_factors(self, x, u, E):
        out = self.coefficient
        for s, c in self.factored_roots:
            out = out * (x + u - (s * E + c))
        return out

    def z_poly(self, E):
        """Coefficients (low to high) of Phi as a polynomial in z = x + u."""
        if self.factored_roots is None:
            raise ValidationError("z_poly needs factored roots")
        return self.coefficient * P.polyfromroots([s * E + c for s, c in self.factored_roots])

    def shifted(self, dc):
        """Copy with every root offset moved by dc (sensitivity checks)."""
        roots = [(s, c + dc) for s, c in self.factored_roots]
        coef = self.coefficient

        def phi(x, u, E):
            out = coef
            for s, c in roots:
                out = out * (x + u - (s * E + c))
            return out
        return StructureFunction(phi, roots, coef, self.name + "-shifted")


@dataclass
class CubicAlgebraModel:
    alpha: float
    beta: float
    gamma_poly: np.ndarray          # coefficients in E, low to high
    delta_poly: np.ndarray
    epsilon_poly: np.ndarray
    casimir_poly: np.ndarray        # Casimir as a polynomial in H
    params: dict = field(default_factory=dict)
    name: str = "model"
    structure: Optional[StructureFunction] = field(default=None, repr=False)

    def gamma(self, E):
        return P.polyval(E, self.gamma_poly)

    def delta(self, E):
        return P.polyval(E, self.delta_poly)

    def epsilon(self, E):
        return P.polyval(E, self.epsilon_poly)

    def casimir(self, E):
        return P.polyval(E, self.casimir_poly)

    @property
    def degrees(self):
        return {k: len(np.trim_zeros(getattr(self, k + "_poly"), "b")) - 1
                for k in ("gamma", "delta", "epsilon", "casimir")}


def _e_poly_of_z_coeffs(sf: StructureFunction, degE=4):
    """Phi's z-coefficients as polynomials in E, found by exact interpolation."""
    Es = np.arange(degE + 1, dtype=float)
    rows = np.array([np.pad(sf.z_poly(E), (0, 5 - len(sf.z_poly(E)))) for E in Es])
    V = np.vander(Es, degE + 1, increasing=True)
    return np.linalg.solve(V, rows)          # [E power, z power]


def _difference_coeffs(zc):
    """Coefficients of phi(z + 1) - phi(z) from those of phi (low to high)."""
    n = len(zc)
    out = np.zeros(n)
    for k in range(n):
        for j in range(k):
            out[j] += zc[k] * _binom(k, j)
    return out[:-1] if n > 1 else out


def _binom(n, k):
    from math import comb
    return comb(n, k)


def model_from_structure(sf: StructureFunction, alpha, casimir_poly=None, name="model", params=None):
    """beta..eps from Phi through [B, C] = 2 sqrt(alpha) Delta Phi."""
    if alpha <= 0:
        raise ValidationError("alpha must be positive for a Hermitian A")
    C = _e_poly_of_z_coeffs(sf)               # C[j, k]: E^j z^k
    D = np.array([_difference_coeffs(C[j]) for j in range(C.shape[0])])   # E^j z^k of Delta Phi
    ra = np.sqrt(alpha)
    c = [D[:, k] for k in range(4)]           # each a polynomial in E
    beta_p = 2 * c[3] / alpha
    if np.max(np.abs(beta_p[1:])) > 1e-12 * max(1.0, abs(beta_p[0])):
        raise ValidationError("beta must not depend on E")
    return CubicAlgebraModel(alpha, float(beta_p[0]), 2 * c[2] / ra, 2 * c[1], 2 * ra * c[0],
                             np.zeros(1) if casimir_poly is None else np.asarray(casimir_poly, float),
                             dict(params or {}), name, sf)


def _a_squared(a, a0=None):
    if isinstance(a, str):
        if a.strip() not in ("i", "1j", "j"):
            raise ValidationError(f"unrecognised length {a!r}")
        if a0 is None:
            raise ValidationError("imaginary a needs a0")
        return -float(a0) ** 2
    a = complex(a)
    a2 = a * a
    if abs(a2.imag) > 1e-14 * abs(a2) or a == 0:
        raise ValidationError("a must be real or purely imaginary and nonzero")
    return a2.real


def build_rational1_model(a, hbar=1.0, a0=None):
    """Cubic algebra and structure function for the rational example.

    ``a`` may be real, purely imaginary (complex), or the string "i" together
    with ``a0``.  With eps = a^2 E / hbar^2 (a^2 signed) the roots are
    -eps - 1/2, eps + 1/2, -eps + 3/2, -eps + 5/2 and the coefficient is
    -hbar^8 / a^4; a^4 > 0 in both cases, so the coefficient is negative.
    """
    a2 = _a_squared(a, a0)
    h2 = float(hbar) ** 2
    kappa = a2 / h2
    roots = [(-kappa, -0.5), (kappa, 0.5), (-kappa, 1.5), (-kappa, 2.5)]
    coef = -h2 ** 4 / a2 ** 2

    def phi(x, u, E):
        e = kappa * E
        return coef * (x + u + e + 0.5) * (x + u - e - 0.5) * (x + u + e - 1.5) * (x + u + e - 2.5)
    sf = StructureFunction(phi, roots, coef, "rational-1")
    alpha = h2 ** 2 / a2 ** 2
    # Casimir as a polynomial in H (coefficients low to high)
    K = np.array([-3 * h2 ** 5 / a2 ** 4, -40 * h2 ** 4 / a2 ** 3, 16 * h2 ** 3 / a2 ** 2,
                  32 * h2 ** 2 / a2, -16 * h2])
    model = model_from_structure(sf, alpha, K, "rational-1", {"a2": a2, "hbar": float(hbar)})
    return model, sf


# -------------------------------------------------------------- spectrum

@dataclass
class Level:
    p: int
    u: float
    E: float
    branch: tuple
    positivity: bool
    boundary_residual: float = 0.0
    margin: float = 0.0


@dataclass
class SpectrumResult:
    levels: list
    model_id: str = ""
    no_solution: list = field(default_factory=list)
    degenerate: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    @property
    def positivity_certified(self):
        return [lv.positivity for lv in self.levels]

    def energies(self, p=None):
        return sorted({round(lv.E, 12) for lv in self.levels if p is None or lv.p == p})

    def to_json(self):
        return json.dumps({
            "model": self.model_id, "params": self.params,
            "levels": [{"p": lv.p, "u": lv.u, "E": lv.E, "branch": list(lv.branch),
                        "positivity": lv.positivity} for lv in self.levels]},
            sort_keys=True)


def _certify(sf, p, u, E, tol):
    vals = np.array([sf(x, u, E) for x in range(p + 2)], dtype=float)
    scale = max(np.max(np.abs(vals)), abs(sf.coefficient) if sf.factored_roots else 1.0, 1e-300)
    bres = max(abs(vals[0]), abs(vals[p + 1])) / scale
    inner = vals[1:p + 1]
    margin = float(inner.min() / scale) if p > 0 else np.inf
    return bres < tol and (p == 0 or margin > 1e-12), bres, margin


def _factored_candidates(sf, p):
    roots = sf.factored_roots
    out, degenerate = [], []
    for i, (si, ci) in enumerate(roots):
        for j, (sj, cj) in enumerate(roots):
            if i == j:
                continue
            # u = r_i(E) and p + 1 + u = r_j(E)
            if sj == si:
                if abs(cj - ci - (p + 1)) < 1e-12:
                    degenerate.append((p, (i, j)))
                continue
            E = (p + 1 + ci - cj) / (sj - si)
            out.append(((i, j), si * E + ci, E))
    return out, degenerate


def _newton_candidates(sf, p, starts, maxit=60):
    found, diverged = [], 0
    for u0, E0 in starts:
        z = np.array([u0, E0], float)
        ok = False
        for _ in range(maxit):
            F = np.array([sf(0, z[0], z[1]), sf(p + 1, z[0], z[1])], float)
            if not np.all(np.isfinite(F)) or np.max(np.abs(z)) > 1e12:
                break
            if np.max(np.abs(F)) < 1e-14 * (1 + np.max(np.abs(z))):
                ok = True
                break
            h = 1e-7 * (1 + np.abs(z))
            J = np.empty((2, 2))
            for k in range(2):
                dz = np.zeros(2)
                dz[k] = h[k]
                Fp = np.array([sf(0, *(z + dz)), sf(p + 1, *(z + dz))])
                Fm = np.array([sf(0, *(z - dz)), sf(p + 1, *(z - dz))])
                J[:, k] = (Fp - Fm) / (2 * h[k])
            step = np.linalg.lstsq(J, -F, rcond=None)[0]
            lam = 1.0
            n0 = np.linalg.norm(F)
            while lam > 1e-6:
                zt = z + lam * step
                Ft = np.array([sf(0, *zt), sf(p + 1, *zt)])
                if np.all(np.isfinite(Ft)) and np.linalg.norm(Ft) < n0:
                    break
                lam *= 0.5
            if lam <= 1e-6:
                break
            z = zt
        if ok:
            found.append(("newton", float(z[0]), float(z[1])))
        elif not np.all(np.isfinite(z)) or np.max(np.abs(z)) > 1e12:
            diverged += 1
    return found, diverged


def solve_spectrum(sf: StructureFunction, p_max, tol=1e-10, starts=None, model_id=None):
    """All (p, u, E) with Phi(0) = Phi(p+1) = 0 and Phi > 0 in between.

    Linear-in-E factored roots are paired analytically (every ordered pair
    of distinct roots is a branch).  Other structure functions use a
    multi-start damped Newton iteration on (u, E).  Levels of every branch
    are returned; choosing the physical ones is left to the caller.
    """
    levels, none, degenerate = [], [], []
    if starts is None:
        g = np.linspace(-10, 10, 9)
        starts = [(a, b) for a in g for b in g]
    all_diverged = True
    for p in range(int(p_max) + 1):
        if sf.factored_roots is not None:
            cands, deg = _factored_candidates(sf, p)
            degenerate += deg
            all_diverged = False
        else:
            cands, nd = _newton_candidates(sf, p, starts)
            all_diverged &= (nd == len(starts))
        got = []
        for branch, u, E in cands:
            ok, bres, margin = _certify(sf, p, u, E, tol)
            if not ok:
                continue
            if any(abs(E - g.E) < 1e-9 * (1 + abs(E)) and abs(u - g.u) < 1e-9 * (1 + abs(u)) for g in got):
                continue
            got.append(Level(p, float(u), float(E), tuple(branch) if not isinstance(branch, str) else (branch,),
                             True, float(bres), float(margin)))
        if not got:
            none.append(p)
        levels += got
    if sf.factored_roots is None and all_diverged:
        raise NewtonDivergence("Newton iteration diverged from every start")
    if not levels:
        raise NoSolution(f"no admissible (u, E) for p = 0..{p_max}")
    levels.sort(key=lambda lv: (lv.p, lv.E, lv.u))
    return SpectrumResult(levels, model_id or sf.name, none, degenerate)


def physical_levels(result: SpectrumResult, p_max=None):
    """Levels of the branch that exists for every p and rises with p.

    A bounded-below ladder must continue to all p with E increasing; the
    other branches either stop after a few p or descend.  Returns the
    levels of that branch, or raises NoSolution when no branch (or more
    than one) qualifies.
    """
    p_max = max(lv.p for lv in result.levels) if p_max is None else p_max
    by_branch = {}
    for lv in result.levels:
        by_branch.setdefault(lv.branch, []).append(lv)
    keep = []
    for br, lvs in by_branch.items():
        lvs = sorted(lvs, key=lambda lv: lv.p)
        ps = [lv.p for lv in lvs]
        if ps != list(range(p_max + 1)):
            continue
        if p_max > 0 and not np.all(np.diff([lv.E for lv in lvs]) > 0):
            continue
        keep.append(lvs)
    if len(keep) != 1:
        raise NoSolution(f"{len(keep)} branches form a rising ladder up to p = {p_max}")
    return keep[0]


def closed_form_levels(a2, hbar, p_max):
    """Closed-form levels of the rational example (hbar^2 convention)."""
    p = np.arange(p_max + 1)
    h2 = hbar ** 2
    if a2 < 0:
        return (p + 2) * h2 / (2 * -a2)
    return (p + 3) * h2 / (2 * a2)


# ------------------------------------------------------ representations

def representation(model: CubicAlgebraModel, sf: StructureFunction, level: Level):
    """(A, B, C) as (p+1)x(p+1) matrices in the basis |n>, n = 0..p."""
    p, u, E = level.p, level.u, level.E
    n = np.arange(p + 1)
    phis = np.array([sf(x, u, E) for x in range(1, p + 1)], float)
    if np.any(phis <= 0):
        raise RepresentationInconsistent("Phi is not positive inside the multiplet")
    A = np.diag(np.sqrt(model.alpha) * (n + u))
    b = np.diag(np.sqrt(phis), 1)            # b|n> = sqrt(Phi(n)) |n-1>
    B = b + b.T
    C = A @ B - B @ A
    return A, B, C


def check_commutation(model: CubicAlgebraModel, level: Level, sf: StructureFunction = None):
    """Largest relative violation of the three algebra relations."""
    sf = model.structure if sf is None else sf
    if sf is None:
        raise ValidationError("structure function required")
    A, B, C = representation(model, sf, level)
    E = level.E
    I = np.eye(len(A))
    rhs = (model.beta * A @ A @ A + model.gamma(E) * A @ A + model.delta(E) * A
           + model.epsilon(E) * I)
    r1 = A @ C - C @ A - model.alpha * B
    r2 = B @ C - C @ B - rhs
    a = np.max(np.abs(A))
    terms = [np.max(np.abs(B @ C)), abs(model.beta) * a ** 3, abs(model.gamma(E)) * a ** 2,
             abs(model.delta(E)) * a, abs(model.epsilon(E)), model.alpha * np.max(np.abs(B))]
    return float(max(np.max(np.abs(r1)), np.max(np.abs(r2))) / max(max(terms), 1e-300))


def casimir_value(model: CubicAlgebraModel, sf: StructureFunction, level: Level):
    """Casimir C^2 - alpha B^2 + q(A) in the representation (should be scalar).

    q solves q(A + sqrt(alpha)) - q(A) = sqrt(alpha) (F(A + sqrt(alpha)) + F(A))
    with F the right side of [B, C] and q(0) = 0.  Returns (value, spread).
    """
    A, B, C = representation(model, sf, level)
    E = level.E
    ra = np.sqrt(model.alpha)
    F = np.array([model.epsilon(E), model.delta(E), model.gamma(E), model.beta])
    # unknown q = sum_{k=1..4} q_k A^k; match the difference equation at 6 points
    pts = np.linspace(-2, 2, 6)
    M = np.array([[(t + ra) ** k - t ** k for k in range(1, 5)] for t in pts])
    rhs = ra * (P.polyval(pts + ra, F) + P.polyval(pts, F))
    q = np.concatenate([[0.0], np.linalg.lstsq(M, rhs, rcond=None)[0]])
    a = np.diag(A)
    Kmat = C @ C - model.alpha * B @ B + np.diag(P.polyval(a, q))
    d = np.diag(Kmat)
    off = Kmat - np.diag(d)
    spread = max(float(np.ptp(d)), float(np.max(np.abs(off))) if off.size else 0.0)
    return float(d.mean()), spread


def casimir_mismatch(model: CubicAlgebraModel, level: Level, sf: StructureFunction = None):
    """Relative gap between the tabulated K(E) and the representation Casimir."""
    sf = model.structure if sf is None else sf
    val, spread = casimir_value(model, sf, level)
    ref = model.casimir(level.E)
    scale = max(abs(ref), float(np.max(np.abs(model.casimir_poly))) * max(1.0, abs(level.E)) ** 4 * 1e-3)
    # the tabulated Casimir corresponds to rescaling B -> 2 B / hbar
    norm = 4.0 / model.params.get("hbar", 1.0) ** 2
    return abs(norm * val - ref) / scale, spread
