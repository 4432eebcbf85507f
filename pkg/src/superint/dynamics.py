"""Classical time evolution with a fixed-step Stormer-Verlet scheme.

The scheme is kick-drift-kick: second order, symplectic and time
reversible.  Steps that touch a kink of a |x| or sqrt|x| potential are
redone with an event-located adaptive integrator so the O(dt) error of a
non-smooth force is not picked up.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import minimize_scalar

from .errors import NotBounded, NotSeparable, Overflow, PoleEncounter, ValidationError
from .potentials import GUARD, PotentialSpec

ESCAPE = 1e8
KINK_BAND = 0.1  # fraction of the length scale handled adaptively around a kink


@dataclass(frozen=True)
class PhaseState:
    x1: float
    x2: float
    p1: float
    p2: float
    t: float = 0.0

    def as_array(self):
        return np.array([self.x1, self.x2, self.p1, self.p2])

    @classmethod
    def from_array(cls, z, t=0.0):
        return cls(float(z[0]), float(z[1]), float(z[2]), float(z[3]), float(t))


@dataclass
class Trajectory:
    t: np.ndarray
    z: np.ndarray
    dt: float
    conserved_log: dict = field(default_factory=dict)
    spec: PotentialSpec = None

    @property
    def states(self):
        return [PhaseState.from_array(z, t) for z, t in zip(self.z, self.t)]

    def __len__(self):
        return len(self.t)

    def to_csv(self, path, every=1):
        names = list(self.conserved_log)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "x1", "x2", "p1", "p2"] + names)
            for i in range(0, len(self.t), every):
                row = [self.t[i], *self.z[i]] + [self.conserved_log[k][i] for k in names]
                w.writerow([repr(float(v)) for v in row])


def _force(spec):
    g = spec.grad_fn()

    def f(x, y):
        gx, gy = g(x, y)
        return -gx, -gy
    return f


def _kink_gap(spec, x, y):
    """Distance to the nearest kink line (inf without kinks)."""
    d = np.full(np.shape(x), np.inf)
    for axis, c in spec.fam.kinks:
        d = np.minimum(d, np.abs((x if axis == "x" else y) - c))
    return d


def _crossed(spec, x_old, x_new, y_old, y_new, band):
    hit = _kink_gap(spec, x_new, y_new) < band
    for axis, c in spec.fam.kinks:
        a, b = (x_old, x_new) if axis == "x" else (y_old, y_new)
        hit |= (a - c) * (b - c) <= 0
    return hit


def _passage(spec, z, t0, band, dt, rtol=1e-12, atol=1e-13):
    """Adaptive solve from z until the orbit leaves the kink band.

    Returns (sol, t_end) with sol(t) valid on [t0, t_end] and t_end on the
    step grid t0 + k dt, the first grid time after the exit.  Each kink
    crossing restarts the solver so no step straddles the non-smooth line.
    """
    force = _force(spec)
    hop = 1e-6 * spec.length_scale()

    def rhs(t, s):
        with np.errstate(all="ignore"):
            fx, fy = force(s[0], s[1])
        return [s[2], s[3], float(np.nan_to_num(fx)), float(np.nan_to_num(fy))]

    def leave(t, s):
        return float(_kink_gap(spec, s[0], s[1])) - band
    leave.terminal, leave.direction = True, 1.0
    crossings = []
    for axis, c in spec.fam.kinks:
        i = 0 if axis == "x" else 1
        for side in (-1.0, 1.0):
            ev = (lambda i, c: (lambda t, s: s[i] - c))(i, c + side * hop)
            ev.terminal = True
            crossings.append(ev)
    pieces = []
    t, s = t0, np.array(z, float)
    t_end = None
    horizon = t0 + 1e6 * dt
    for _ in range(1000):
        tb = horizon if t_end is None else t_end
        sol = solve_ivp(rhs, (t, tb), s, method="DOP853", rtol=rtol, atol=atol,
                        dense_output=True, events=[leave] + crossings if t_end is None else crossings)
        if sol.t[-1] > t:
            pieces.append((t, sol.t[-1], sol.sol))
        s = sol.y[:, -1].copy()
        t = sol.t[-1]
        if t_end is None and sol.status == 1 and len(sol.t_events[0]) and sol.t_events[0][-1] == t:
            t_end = t0 + dt * (np.floor((t - t0) / dt + 1e-9) + 1)
        if t_end is not None and t >= t_end - 1e-15 * max(1.0, abs(t_end)):
            break
        if sol.status == -1:
            break
        s, t = _hop(spec, s, t, hop)

    last = s.copy()

    def ev(tq):
        for a, b, f in pieces:
            if tq <= b + 1e-13:
                return f(min(max(tq, a), b))
        return last
    return ev, (t_end if t_end is not None else t)


def _hop(spec, s, t, eps):
    """Cross the slab |x - c| < eps of a kink in closed form.

    The normal momentum follows from energy balance and the flight time
    from the 1D quadrature of dx / v(x); the other coordinate gets a
    kick-drift-kick update over that time.  Used because adaptive solvers
    stall against a sqrt|x| cusp.
    """
    V1, V2 = spec.parts()
    s = s.copy()
    for axis, c in spec.fam.kinks:
        i = 0 if axis == "x" else 1
        v = s[i + 2]
        if abs(abs(s[i] - c) - eps) > 1e-6 * eps or v * (c - s[i]) <= 0:
            continue
        V = V1 if i == 0 else V2
        Vf = lambda u: float(V(np.array(float(u))))
        e = 0.5 * v * v + Vf(s[i])
        end = c + 1.001 * (c - s[i])  # land just past the far event surface
        if e <= Vf(end):
            continue
        dtau = quad(lambda u: 1.0 / np.sqrt(max(2 * (e - Vf(u)), 1e-300)), min(s[i], end),
                    max(s[i], end), points=[c], limit=200)[0]
        o = 1 - i
        f = _force(spec)
        s[o + 2] += 0.5 * dtau * float(f(s[0], s[1])[o])
        s[o] += dtau * s[o + 2]
        s[i], s[i + 2] = end, np.copysign(np.sqrt(2 * (e - Vf(end))), v)
        s[o + 2] += 0.5 * dtau * float(f(s[0], s[1])[o])
        t += dtau
    return s, t


def integrate_batch(spec: PotentialSpec, states, dt, n, watch=None, store_every=1):
    """Integrate several initial conditions with one shared loop.

    Returns a list of Trajectory.  Pole or escape in any member raises for
    that member with its partial trajectory attached.
    """
    Z0 = np.atleast_2d(np.array([s.as_array() if isinstance(s, PhaseState) else s
                                 for s in states], dtype=float))
    t0 = np.array([getattr(s, "t", 0.0) for s in states], dtype=float)
    m = len(Z0)
    force = _force(spec)
    kinks = bool(spec.fam.kinks)
    band = KINK_BAND * spec.length_scale()
    passing = [None] * m      # (dense solution, last step index) per member
    guard = spec.fam.guard is not None
    nstore = n // store_every + 1
    out = np.empty((nstore, m, 4))
    out[0] = Z0
    x, y, p1, p2 = (Z0[:, i].copy() for i in range(4))
    with np.errstate(all="ignore"):
        fx, fy = force(x, y)
    h = 0.5 * dt
    k = 1
    for step in range(1, n + 1):
        xo, yo, po1, po2 = x, y, p1, p2
        q1 = p1 + h * fx
        q2 = p2 + h * fy
        x = x + dt * q1
        y = y + dt * q2
        if kinks:
            with np.errstate(all="ignore"):
                fx, fy = force(x, y)
            p1 = q1 + h * fx
            p2 = q2 + h * fy
            bad = _crossed(spec, xo, x, yo, y, band)
            touched = False
            for j in range(m):
                if passing[j] is None and bad[j]:
                    tj = step - 1
                    sol, t_end = _passage(spec, (xo[j], yo[j], po1[j], po2[j]), tj * dt, band, dt)
                    passing[j] = (sol, int(round(t_end / dt)))
                if passing[j] is not None:
                    touched = True
                    sol, last = passing[j]
                    x[j], y[j], p1[j], p2[j] = sol(step * dt)
                    if step >= last:
                        passing[j] = None
            if touched:
                with np.errstate(all="ignore"):
                    fx, fy = force(x, y)
        else:
            fx, fy = force(x, y)
            p1 = q1 + h * fx
            p2 = q2 + h * fy
        if guard:
            d = spec.guard_distance(x, y)
            if np.any(d < GUARD):
                j = int(np.argmin(d))
                raise PoleEncounter(f"trajectory {j} entered a pole guard band at step {step}",
                                    _partial(spec, out[:k, j], dt * store_every, t0[j], watch))
        if step % store_every == 0:
            out[k, :, 0], out[k, :, 1], out[k, :, 2], out[k, :, 3] = x, y, p1, p2
            k += 1
        if step % 256 == 0 or step == n:
            mag = np.max(np.abs(np.stack([x, y, p1, p2])), axis=0)
            if np.any(~np.isfinite(mag) | (mag > ESCAPE)):
                j = int(np.argmax(~np.isfinite(mag) | (mag > ESCAPE)))
                raise Overflow(f"trajectory {j} escaped at step {step}",
                               _partial(spec, out[:k, j], dt * store_every, t0[j], watch))
    return [_partial(spec, out[:k, j], dt * store_every, t0[j], watch) for j in range(m)]


def _partial(spec, z, dt, t0, watch):
    z = np.array(z)
    t = t0 + dt * np.arange(len(z))
    traj = Trajectory(t, z, dt, {}, spec)
    log_integrals(traj, watch)
    return traj


def _watch_dict(watch):
    if watch is None:
        return {}
    if isinstance(watch, dict):
        return dict(watch)
    out = {}
    for i, F in enumerate(watch):
        name = getattr(F, "label", "") or getattr(F, "name", "") or f"I{i}"
        out[name] = F
    return out


def log_integrals(traj, watch=None):
    """Fill conserved_log with H and the watched phase functions."""
    watch = _watch_dict(watch)
    spec = traj.spec
    x, y, p1, p2 = traj.z.T
    with np.errstate(all="ignore"):
        traj.conserved_log["H"] = 0.5 * (p1 * p1 + p2 * p2) + spec.raw(x, y)
        for name, F in watch.items():
            traj.conserved_log[name] = np.asarray(F(x, y, p1, p2), float) + 0 * x
    return traj


def integrate(spec: PotentialSpec, s0: PhaseState, dt, n, watch=None, store_every=1):
    """Single trajectory; ``watch`` maps names to phase functions f(x, y, p1, p2)."""
    if dt <= 0 or n < 1:
        raise ValidationError("need dt > 0 and n >= 1")
    return integrate_batch(spec, [s0], dt, n, watch, store_every)[0]


def reverse(traj_or_state):
    s = traj_or_state if isinstance(traj_or_state, PhaseState) else \
        PhaseState.from_array(traj_or_state.z[-1], traj_or_state.t[-1])
    return PhaseState(s.x1, s.x2, -s.p1, -s.p2, s.t)


# ------------------------------------------------------------- diagnostics

def energy_error(traj):
    H = traj.conserved_log["H"]
    return H - H[0]


def energy_drift(traj, blocks=20):
    """Slope of block-averaged energy error with its standard error.

    Block means remove most of the oscillation so the OLS standard error is
    not wildly optimistic.
    """
    err = energy_error(traj)
    t = traj.t
    nb = min(blocks, len(t) // 2)
    idx = np.array_split(np.arange(len(t)), nb)
    tb = np.array([t[i].mean() for i in idx])
    eb = np.array([err[i].mean() for i in idx])
    A = np.column_stack([tb, np.ones_like(tb)])
    coef, res, *_ = np.linalg.lstsq(A, eb, rcond=None)
    dof = max(nb - 2, 1)
    s2 = float(np.sum((A @ coef - eb) ** 2) / dof)
    cov = s2 * np.linalg.inv(A.T @ A)
    slope, se = float(coef[0]), float(np.sqrt(cov[0, 0]))
    return {"slope": slope, "stderr": se, "consistent_with_zero": abs(slope) <= 1.96 * se + 1e-300,
            "amplitude": float(np.max(np.abs(err)))}


def relative_variation(traj, name):
    v = traj.conserved_log[name]
    scale = max(np.max(np.abs(v)), 1e-300)
    return float(np.max(np.abs(v - v[0])) / scale)


# ---------------------------------------------------------------- closure

def _coord_scales(z):
    half = 0.5 * (np.max(z, axis=0) - np.min(z, axis=0))
    return np.where(half > 1e-12, half, 1.0)


def _hermite_min(spec, za, zb, dt, z0, scales):
    """Minimise the scaled distance to z0 along the cubic Hermite interpolant."""
    fa = np.array(_force(spec)(za[0], za[1]), float)
    fb = np.array(_force(spec)(zb[0], zb[1]), float)
    da = np.concatenate([za[2:], fa])
    db = np.concatenate([zb[2:], fb])

    def interp(s):
        h00 = 2 * s ** 3 - 3 * s ** 2 + 1
        h10 = s ** 3 - 2 * s ** 2 + s
        h01 = -2 * s ** 3 + 3 * s ** 2
        h11 = s ** 3 - s ** 2
        return h00 * za + h10 * dt * da + h01 * zb + h11 * dt * db

    def dist(s):
        return float(np.linalg.norm((interp(s) - z0) / scales))
    r = minimize_scalar(dist, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-12})
    return r.fun, r.x


def _closure_in(spec, z, t, z0, scales, tol, depart=0.1, departed=False):
    d = np.linalg.norm((z - z0) / scales, axis=1)
    if departed:
        start = 0
    else:
        away = np.where(d > depart)[0]
        if len(away) == 0:
            return None
        start = away[0]
    dd = d[start:]
    # local minima of the sampled distance that come near the start
    cand = np.where((dd[1:-1] <= dd[:-2]) & (dd[1:-1] <= dd[2:]) & (dd[1:-1] < 1e-2))[0] + 1
    dt = t[1] - t[0]
    for c in cand:
        i = start + c
        best = (np.inf, None)
        for a in (i - 1, i):
            if a < 0 or a + 1 >= len(z):
                continue
            val, s = _hermite_min(spec, z[a], z[a + 1], dt, z0, scales)
            if val < best[0]:
                best = (val, t[a] + s * dt)
        if best[0] < tol:
            return best
    return None


def _looks_unbounded(z, z0):
    r = np.linalg.norm(z[:, :2] - z0[:2], axis=1)
    n = len(r)
    if n < 8:
        return False
    first, second = np.max(r[: n // 2]), np.max(r[n // 2:])
    return second > 1.5 * first + 1e-12


def detect_closure(traj: Trajectory, tol=1e-5):
    """(closed, period) from the first return of the scaled phase-space distance."""
    z0 = traj.z[0]
    scales = _coord_scales(traj.z)
    hit = _closure_in(traj.spec, traj.z, traj.t - traj.t[0], z0, scales, tol)
    if hit is not None:
        return True, float(hit[1])
    if _looks_unbounded(traj.z, z0):
        raise NotBounded("trajectory does not stay in a bounded region")
    return False, None


def find_closure(spec, states, dt, n_max, tol=1e-5, chunk=20000):
    """Integrate a batch until every member closes or n_max steps pass.

    Returns a list of dicts {closed, period, min_distance, steps}.  Only the
    current chunk is stored, so memory stays flat for long runs.
    """
    Z0 = np.array([s.as_array() for s in states])
    m = len(Z0)
    result = [{"closed": False, "period": None, "steps": 0} for _ in range(m)]
    lo, hi = Z0.copy(), Z0.copy()
    cur = [PhaseState.from_array(z) for z in Z0]
    prev_tail = [None] * m
    departed = np.zeros(m, bool)
    done = np.zeros(m, bool)
    steps = 0
    while steps < n_max and not np.all(done):
        n = min(chunk, n_max - steps)
        trajs = integrate_batch(spec, cur, dt, n)
        for j, tr in enumerate(trajs):
            if done[j]:
                continue
            lo[j] = np.minimum(lo[j], tr.z.min(axis=0))
            hi[j] = np.maximum(hi[j], tr.z.max(axis=0))
            half = 0.5 * (hi[j] - lo[j])
            scales = np.where(half > 1e-12, half, 1.0)
            z = tr.z if prev_tail[j] is None else np.vstack([prev_tail[j], tr.z[1:]])
            t = tr.t if prev_tail[j] is None else np.concatenate(
                [tr.t[0] - dt * np.arange(len(prev_tail[j]) - 1, 0, -1), tr.t])
            hit = _closure_in(spec, z, t, Z0[j], scales, tol, departed=departed[j])
            departed[j] |= bool(np.any(np.linalg.norm((tr.z - Z0[j]) / scales, axis=1) > 0.1))
            if hit is not None:
                done[j] = True
                result[j].update(closed=True, period=float(hit[1]), min_distance=float(hit[0]))
            prev_tail[j] = tr.z[-3:]
            result[j]["steps"] = steps + n
            cur[j] = PhaseState.from_array(tr.z[-1], tr.t[-1])
        steps += n
    return result


# ------------------------------------------------------------ boundedness

def _allowed_compact(fun, E, scale, lo=-np.inf, hi=np.inf):
    """True when {t : fun(t) <= E} is bounded on both sides."""
    g = np.geomspace(1e-3 * scale, 1e6 * scale, 4000)
    for sgn in (1.0, -1.0):
        t = sgn * g
        t = t[(t >= lo) & (t <= hi)]
        if len(t) == 0:
            continue
        with np.errstate(all="ignore"):
            v = fun(t)
        v = np.where(np.isfinite(v), v, np.inf)
        if np.any(v[-5:] <= E):
            return False
    return True


def check_bounded(spec: PotentialSpec, E1, E2):
    """Boundedness from the separated energies (turning-point scan).

    Separable potentials use V1 against E1 and V2 against E2.  For Kepler
    E2 is the angular momentum and the radial effective potential is used.
    """
    scale = spec.length_scale()
    if spec.family == "kepler":
        al = spec.params["alpha"]
        veff = lambda r: al / r + 0.5 * E2 ** 2 / r ** 2
        return _allowed_compact(veff, E1, scale, lo=0.0)
    if not spec.separable:
        raise NotSeparable(f"{spec.family} is not separable in cartesian coordinates")
    V1, V2 = spec.parts()
    return _allowed_compact(V1, E1, scale) and _allowed_compact(V2, E2, scale)
