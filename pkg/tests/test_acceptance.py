"""Acceptance suite: one group of tests per criterion, summarised at the end of the run."""
import time

import numpy as np
import pytest

from superint import special_functions as sfn
from superint.cubic_algebra import (build_rational1_model, check_commutation, closed_form_levels,
                                    physical_levels, solve_spectrum)
from superint.dynamics import PhaseState, energy_drift, find_closure, integrate
from superint.integrals import certify_integrability
from superint.potentials import (check_elliptic_ode, custom_spec, double_root_constants, make_spec,
                                 quartic_closed_forms, quartic_residual)
from superint.schrodinger import compare_levels, spectrum_2d_separable
from superint.trajectory_algebraic import allowed_box, hausdorff, separated_energies, trace_orbit

crit = pytest.mark.criterion

CLASSICAL = ["aniso-9-1", "sqrt-sqrt", "abs-sqrt", "osc-quartic-root", "abs-cubic-root"]
DEGENERATE = ["elliptic-sn", "elliptic-cn-well", "elliptic-sn-inverse",
              "degenerate-cosh", "degenerate-sinh", "degenerate-sin"]


def _note(record_property, text):
    record_property("detail", text)


# 1 ------------------------------------------------------------------------

@crit(1, "cubic-algebra ladder exact, < 1 s")
@pytest.mark.parametrize("a,a0", [("i", 1.0), (1.0, None), (0.7, None)])
def test_c1_spectrum_reproduction(a, a0, record_property):
    t = time.perf_counter()
    m, sf = build_rational1_model(a, 1.0, a0)
    ladder = physical_levels(solve_spectrum(sf, 10), 10)
    dt = time.perf_counter() - t
    err = np.max(np.abs(np.array([lv.E for lv in ladder]) - closed_form_levels(m.params["a2"], 1.0, 10)))
    _note(record_property, f"a={a}: err {err:.1e}, {dt:.2f}s")
    assert [lv.p for lv in ladder] == list(range(11))
    assert err < 1e-10 and dt < 1.0


# 2 ------------------------------------------------------------------------

@crit(2, "numeric 2D spectrum matches algebraic levels below E=8")
def test_c2_oracle_cross_check(record_property):
    t = time.perf_counter()
    sp = make_spec("rational-1", {"a": "i", "a0": 1.0, "hbar": 1.0})
    levels = spectrum_2d_separable(sp, 8.0, L=12, N=2000)
    rep = compare_levels(levels, closed_form_levels(-1.0, 1.0, 20), rel_tol=1e-3, cutoff=8.0)
    dt = time.perf_counter() - t
    _note(record_property, f"max rel {rep['max_rel_error']:.1e}, {len(rep['levels'])} levels, {dt:.1f}s")
    assert len(rep["levels"]) == 14
    assert rep["all_matched"] and dt < 120


# 3 ------------------------------------------------------------------------

@crit(3, "bounded orbits close (tol 1e-5, <= 1e6 steps, dt 1e-4)")
@pytest.mark.parametrize("fid", ["aniso-9-1", "sqrt-sqrt", "osc-quartic-root"])
def test_c3_closed_orbits(fid, record_property):
    sp = make_spec(fid, {}, classical=True)
    rng = np.random.default_rng(2024)
    states = [PhaseState(*rng.uniform(-1, 1, 4)) for _ in range(5)]
    res = find_closure(sp, states, 1e-4, 10 ** 6, tol=1e-5)
    n = sum(r["closed"] for r in res)
    _note(record_property, f"{fid}: {n}/5 closed")
    assert n == 5


# 4 ------------------------------------------------------------------------

@crit(4, "traced orbit vs integrated trajectory, Hausdorff < 1e-5")
@pytest.mark.parametrize("fid", ["aniso-9-1", "osc-quartic-root", "oscillator"])
def test_c4_orbit_equivalence(fid, record_property):
    sp = make_spec(fid, {}, classical=True)
    cert = certify_integrability(sp, hbar=0.0)
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(5):
        z0 = rng.uniform(-0.8, 0.8, 4)
        E1, E2 = map(float, separated_energies(sp, *z0))
        X = cert.integral(chebyshev=True, region=allowed_box(sp, E1, E2))
        orb = trace_orbit(sp, X, E1, E2, float(X.classical(*z0)), z0[:2])
        period = find_closure(sp, [PhaseState(*z0)], 1e-4, 10 ** 6)[0]["period"]
        tr = integrate(sp, PhaseState(*z0), 1e-4, int(period / 1e-4) + 2)
        worst = max(worst, hausdorff(orb.curve, tr.z[:, :2]))
    _note(record_property, f"{fid}: {worst:.1e}")
    assert worst < 1e-5


# 5 ------------------------------------------------------------------------

@crit(5, "determining-equation certification")
def test_c5_certification(record_property):
    res = {}
    for fid in CLASSICAL:
        res[fid] = certify_integrability(make_spec(fid, {}, classical=True), hbar=0.0).residual
    for fid in DEGENERATE:
        # p2^3 and H p2 are trivial integrals of a potential in x alone
        res[fid] = certify_integrability(make_spec(fid, {"hbar": 1.0}), hbar=1.0,
                                         exclude=("003", "021")).residual
    r1 = make_spec("rational-1", {"a": "i", "a0": 1.0, "hbar": 1.0})
    res["rational-1"] = certify_integrability(r1, hbar=1.0).residual
    neg = certify_integrability(custom_spec("x4y4", v1=lambda t: t ** 4, v2=lambda t: t ** 4),
                                hbar=0.0).residual
    worst = max(res, key=res.get)
    _note(record_property, f"max {res[worst]:.1e} ({worst}), control {neg:.1e}")
    assert max(res.values()) < 1e-6
    assert neg > 1e-3


# 6 ------------------------------------------------------------------------

@crit(6, "certified integrals conserved over 1e5 steps, no energy drift")
@pytest.mark.parametrize("fid,z0", [("aniso-9-1", (0.4, -0.3, 0.5, 0.2)),
                                    ("sqrt-sqrt", (0.5, 0.3, -0.4, 0.6)),
                                    ("abs-sqrt", (0.6, -0.4, 0.3, 0.5)),
                                    ("osc-quartic-root", (0.4, 0.2, 0.3, -0.5)),
                                    ("abs-cubic-root", (0.3, 0.5, 0.4, -0.2)),
                                    ("oscillator", (1.0, 0.2, 0.1, 0.8))])
def test_c6_conservation(fid, z0, record_property):
    sp = make_spec(fid, {}, classical=True)
    cert = certify_integrability(sp, hbar=0.0)
    X = cert.integral(chebyshev=False)
    tr = integrate(sp, PhaseState(*z0), 1e-4, 10 ** 5, watch={"X": X}, store_every=10)
    v = tr.conserved_log["X"]
    rel = np.max(np.abs(v - v[0])) / np.max(X.term_scale(*tr.z.T))
    drift = energy_drift(tr)
    _note(record_property, f"{fid}: {rel:.1e}")
    assert rel < 1e-6
    assert drift["consistent_with_zero"]


# 7 ------------------------------------------------------------------------

@crit(7, "degenerate potentials solve the cubic ODE for V")
@pytest.mark.parametrize("fid", DEGENERATE)
def test_c7_elliptic_ode(fid, record_property):
    fit = check_elliptic_ode(make_spec(fid, {"hbar": 1.0}), n=200)
    _note(record_property, f"{fid}: {fit['max_residual']:.1e}")
    assert fit["n"] == 200 and fit["max_residual"] < 1e-8


# 8 ------------------------------------------------------------------------

@crit(8, "special functions")
def test_c8_special_functions(record_property):
    rng = np.random.default_rng(8)
    x = rng.uniform(-20, 20, 1000)
    k = rng.uniform(0, 1, 1000)
    sn, cn, dn = sfn.jacobi_sn_cn_dn(x, k)
    ident = max(np.max(np.abs(sn ** 2 + cn ** 2 - 1)), np.max(np.abs(dn ** 2 + k ** 2 * sn ** 2 - 1)))
    t = np.linspace(-5, 5, 201)
    degen = 0.0
    for k0, k1 in [(0.0, 1.0), (1e-6, 1 - 1e-12)]:
        s0 = sfn.jacobi_sn_cn_dn(t, k0)
        s1 = sfn.jacobi_sn_cn_dn(t, k1)
        degen = max(degen, np.max(np.abs(s0[0] - np.sin(t))), np.max(np.abs(s0[1] - np.cos(t))),
                    np.max(np.abs(s0[2] - 1)), np.max(np.abs(s1[0] - np.tanh(t))),
                    np.max(np.abs(s1[1] - 1 / np.cosh(t))), np.max(np.abs(s1[2] - 1 / np.cosh(t))))
    wode = 0.0
    for g2, g3 in [(0.0, 1.0), (1.0, 0.0), (2.0, -1.0), (3.0, 1.0)]:
        w1 = sfn.EllipticParams(g2, g3).real_half_period()
        z = np.linspace(0.05 * w1, 1.95 * w1, 100)
        p, dp = sfn.weierstrass_p(z, g2, g3)
        wode = max(wode, np.max(np.abs(dp ** 2 - (4 * p ** 3 - g2 * p - g3)) / np.maximum(1.0, dp ** 2)))
    sols = [sfn.PainleveSolution.solve("P_I", interval=(-4, 4)),
            sfn.PainleveSolution.solve("P_I", w0=0.5, dw0=-0.2, interval=(-3, 2)),
            sfn.PainleveSolution.solve("P_II", a=0.5, w0=0.2, dw0=0.1, interval=(-4, 4)),
            sfn.PainleveSolution.solve("P_IV", x0=1.0, w0=-1.0, dw0=0.5, a=0.3, b=-0.5, interval=(0.5, 2.5))]
    pode = max(np.max(s.ode_residual(s.grid())) for s in sols)
    _note(record_property, f"identities {ident:.1e}, limits {degen:.1e}, P ODE {wode:.1e}, "
                           f"Painleve {pode:.1e}")
    assert ident < 1e-12 and degen < 1e-10 and wode < 1e-9 and pode < 1e-6


# 9 ------------------------------------------------------------------------

@crit(9, "double-root quartic branches, residual < 1e-10")
def test_c9_double_root(record_property):
    omega, b = 1.0, 1.0
    c, d = double_root_constants(omega, b)
    x = np.linspace(-2, 2, 100)
    worst = max(np.max(np.abs(quartic_residual(V, x, omega, c, d)))
                for V in quartic_closed_forms(x, omega, b))
    _note(record_property, f"{worst:.1e}")
    assert worst < 1e-10


# 10 -----------------------------------------------------------------------

@crit(10, "finite representations satisfy the cubic algebra")
@pytest.mark.parametrize("a,a0", [("i", 1.0), (1.0, None)])
def test_c10_commutation(a, a0, record_property):
    m, sf = build_rational1_model(a, 1.0, a0)
    res = solve_spectrum(sf, 10)
    worst = max(check_commutation(m, lv, sf) for lv in res.levels if lv.p <= 10)
    _note(record_property, f"a={a}: {worst:.1e} over {len(res.levels)} levels")
    assert worst < 1e-10
