import csv

import numpy as np
import pytest

from superint.dynamics import PhaseState, find_closure, integrate
from superint.errors import ClassicallyForbidden, NotSeparable, SeedNotOnOrbit
from superint.integrals import certify_integrability
from superint.potentials import custom_spec, make_spec
from superint.trajectory_algebraic import (allowed_box, hausdorff, implicit_residual, momenta_from_energies,
                                           separated_energies, trace_orbit)

FREE = custom_spec("free", v1=lambda t: 0 * t, v2=lambda t: 0 * t)


def test_momenta_free_and_turning_point():
    assert momenta_from_energies(FREE, 0.3, -0.4, 0.5, 0.5) == pytest.approx((1.0, 1.0))
    assert momenta_from_energies(FREE, 0.3, -0.4, 0.5, 0.5, (-1, 1)) == pytest.approx((-1.0, 1.0))
    osc = make_spec("oscillator", {"alpha": 0.5}, classical=True)
    p1, p2 = momenta_from_energies(osc, 1.0, 0.0, 0.5, 0.5)
    assert p1 == 0.0 and p2 == pytest.approx(1.0)


def test_forbidden_region():
    osc = make_spec("oscillator", {"alpha": 0.5}, classical=True)
    with pytest.raises(ClassicallyForbidden):
        momenta_from_energies(osc, 1.5, 0.0, 0.5, 0.5)


def test_not_separable():
    with pytest.raises(NotSeparable):
        momenta_from_energies(make_spec("v3", {}, classical=True), 0.1, 0.1, 1, 1)


@pytest.fixture(scope="module")
def aniso():
    sp = make_spec("aniso-9-1", {}, classical=True)
    cert = certify_integrability(sp, hbar=0.0)
    z0 = np.array([0.3, -0.5, 0.2, 0.4])
    E1, E2 = separated_energies(sp, *z0)
    X = cert.integral(chebyshev=True, region=allowed_box(sp, E1, E2))
    return sp, X, z0, float(E1), float(E2), float(X.classical(*z0))


def test_residual_shifts_with_K(aniso):
    sp, X, z0, E1, E2, K = aniso
    sg = tuple(np.sign(z0[2:]).astype(int))
    r0 = implicit_residual(sp, X, z0[0], z0[1], E1, E2, K, sg)
    r1 = implicit_residual(sp, X, z0[0], z0[1], E1, E2, K + 0.01, sg)
    assert abs(r0) < 1e-12
    assert r1 - r0 == pytest.approx(-0.01, abs=1e-12)


def test_residual_vanishes_along_integrated_trajectory(aniso):
    sp, X, z0, E1, E2, K = aniso
    tr = integrate(sp, PhaseState(*z0), 1e-4, 30000, store_every=300)
    scale = max(abs(K), np.max(X.term_scale(*tr.z.T)))
    res = [implicit_residual(sp, X, x, y, E1, E2, K, (np.sign(p1) or 1, np.sign(p2) or 1))
           for x, y, p1, p2 in tr.z]
    assert np.max(np.abs(res)) / scale < 1e-6


def test_orbit_matches_integrated_trajectory(aniso, tmp_path):
    sp, X, z0, E1, E2, K = aniso
    orb = trace_orbit(sp, X, E1, E2, K, z0[:2])
    assert orb.closed
    assert np.max(np.abs(orb.residual)) < 1e-8 * max(1.0, abs(K))
    tr = integrate(sp, PhaseState(*z0), 1e-4, int(2 * np.pi / 1e-4) + 2)
    assert hausdorff(orb.curve, tr.z[:, :2]) < 1e-5
    orb.to_csv(tmp_path / "o.csv")
    rows = list(csv.reader(open(tmp_path / "o.csv")))
    assert rows[0] == ["x", "y", "branch_p1", "branch_p2", "residual"]
    assert len(rows) == len(orb.curve) + 1


def test_oscillator_orbit():
    sp = make_spec("oscillator", {}, classical=True)
    cert = certify_integrability(sp, hbar=0.0)
    z0 = np.array([0.5, 0.1, -0.2, 0.6])
    E1, E2 = separated_energies(sp, *z0)
    X = cert.integral(chebyshev=True, region=allowed_box(sp, E1, E2))
    K = float(X.classical(*z0))
    orb = trace_orbit(sp, X, float(E1), float(E2), K, z0[:2])
    r = find_closure(sp, [PhaseState(*z0)], 1e-4, 200000)[0]
    tr = integrate(sp, PhaseState(*z0), 1e-4, int(r["period"] / 1e-4) + 2)
    assert hausdorff(orb.curve, tr.z[:, :2]) < 1e-5


def test_seed_off_orbit(aniso):
    sp, X, z0, E1, E2, K = aniso
    with pytest.raises(SeedNotOnOrbit):
        trace_orbit(sp, X, E1, E2, K + 0.1 * max(1.0, abs(K)), z0[:2])


def test_hausdorff_basics():
    t = np.linspace(0, 2 * np.pi, 400)
    P = np.column_stack([np.cos(t), np.sin(t)])
    assert hausdorff(P, P) == 0.0
    assert hausdorff(P, 1.01 * P) == pytest.approx(0.01 / (2.02 * np.sqrt(2)), rel=1e-3)
