import numpy as np
import pytest
import scipy.special as ss

from superint.errors import NotCached, PoleCrossed, PoleProximity, DomainViolation
from superint.special_functions import (EllipticParams, PainleveSolution, ellipk, jacobi_sn_cn_dn,
                                        landen_sn, painleve_eval, weierstrass_p)


def test_identities_random():
    rng = np.random.default_rng(0)
    x = rng.uniform(-20, 20, 1000)
    k = rng.uniform(0, 1, 1000)
    sn, cn, dn = jacobi_sn_cn_dn(x, k)
    assert np.max(np.abs(sn ** 2 + cn ** 2 - 1)) < 1e-12
    assert np.max(np.abs(dn ** 2 + k ** 2 * sn ** 2 - 1)) < 1e-12


def test_against_scipy():
    rng = np.random.default_rng(1)
    x = rng.uniform(-10, 10, 300)
    k = rng.uniform(0, 1, 300)
    sn, cn, dn = jacobi_sn_cn_dn(x, k)
    s2, c2, d2, _ = ss.ellipj(x, k ** 2)
    assert np.allclose(sn, s2, atol=1e-12)
    assert np.allclose(cn, c2, atol=1e-12)
    assert np.allclose(dn, d2, atol=1e-12)


def test_degenerations():
    assert np.allclose(jacobi_sn_cn_dn(0.0, 0.4), (0, 1, 1))
    sn, cn, dn = jacobi_sn_cn_dn(1.0, 0.0)
    assert (sn, cn, dn) == pytest.approx((np.sin(1), np.cos(1), 1.0), abs=1e-15)
    sn, cn, dn = jacobi_sn_cn_dn(1.0, 1.0)
    assert (sn, cn, dn) == pytest.approx((np.tanh(1), 1 / np.cosh(1), 1 / np.cosh(1)), abs=1e-15)


def test_landen_consistency():
    x = np.linspace(-6, 6, 201)
    for k in (0.1, 0.7, 0.99):
        assert np.max(np.abs(landen_sn(x, k) - jacobi_sn_cn_dn(x, k)[0])) < 1e-11


def test_modulus_out_of_range():
    with pytest.raises(ValueError):
        jacobi_sn_cn_dn(0.3, 1.2)


def test_quarter_period():
    assert ellipk(0.6) == pytest.approx(ss.ellipk(0.36), rel=1e-14)


@pytest.mark.parametrize("g2,g3", [(0.0, 1.0), (1.0, 0.0), (2.0, -1.0), (3.0, 1.0)])
def test_weierstrass_ode(g2, g3):
    w1 = EllipticParams(g2, g3).real_half_period()
    x = np.linspace(0.05 * w1, 1.95 * w1, 50)
    p, dp = weierstrass_p(x, g2, g3)
    res = np.abs(dp ** 2 - (4 * p ** 3 - g2 * p - g3)) / np.maximum(1.0, dp ** 2)
    assert np.max(res) < 1e-9


def test_weierstrass_laurent_and_positivity():
    p, _ = weierstrass_p(1e-2, 0.0, 1.0, guard=1e-4)
    assert abs(p * 1e-4 - 1) < 1e-4
    lat = EllipticParams(1.0, 0.0)
    w1 = lat.real_half_period()
    p, _ = weierstrass_p(np.linspace(0.05, 0.95, 40) * 2 * w1, 1.0, 0.0)
    assert np.all(p > 0)
    assert lat.discriminant == 1.0


def test_weierstrass_pole_guard():
    w1 = EllipticParams(0.0, 1.0).real_half_period()
    with pytest.raises(PoleProximity):
        weierstrass_p(2 * w1 + 1e-6, 0.0, 1.0)


def test_painleve_trivial_solutions():
    sol = PainleveSolution.solve("P_II", a=0.0, interval=(-5, 5))
    w, dw = sol(np.linspace(-5, 5, 21))
    assert np.max(np.abs(w)) == 0.0 and np.max(np.abs(dw)) == 0.0
    sol = PainleveSolution.solve("P_I", interval=(-1, 1))
    assert np.allclose(painleve_eval(sol, 0.0), (0.0, 0.0), atol=1e-15)


def test_painleve4_rational_solution():
    # w = -2x solves P_IV with a = 0, b = -2
    sol = PainleveSolution.solve("P_IV", x0=1.0, w0=-2.0, dw0=-2.0, a=0.0, b=-2.0, interval=(0.5, 3.0))
    x = np.linspace(0.5, 3.0, 60)
    assert np.max(np.abs(sol(x)[0] + 2 * x)) < 1e-9
    assert np.max(sol.ode_residual(x)) < 1e-6


def test_painleve_pole_recorded_and_residual():
    sol = PainleveSolution.solve("P_I", interval=(-4, 4))
    assert len(sol.poles) == 1 and 2.5 < sol.poles[0] < 2.7
    assert np.max(sol.ode_residual(sol.grid())) < 1e-6
    with pytest.raises(PoleCrossed):
        sol(3.5)
    with pytest.raises(NotCached):
        sol(-5.0)


def test_painleve4_rejects_zero_start():
    with pytest.raises(DomainViolation):
        PainleveSolution.solve("P_IV", w0=0.0)
