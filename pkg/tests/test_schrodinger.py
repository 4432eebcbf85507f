import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from superint.cubic_algebra import closed_form_levels
from superint.errors import NotConverged, NotSeparable, StencilBoundary, ValidationError
from superint.integrals import FunctionG, ThirdOrderIntegral, ZeroG, basis_A, certify_integrability
from superint.potentials import custom_spec, make_spec
from superint.schrodinger import (Grid1D, Grid2D, bump, compare_levels, convergence_ratios,
                                  grid_commutator_residual, solve_1d, spectrum_2d_separable,
                                  write_spectrum_csv)


def test_harmonic_oscillator():
    r = solve_1d(lambda x: 0.5 * x * x, Grid1D(12.0, 2000), 10)
    assert np.max(np.abs(r.richardson_estimate - (np.arange(10) + 0.5))) < 1e-6
    U = r.eigenvectors
    assert np.max(np.abs(U.T @ U * r.grid.h - np.eye(10))) < 1e-10


def test_box():
    r = solve_1d(lambda x: 0 * x, Grid1D(12.0, 2000), 10)
    exact = (np.arange(1, 11) * np.pi / 24) ** 2 / 2
    assert np.max(np.abs(r.richardson_estimate - exact)) < 1e-6


def test_hbar_scaling():
    r = solve_1d(lambda x: 0.5 * x * x, Grid1D(12.0, 1000), 3, hbar=0.5)
    assert r.richardson_estimate == pytest.approx(0.5 * (np.arange(3) + 0.5), abs=1e-6)


def _shoot_levels(V, n):
    # psi ~ x^2 at the left wall; parity at the midpoint selects the level
    def end(E, k, eps=1e-3):
        s = solve_ivp(lambda x, z: [z[1], 2 * (V(x) - E) * z[0]], (eps, np.pi / 2),
                      [eps ** 2, 2 * eps], rtol=1e-12, atol=1e-14)
        return s.y[k, -1]
    out = []
    for m in range(n):
        guess = (m + 2) ** 2 / 2
        out.append(brentq(lambda E: end(E, 1 - m % 2), guess - 0.4, guess + 0.4, xtol=1e-13))
    return np.array(out)


def test_inverse_sine_square_well_against_shooting():
    V = lambda x: 1 / np.sin(x) ** 2
    r = solve_1d(V, Grid1D(np.pi / 2, 2000, np.pi / 2), 3)
    ref = _shoot_levels(V, 3)
    assert np.max(np.abs(r.richardson_estimate - ref)) < 1e-6
    assert ref == pytest.approx([2.0, 4.5, 8.0], abs=1e-10)


def test_second_order_convergence():
    rat = convergence_ratios(lambda x: 0.5 * x * x, Grid1D(12.0, 500), 6)
    assert np.all((rat > 3.3) & (rat < 4.7))


def test_not_converged_and_validation():
    with pytest.raises(NotConverged):
        solve_1d(lambda x: 0.5 * x * x, Grid1D(12.0, 64), 20, tol=1e-8)
    with pytest.raises(ValidationError):
        Grid1D(12.0, 10)


def test_anisotropic_2d_levels(tmp_path):
    sp = make_spec("aniso-9-1", {"omega": 1.0})
    lv = spectrum_2d_separable(sp, 10.0, L=10, N=1500)
    exact = sorted(3 * (i + 0.5) + (j + 0.5) for i in range(5) for j in range(12)
                   if 3 * (i + 0.5) + (j + 0.5) < 10)
    assert np.max(np.abs(np.array([l.E for l in lv]) - exact)) < 1e-6
    write_spectrum_csv(lv, tmp_path / "s.csv")
    assert open(tmp_path / "s.csv").readline().strip() == "E,n_x,n_y,richardson_error"
    with pytest.raises(NotSeparable):
        spectrum_2d_separable(make_spec("v3"), 5.0)


def test_rational_imaginary_length_levels_present():
    sp = make_spec("rational-1", {"a": "i", "a0": 1.0, "hbar": 1.0})
    lv = spectrum_2d_separable(sp, 8.0)
    rep = compare_levels(lv, closed_form_levels(-1.0, 1.0, 20), cutoff=8.0)
    assert rep["all_matched"] and rep["max_rel_error"] < 1e-6
    # the numerical spectrum also holds levels below the algebraic ladder
    assert min(rep["extras"]) == pytest.approx(-0.5, abs=1e-6)


@pytest.mark.xfail(strict=True, reason="no pole-free realization reproduces the real-length ladder")
def test_rational_real_length_levels_present():
    sp = make_spec("rational-1", {"a": 1.0, "hbar": 1.0})
    lv = spectrum_2d_separable(sp, 12.0)
    assert compare_levels(lv, closed_form_levels(1.0, 1.0, 20), cutoff=12.0)["all_matched"]


def test_compare_levels_merges_degenerate_copies():
    rep = compare_levels([1.0, 1.0 + 1e-12, 2.0, 3.0], [1.0, 2.0])
    assert rep["all_matched"] and rep["extras"] == [3.0]


# ---------------------------------------------------------------- commutator

GRID = Grid2D((-2.0, -2.0), (2.0, 2.0), 81)
TF = [bump((0.3, -0.2), 0.9), bump((-0.5, 0.4), 0.8)]


def test_commutator_free_momentum_cube():
    sp = custom_spec("zero", v=lambda x, y: 0 * x, classical=False)
    X = ThirdOrderIntegral(basis_A("030"), hbar=1.0)
    r = grid_commutator_residual(sp, X, Grid2D((-1.5, -1.5), (1.5, 1.5), 61),
                                 [bump((0.1, -0.2), 0.6)], hbar=1.0, levels=2)
    assert r["final"] < 1e-10


@pytest.fixture(scope="module")
def rational_X():
    sp = make_spec("rational-1", {"a": "i", "a0": 1.0, "hbar": 1.0})
    X = certify_integrability(sp).integral(chebyshev=True, region=(-2.5, 2.5, -2.5, 2.5))
    X.hbar = 1.0
    return sp, X


def test_commutator_converges_for_certified_integral(rational_X):
    sp, X = rational_X
    r = grid_commutator_residual(sp, X, GRID, TF)
    assert r["order"] > 2 and r["final"] < 1e-5


def test_commutator_stalls_without_g(rational_X):
    sp, X = rational_X
    r = grid_commutator_residual(sp, ThirdOrderIntegral(X.A, ZeroG(), hbar=1.0), GRID, TF)
    assert r["order"] < 1.5 and r["final"] > 1e-4
    g0 = X.g
    bad = FunctionG(lambda x, y: 1.1 * g0(x, y)[0], lambda x, y: g0(x, y)[1])
    r = grid_commutator_residual(sp, ThirdOrderIntegral(X.A, bad, hbar=1.0), GRID, TF)
    good = grid_commutator_residual(sp, X, GRID, TF)
    # a 10% error in g1 leaves a plateau well above the certified residual
    assert r["final"] > 3 * good["final"] and r["orders"][-1] < good["orders"][-1]


def test_stencil_boundary():
    sp = custom_spec("zero", v=lambda x, y: 0 * x, classical=False)
    X = ThirdOrderIntegral(basis_A("030"), hbar=1.0)
    with pytest.raises(StencilBoundary):
        grid_commutator_residual(sp, X, GRID, [bump((1.5, 0.0), 0.45)], hbar=1.0)
