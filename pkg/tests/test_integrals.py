import numpy as np
import pytest
from scipy.integrate import quad

from superint.dynamics import PhaseState, integrate
from superint.errors import IncompatibleAnsatz
from superint.integrals import (A_KEYS, ChebyshevG, ThirdOrderIntegral, ZeroG, angular_momentum, basis_A,
                                build_reducible_X, cartesian_second_order, certify_integrability,
                                compatibility, coordinate, determining_residuals, eval_X_classical,
                                extract_A, f_polys, hamiltonian, load_certificate, one_dimensional_integral,
                                poisson_bracket, reconstruct_g, runge_lenz, save_certificate)
from superint.potentials import custom_spec, elliptic_sigma, make_spec, sample_region

ZERO = custom_spec("zero", v1=lambda t: 0 * t, v2=lambda t: 0 * t)


def test_f_polys():
    assert f_polys(np.zeros(10), (0.3, 0.4)) == (0, 0, 0, 0)
    f = f_polys(basis_A("030"), (0.7, -1.2))
    assert f == pytest.approx((1, 0, 0, 0))
    f = f_polys(basis_A("300"), (1.0, 1.0))
    assert f == pytest.approx((-1, 3, -3, 1))


def test_leading_symbol_matches_L_expansion():
    # classical symbol of {L^i, p1^j p2^k} is 2 L^i p1^j p2^k
    rng = np.random.default_rng(0)
    x, y, p1, p2 = rng.normal(size=4)
    L = x * p2 - y * p1
    for key in A_KEYS:
        i, j, k = map(int, key)
        X = ThirdOrderIntegral(basis_A(key))
        assert X.classical(x, y, p1, p2) == pytest.approx(2 * L ** i * p1 ** j * p2 ** k, rel=1e-13)


def test_zero_integral_is_zero():
    X = ThirdOrderIntegral(np.zeros(10))
    assert eval_X_classical(X, PhaseState(0.3, -0.2, 1.0, 2.0)) == 0.0


def test_explicit_integral_hand_evaluation():
    sp = make_spec("degenerate-sin", {"hbar": 1.0, "omega": 1.0})
    X = one_dimensional_integral(sp)
    x, y, p1, p2 = 0.9, 0.4, 0.3, -0.7
    V = lambda t: 1 / np.sin(t) ** 2
    sig = elliptic_sigma(sp)
    xb = 0.5 * sum(sp.region()[:2])
    W = quad(V, xb, x, epsabs=1e-14, epsrel=1e-14)[0]
    L = x * p2 - y * p1
    hand = 2 * (L * p1 ** 2 + (sig - 3 * V(x)) * y * p1 + (-sig * x + 2 * x * V(x) + W) * p2)
    assert X.classical(x, y, p1, p2) == pytest.approx(hand, rel=1e-12)


def test_poisson_bracket_basics():
    sp = make_spec("kepler", {"alpha": 1.0}, classical=True)
    H = hamiltonian(sp)
    rng = np.random.default_rng(3)
    s = (0.7, -0.4, 0.2, 0.5)
    assert abs(poisson_bracket(H, H, s)) < 1e-10
    assert poisson_bracket(coordinate(0), coordinate(2), s) == 1.0
    states = np.column_stack([rng.uniform(0.5, 1.5, 100) * rng.choice([-1, 1], 100),
                              rng.uniform(-1, 1, 100), rng.normal(size=(100, 2))])
    vals = [poisson_bracket(angular_momentum, H, tuple(z)) for z in states]
    assert np.max(np.abs(vals)) < 1e-9


def test_bracket_antisymmetry_and_leibniz():
    sp = make_spec("aniso-9-1", {}, classical=True)
    H = hamiltonian(sp)
    F = lambda x, y, p1, p2: x * p1 ** 2 + np.sin(y) * p2
    G = lambda x, y, p1, p2: y * y * p1 - x * p2 ** 3
    FG = lambda *z: F(*z) * G(*z)
    s = (0.3, 0.8, -0.5, 0.9)
    assert poisson_bracket(F, G, s) == pytest.approx(-poisson_bracket(G, F, s), abs=1e-8)
    lhs = poisson_bracket(FG, H, s)
    rhs = F(*s) * poisson_bracket(G, H, s) + poisson_bracket(F, H, s) * G(*s)
    assert lhs == pytest.approx(rhs, abs=1e-8)


def test_reducible_bracket_trivial_case():
    sp = make_spec("linear-x", {}, classical=True)
    H = hamiltonian(sp)
    p2 = coordinate(3)
    X = build_reducible_X(p2, H)
    assert abs(X(0.3, 0.2, 0.5, -0.4)) < 1e-10


@pytest.mark.parametrize("fid,Y2", [("kepler", "lenz"), ("oscillator", "cartesian")])
def test_reducible_X_conserved(fid, Y2):
    sp = make_spec(fid, {}, classical=True)
    Y2 = runge_lenz(sp, 0) if Y2 == "lenz" else cartesian_second_order(sp)
    X = build_reducible_X(angular_momentum, Y2)
    s0 = PhaseState(1.0, 0.2, 0.1, 0.8)
    tr = integrate(sp, s0, 1e-4, 80000, store_every=100)
    vals = np.array([X(*z) for z in tr.z])
    assert np.max(np.abs(vals - vals[0])) / np.max(np.abs(vals)) < 1e-6
    # its cubic part is a third-order integral of the ansatz
    A = extract_A(X, sample_region(sp, 10, np.random.default_rng(0)))
    assert np.linalg.norm(A) > 0.1


def test_determining_residuals_zero_potential():
    rng = np.random.default_rng(4)
    X = ThirdOrderIntegral(rng.normal(size=10), ZeroG(), hbar=1.0)
    r = determining_residuals(ZERO, X, rng.uniform(-1, 1, (30, 2)))
    assert r["max"] == 0.0


def test_explicit_quantum_integral_residual():
    sp = make_spec("degenerate-cosh", {"hbar": 1.0, "omega": 1.0})
    X = one_dimensional_integral(sp)
    r = determining_residuals(sp, X, sample_region(sp, 200, np.random.default_rng(0)))
    assert r["max"] < 1e-8


def test_kepler_certificate_contains_reducible_integral():
    sp = make_spec("kepler", {}, classical=True)
    cert = certify_integrability(sp, hbar=0.0)
    assert cert.residual < 1e-8
    X = build_reducible_X(angular_momentum, runge_lenz(sp, 0))
    A = extract_A(X, sample_region(sp, 10, np.random.default_rng(0)))
    A /= np.linalg.norm(A)
    # A lies in the certified null space
    Q, _ = np.linalg.qr(cert.null_basis.T)
    assert np.linalg.norm(A - Q @ (Q.T @ A)) < 1e-6
    Xc = cert.integral(chebyshev=False)
    r = determining_residuals(sp, Xc, sample_region(sp, 50, np.random.default_rng(1)))
    assert r["max"] < 1e-8


def test_certification_quantum_and_negative_control():
    r1 = make_spec("rational-1", {"a": "i", "a0": 1.0, "hbar": 1.0})
    assert certify_integrability(r1, hbar=1.0).residual < 1e-6
    q = custom_spec("x4y4", v1=lambda t: t ** 4, v2=lambda t: t ** 4)
    assert certify_integrability(q, hbar=0.0).residual > 1e-3


def test_reconstruct_g():
    g1, g2, rep, _ = reconstruct_g(ZERO, basis_A("111"), (0, 0), (-1, 1, -1, 1), n=9)
    assert np.max(np.abs(g1)) == 0 and np.max(np.abs(g2)) == 0
    sp = make_spec("aniso-9-1", {}, classical=True)
    cert = certify_integrability(sp, hbar=0.0)
    _, _, rep, _ = reconstruct_g(sp, cert.A, cert.base, cert.region, n=21)
    assert rep["compatibility"] < 1e-6
    poly = custom_spec("poly", v=lambda x, y: 0.3 * x ** 3 * y + x * y ** 2 + 0.7 * y ** 4 - x ** 2)
    with pytest.raises(IncompatibleAnsatz):
        reconstruct_g(poly, np.random.default_rng(0).normal(size=10), (0, 0), (-1, 1, -1, 1))


def test_compatibility_linear_in_A():
    sp = make_spec("abs-cubic-root", {}, classical=True)
    pts = sample_region(sp, 20, np.random.default_rng(2))
    rng = np.random.default_rng(3)
    A1, A2 = rng.normal(size=10), rng.normal(size=10)
    c12 = compatibility(sp, 2 * A1 - A2, pts)
    assert np.allclose(c12, 2 * compatibility(sp, A1, pts) - compatibility(sp, A2, pts), atol=1e-9)


def test_certified_integral_conserved_with_phi_equal_2g():
    sp = make_spec("aniso-9-1", {}, classical=True)
    cert = certify_integrability(sp, hbar=0.0)
    X = cert.integral(chebyshev=False)
    tr = integrate(sp, PhaseState(0.4, -0.3, 0.5, 0.2), 1e-4, 70000, watch={"X": X}, store_every=50)
    v = tr.conserved_log["X"]
    scale = np.max(X.term_scale(*tr.z.T))
    assert np.max(np.abs(v - v[0])) / scale < 1e-6


def test_chebyshev_g_and_cache_roundtrip(tmp_path):
    sp = make_spec("osc-quartic-root", {}, classical=True)
    cert = certify_integrability(sp, hbar=0.0)
    exact = cert.g()
    cheb = ChebyshevG.fit(exact, cert.region, deg=32)
    pts = sample_region(sp, 30, np.random.default_rng(5))
    a, b = exact(pts[:, 0], pts[:, 1]), cheb(pts[:, 0], pts[:, 1])
    assert np.max(np.abs(np.array(a) - np.array(b))) < 1e-10
    rec = save_certificate(cert, tmp_path / "cert.json")
    assert rec["potential_id"] == "osc-quartic-root"
    rec2, X = load_certificate(tmp_path / "cert.json")
    assert rec2 == rec
    assert np.allclose(X.g(pts[:, 0], pts[:, 1]), b, atol=1e-14)


def test_kink_family_integral_is_local_to_one_patch():
    # V = sqrt|x| + |y|: on x, y > 0 the integral is p1^3 + 3 V1 p1 - 3/2 p2
    sp = make_spec("abs-sqrt", {}, classical=True)
    cert = certify_integrability(sp, hbar=0.0)
    X = cert.integral(chebyshev=False)
    x = np.array([0.1, 0.7, 1.9])
    g1, g2 = X.g(x, 0 * x + 0.8)
    s = cert.A[A_KEYS.index("030")]
    assert np.allclose(np.array(g1) / s, 3 * np.sqrt(x)) and np.allclose(np.array(g2) / s, -1.5)
    # across y = 0 the force flips sign, so the same expression stops being conserved
    tr = integrate(sp, PhaseState(0.6, 0.3, 0.2, -0.8), 1e-4, 8000, watch={"X": X})
    v, y = tr.conserved_log["X"], tr.z[:, 1]
    first = np.argmax(y < 0)
    assert 0 < first
    assert np.ptp(v[:first]) < 1e-6 * np.max(X.term_scale(*tr.z[:first].T))
    assert np.ptp(v) > 1e-2
