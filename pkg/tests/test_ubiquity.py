from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import assume, given, settings, strategies as st

from sdioph.approx import phi_membership
from sdioph.maps import veronese
from sdioph.measure import sample_point
from sdioph.padic import PAdicBall, PAdicNumber
from sdioph.poly import Poly
from sdioph.ubiquity import (PipelineFailure, UbiquityConfig, check_strong_approx,
                             delta_neighborhood, hensel_gain_ok, hensel_root,
                             resonant_construct, strong_approx)

THETA = Poly(1, {(3,): 3, (1,): 9})


def sym_v(q, p):
    q = sp.Rational(q)
    if q == 0:
        return sp.oo
    return sp.multiplicity(p, q.p) - sp.multiplicity(p, q.q)


# -- strong approximation -------------------------------------------------

def test_strong_approx_example():
    r = strong_approx(0, 5, Fraction(27, 2), Fraction(1, 9), 3)
    assert r == 5
    assert all(check_strong_approx(r, 0, 5, Fraction(27, 2), Fraction(1, 9), 3).values())


def test_strong_approx_rejects_narrow_window():
    with pytest.raises(ValueError):
        strong_approx(0, 5, 13, Fraction(1, 9), 3)
    with pytest.raises(ValueError):
        strong_approx(0, 5, 100, Fraction(1, 10), 3)


def test_strong_approx_accepts_padic_input():
    xi = PAdicNumber.from_rational(Fraction(7, 4), 3, 10)
    r = strong_approx(Fraction(1, 3), xi, 14, Fraction(1, 9), 3)
    assert all(check_strong_approx(r, Fraction(1, 3), Fraction(7, 4), 14, Fraction(1, 9), 3).values())


@settings(max_examples=200)
@given(st.sampled_from([2, 3, 5, 7]), st.fractions(-1000, 1000, max_denominator=50),
       st.integers(-500, 500), st.integers(1, 40), st.integers(-3, 6),
       st.fractions(1, 5), st.booleans())
def test_strong_approx_property(p, xi_inf, num, den, e, widen, strict):
    xi_p = Fraction(num, den)
    eps_p = Fraction(p) ** -e
    eps_inf = Fraction(p, 2) / eps_p * widen
    if strict:
        eps_inf += Fraction(1, 1000)
    r = strong_approx(xi_inf, xi_p, eps_inf, eps_p, p, strict=strict)
    checks = check_strong_approx(r, xi_inf, xi_p, eps_inf, eps_p, p, strict=strict)
    assert all(checks.values()), checks
    # independent recheck with sympy rationals
    d = sp.Rational(r.numerator, r.denominator)
    assert abs(d - sp.Rational(xi_inf.numerator, xi_inf.denominator)) <= \
        sp.Rational(eps_inf.numerator, eps_inf.denominator)
    assert sym_v(d - sp.Rational(num, den), p) >= e
    assert all(q == p for q in sp.factorint(d.q))


# -- Hensel lifting -------------------------------------------------------

@given(st.sampled_from([2, 3, 5, 7]), st.integers(1, 30), st.integers(1, 10 ** 6))
def test_hensel_linear(p, k, u):
    c = p ** k * u
    res = hensel_root([-c, 1], p, 40)
    assert res.root == c % p ** 40
    assert hensel_gain_ok(res)


def test_hensel_quadratic_example():
    res = hensel_root(Poly.univariate([5, 1, 1]), 5, 40)
    M = 5 ** 40
    assert (res.root ** 2 + res.root + 5) % M == 0
    assert res.root % 5 == 0
    assert hensel_gain_ok(res)
    # the root is unique in 5Z_5: sympy's modular root list agrees
    roots = [r for r in sp.polys.galoistools.gf_csolve([1, 1, 5], 5 ** 6) if r % 5 == 0]
    assert roots == [res.root % 5 ** 6]


def test_hensel_condition_checked():
    with pytest.raises(ValueError):
        hensel_root([1, 1], 3)             # g(0) is a unit
    with pytest.raises(ValueError):
        hensel_root([9, 3], 3)             # |g(0)| = |g'(0)|^2
    with pytest.raises(ValueError):
        hensel_root([Fraction(1, 3) * 9, Fraction(1, 3), 1], 3)


@settings(max_examples=100)
@given(st.sampled_from([2, 3, 5]), st.integers(0, 2), st.integers(1, 50),
       st.lists(st.integers(-50, 50), min_size=1, max_size=3), st.integers(1, 4))
def test_hensel_property(p, s, u, higher, extra):
    assume(u % p)
    g0 = p ** (2 * s + extra) * u
    g1 = p ** s * u
    coeffs = [g0, g1] + higher
    res = hensel_root(coeffs, p, 30)
    M = p ** 30
    assert sum(c * res.root ** i for i, c in enumerate(coeffs)) % M == 0
    assert hensel_gain_ok(res)
    assert sym_v(res.root, p) >= s + extra if res.root else True


# -- resonant construction ------------------------------------------------

def setup(Q=16):
    p = 3
    ball = PAdicBall(p, (1,), 1)
    f = veronese(2, p, ball)
    cfg = UbiquityConfig(p, 2, Q, Fraction(1, 2), ball=ball)
    return p, ball, f, cfg


def first_outside(f, cfg, ball, start=0):
    for i in range(start, start + 200):
        x = sample_point(ball, 3, i, 30)
        if not phi_membership(x, cfg.Q, cfg.delta, f).member:
            return x
    raise AssertionError("no sample outside Phi")


@pytest.mark.parametrize("Q,start", [(4, 0), (16, 0), (64, 5), (256, 11)])
def test_resonant_certificates_recomputed(Q, start):
    p, ball, f, cfg = setup(Q)
    x = first_outside(f, cfg, ball, start)
    c = resonant_construct(x, cfg, f, THETA)
    assert c.ok, c.certificates
    X = sp.Symbol("X")
    a0, a1, a2 = [sp.Integer(v) for v in c.coefficients]
    G = a0 + a1 * X + a2 * X ** 2 + 3 * X ** 3 + 9 * X
    x0 = sp.Integer(x[0])
    n, delta, Qc = 2, sp.Rational(1, 2), sp.Rational(c.Q)
    assert sym_v(G.subs(X, x0), p) >= sym_v(delta / Qc ** (n + 1), p) or G.subs(X, x0) == 0
    assert sym_v(sp.diff(G, X).subs(X, x0), p) == 0
    height = max(abs(a0), abs(a1), abs(a2))
    assert height == c.height and height > p * Qc
    # the Hensel root is a zero of G near x to the working precision
    z = x0 + c.root.root
    assert G.subs(X, z) % sp.Integer(p) ** c.root.N == 0
    rho = sp.Rational(cfg.kappa1) / Qc ** (n + 1)
    assert sp.Integer(p) ** (-min(sym_v(c.root.root, p), c.root.N)) <= rho
    assert delta_neighborhood(x, [(x, c.root)], cfg.rho(c.Q), p) == "member"


def test_precondition_rejected_for_phi_member():
    p, ball, f, cfg = setup(16)
    with pytest.raises(PipelineFailure) as exc:
        resonant_construct((1,), cfg, f, THETA)
    assert exc.value.stage == "precondition"


def test_construction_needs_identity_first_coordinate():
    p = 3
    ball = PAdicBall(p, (1,), 1)
    from sdioph.maps import polynomial_map
    f = polynomial_map(p, [{(2,): 1}, {(3,): 1}], 1, ball)
    cfg = UbiquityConfig(p, 2, 16, Fraction(1, 2), ball=ball)
    for i in range(200):
        x = sample_point(ball, 0, i, 30)
        if not phi_membership(x, cfg.Q, cfg.delta, f).member:
            break
    with pytest.raises(PipelineFailure):
        resonant_construct(x, cfg, f, THETA)


def test_config_validation():
    with pytest.raises(ValueError):
        UbiquityConfig(3, 2, 1, Fraction(1, 2))
    with pytest.raises(ValueError):
        UbiquityConfig(3, 2, 4, 1)
    with pytest.raises(ValueError):
        UbiquityConfig(3, 2, 4, Fraction(1, 2), m=2)


def test_delta_neighborhood_examples():
    assert delta_neighborhood((1,), [(10,)], Fraction(1, 9), 3) == "not certified"
    assert delta_neighborhood((1,), [(10,)], Fraction(1, 3), 3) == "member"
    assert delta_neighborhood((1,), [], 1, 3) == "not certified"
    # an exact zero at the point itself, known to 3^-5
    res = hensel_root([0, 1], 3, 5)
    assert delta_neighborhood((4,), [((4,), res)], Fraction(1, 3 ** 4), 3) == "member"
    assert delta_neighborhood((4,), [((4,), res)], Fraction(1, 3 ** 5), 3) == "not certified"


@given(st.integers(0, 20), st.integers(1, 4), st.sampled_from([2, 3, 5]))
def test_rho_ratio(t, n, p):
    cfg = UbiquityConfig(p, n, 2, Fraction(1, 3))
    assert cfg.rho(2 ** (t + 1)) / cfg.rho(2 ** t) == cfg.rho_ratio()
