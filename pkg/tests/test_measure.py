import math
import random
from fractions import Fraction

import mpmath
from hypothesis import given, strategies as st

from sdioph.measure import (brute_force_sublevel, good_certify, lifted_count_sublevel,
                            measure_mc, product_good_check, sample_point, sublevel_measure_exact,
                            sup_norm, wilson_interval)
from sdioph.padic import PAdicBall, norm_p, unit_ball
from sdioph.poly import Poly

X = Poly.var(1, 0)


def test_sublevel_examples():
    assert sublevel_measure_exact(X, unit_ball(3), 2).value == Fraction(1, 27)
    for k in range(1, 4):
        exact = sublevel_measure_exact(X ** 2, unit_ball(3), 2 * k).value
        assert exact == Fraction(1, 3 ** (k + 1))
        assert brute_force_sublevel(X ** 2, unit_ball(3), 2 * k, 2 * k + 2) == exact
    assert sublevel_measure_exact(Poly.const(1, 2), unit_ball(7), 0).value == 0
    assert sublevel_measure_exact(Poly.const(1, 7), unit_ball(7), 0).value == 1


int_coeff = st.integers(-30, 30)


@st.composite
def small_polys(draw, d):
    deg = draw(st.integers(0, 4))
    if d == 1:
        return Poly.univariate(draw(st.lists(int_coeff, min_size=deg + 1, max_size=deg + 1)))
    table = {}
    for _ in range(draw(st.integers(1, 5))):
        i = draw(st.integers(0, deg))
        j = draw(st.integers(0, deg - i))
        table[(i, j)] = draw(int_coeff)
    return Poly(2, table)


@given(st.data(), st.sampled_from([3, 5]), st.integers(0, 3))
def test_exact_matches_residue_enumeration(data, p, M):
    f = data.draw(small_polys(1))
    ball = PAdicBall(p, (data.draw(st.integers(0, p - 1)),), data.draw(st.integers(0, 1)))
    exact = sublevel_measure_exact(f, ball, M)
    if exact.resolved:
        assert exact.value == brute_force_sublevel(f, ball, M, M + 2) \
            == lifted_count_sublevel(f, ball, M)
    else:
        assert exact.lower <= brute_force_sublevel(f, ball, M, M + 2) <= exact.upper


@given(st.data(), st.integers(0, 2))
def test_exact_matches_enumeration_two_variables(data, M):
    f = data.draw(small_polys(2))
    ball = unit_ball(3, 2)
    exact = sublevel_measure_exact(f, ball, M)
    oracle = brute_force_sublevel(f, ball, M, M + 1)
    assert exact.lower <= oracle <= exact.upper


@given(st.data(), st.sampled_from([3, 5]), st.integers(0, 4))
def test_monotone_in_eps(data, p, M):
    f = data.draw(small_polys(1))
    a = sublevel_measure_exact(f, unit_ball(p), M + 1)
    b = sublevel_measure_exact(f, unit_ball(p), M)
    assert a.lower <= b.upper


@given(st.data(), st.sampled_from([3, 5]), st.integers(0, 4))
def test_additive_over_children(data, p, M):
    f = data.draw(small_polys(1))
    whole = sublevel_measure_exact(f, unit_ball(p), M)
    parts = [sublevel_measure_exact(f, c, M) for c in unit_ball(p).children()]
    assert sum(x.lower for x in parts) <= whole.upper
    assert whole.lower <= sum(x.upper for x in parts)
    if whole.resolved and all(x.resolved for x in parts):
        assert whole.value == sum(x.value for x in parts)


def test_depth_cap_brackets():
    b = sublevel_measure_exact(X ** 2, unit_ball(3), 30, depth_cap=4)
    assert not b.resolved and b.lower <= Fraction(1, 3 ** 16) <= b.upper


def test_sup_norm():
    assert sup_norm(X * 3, unit_ball(3)).upper == Fraction(1, 3)
    s = sup_norm(X * (X - 1), PAdicBall(5, (0,), 1))
    assert s.resolved and s.upper == Fraction(1, 5)


def _C(k):
    with mpmath.workdps(50):
        return mpmath.power(k, 3 - mpmath.mpf(1) / k)


def test_good_examples():
    for k in (1, 2, 3):
        rep = good_certify(X ** k, unit_ball(5), _C(k), Fraction(1, k), range(1, 11))
        assert rep.verdict == "pass", rep.violations
    rep = good_certify(Poly.const(1, 3), unit_ball(5), 1, Fraction(1, 2), range(1, 6))
    assert rep.verdict == "pass"
    with mpmath.workdps(50):
        C = 2 * mpmath.power(2, mpmath.mpf(5) / 2)
    rep = good_certify(X * (X - 1), unit_ball(5), C, Fraction(1, 2), range(1, 9))
    assert rep.verdict == "pass"


def test_good_detects_violation():
    rep = good_certify(X ** 2, unit_ball(3), Fraction(1, 100), Fraction(1), range(1, 4))
    assert rep.verdict == "violation"


def test_product_examples():
    xy = Poly(2, {(1, 1): 1})
    rep = product_good_check(xy, unit_ball(3, 2), 1, 1, range(1, 5))
    assert rep.verdict == "pass"
    one = product_good_check(X ** 2, unit_ball(3), 2, Fraction(1, 2), range(1, 5))
    assert one.slice_reports == [] and one.verdict == "pass"
    x_only = Poly(2, {(1, 0): 1})
    assert product_good_check(x_only, unit_ball(3, 2), 1, 1, range(1, 5)).verdict == "pass"


@given(st.data(), st.sampled_from([3, 5]), st.integers(0, 3), st.sampled_from([1, 2]))
def test_good_scaling_invariance(data, p, e, u):
    # G1: with lam = u p^e, {|lam f| < p^-(M+e)} = {|f| < p^-M} and sup scales by |lam|
    f = data.draw(small_polys(1))
    lam = u * p ** e
    a = good_certify(f, unit_ball(p), 4, Fraction(1, 4), range(1, 5), ball_depth=0)
    b = good_certify(f * lam, unit_ball(p), 4, Fraction(1, 4), range(1 + e, 5 + e), ball_depth=0)
    assert [c.verdict for c in a.checks] == [c.verdict for c in b.checks]


@given(st.data(), st.sampled_from([3, 5]))
def test_good_max_of_certified(data, p):
    # G2 on monomials: |max(|x^j|, |x^k|)| = |x^min(j,k)|, certified with the same constants
    j, k = data.draw(st.integers(1, 3)), data.draw(st.integers(1, 3))
    C, alpha = _C(3), Fraction(1, 3)
    for g in (X ** j, X ** k, X ** min(j, k)):
        assert good_certify(g, unit_ball(p), C, alpha, range(1, 7)).verdict == "pass"


def test_mc_examples():
    est = measure_mc(lambda x: True, unit_ball(3), 200, seed=1)
    assert est.estimate == 1.0
    est = measure_mc(lambda x: norm_p(x, 3) <= Fraction(1, 3) if x else True,
                     unit_ball(3), 10_000, seed=2)
    assert abs(est.estimate - 1 / 3) <= 3 * est.sigma
    again = measure_mc(lambda x: norm_p(x, 3) <= Fraction(1, 3) if x else True,
                       unit_ball(3), 10_000, seed=2)
    assert again == est


def test_sampling_is_counter_based():
    b = PAdicBall(5, (1, 2), 1)
    pts = [sample_point(b, 9, i, 10) for i in range(20)]
    assert pts[7] == sample_point(b, 9, 7, 10)
    assert all(b.contains(x) for x in pts)


def test_mc_binomial_rate():
    # |{x in Z_3 : x = 0 mod 9}| = 1/9: error shrinks like n^-1/2
    pred = lambda x: x % 9 == 0
    for n in (900, 3600, 14400):
        est = measure_mc(pred, unit_ball(3), n, seed=5)
        assert abs(est.estimate - 1 / 9) <= 3 * math.sqrt((1 / 9) * (8 / 9) / n)
    lo, hi = wilson_interval(30, 100)
    assert lo < 0.3 < hi
