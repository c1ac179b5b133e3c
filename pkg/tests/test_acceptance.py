"""Acceptance criteria 1-10.  Each test prints one PASS/FAIL line with its timing
and the tolerance it was held to, and checks the library against an oracle
that does not reuse the code path under test."""

import math
import random
import time
from fractions import Fraction
from itertools import product

import mpmath
import numpy as np
import pytest
import sympy as sp

from sdioph.approx import (PowerLogPsi, TransferenceParams, borel_cantelli_sum,
                           intersection_witness, phi_membership, series_audit, synthetic_intersection_instance,
                           transference_gammas)
from sdioph.config import load
from sdioph.experiments import _identity_map, legal_grid, run
from sdioph.lattice import box_agreement, build_gamma, lattice_membership, successive_minima
from sdioph.maps import veronese
from sdioph.measure import (brute_force_sublevel, good_certify, product_good_check,
                            sample_point, sublevel_measure_exact)
from sdioph.padic import INF, PAdicBall, PAdicNumber, norm_p, unit_ball, vp
from sdioph.poly import Poly
from sdioph.ubiquity import (PipelineFailure, UbiquityConfig, delta_neighborhood,
                             hensel_gain_ok, hensel_root, resonant_construct, strong_approx)

CONFIGS = __file__.rsplit("/tests/", 1)[0] + "/configs"


def verdict(capsys, k, ok, elapsed, limit, detail):
    line = (f"ACCEPTANCE {k:>2} {'PASS' if ok else 'FAIL'}  {elapsed:7.1f}s"
            f" (limit {limit}s)  {detail}")
    with capsys.disabled():
        print("\n" + line)
    assert ok, line
    assert elapsed < limit, line


def random_instances(seed=2024, count=200):
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        p = rng.choice([2, 3, 5])
        n = rng.randint(1, 3)
        j = rng.randint(1, 5)
        y = [rng.randrange(p ** (j + 2)) for _ in range(n)]
        out.append((p, n, j, y))
    return out


def in_gamma(p, j, y, q):
    """Direct membership test: p | q_i and q_0 + sum q_i y_i = 0 mod p^j."""
    return all(v % p == 0 for v in q[1:]) and \
        (q[0] + sum(a * b for a, b in zip(q[1:], y))) % p ** j == 0


# -- 1 --------------------------------------------------------------------

def test_acceptance_01_covolume_exactness(capsys):
    t0 = time.time()
    bad = []
    methods = {}
    rng = random.Random(1)
    for i, (p, n, j, y) in enumerate(random_instances()):
        L = build_gamma(y, j, p, divisible=True)
        det = sp.Matrix(L.basis).det()
        if abs(det) != p ** (j + n):
            bad.append((i, "det", det))
        B = p ** (j + 1)
        box = box_agreement(L, B, seed=i)
        methods[box.method] = methods.get(box.method, 0) + 1
        if not box.agree:
            bad.append((i, "box", box.mismatches[:3]))
        # two-sided spot check against the congruences: random box points, and
        # box points forced into the lattice by solving for q_0
        for _ in range(50):
            q = [rng.randint(-B, B) for _ in range(n + 1)]
            if lattice_membership(L, q)[0] != in_gamma(p, j, y, q):
                bad.append((i, "random point", q))
            q = [0] + [p * rng.randint(-(B // p), B // p) for _ in range(n)]
            r = (-sum(a * b for a, b in zip(q[1:], y))) % p ** j
            q[0] = r - p ** j * rng.randint(0, (B + r) // p ** j)
            if not (-B <= q[0] <= B and in_gamma(p, j, y, q)):
                continue
            if not lattice_membership(L, q)[0]:
                bad.append((i, "member rejected", q))
    verdict(capsys, 1, not bad, time.time() - t0, 60,
            f"200 instances, det = p^(j+n) exactly, box [-p^(j+1), p^(j+1)]^(n+1) "
            f"methods {methods}, failures {len(bad)} (tolerance 0) {bad[:3]}")


# -- 2 --------------------------------------------------------------------

def least_j(p, Q, delta, n):
    bound = Fraction(Q) ** (n + 1) / delta
    j = 0
    while not p ** j > bound:
        j += 1
    return j


def phi_brute(p, y, Q, delta, n):
    """Nonzero (a0, a) in [-Q, Q]^(n+1) with |a0 + a.y|_p < delta Q^-(n+1)."""
    j = least_j(p, Q, delta, n)
    grid = np.indices((2 * Q + 1,) * (n + 1)).reshape(n + 1, -1).T - Q
    N = grid[:, 0] + (grid[:, 1:] * np.array(y, dtype=np.int64)).sum(axis=1)
    hit = (N % p ** j == 0) & np.any(grid != 0, axis=1)
    return bool(hit.any())


def test_acceptance_02_minkowski_audit(capsys):
    t0 = time.time()
    delta = Fraction(1, 2)
    bad = []
    outside = 0
    for i, (p, n, j, y) in enumerate(random_instances()):
        for Q in (1, 2, 4, 8):
            jq = least_j(p, Q, delta, n)
            L = build_gamma(y, jq, p, divisible=True)
            res = successive_minima(L, Q)
            W = [list(w) for w in res.witnesses]
            if len(W) != n + 1 or sp.Matrix(W).rank() != n + 1 or \
                    not all(in_gamma(p, jq, y, w) for w in W):
                bad.append((i, Q, "witnesses"))
                continue
            lams = [Fraction(max(map(abs, w)), Q) for w in W]
            if lams != sorted(lams) or lams != list(res.lambdas):
                bad.append((i, Q, "lambdas"))
            prod = math.prod(lams)
            if not prod * (2 * Q) ** (n + 1) <= 2 ** (n + 1) * p ** (jq + n):
                bad.append((i, Q, "product", prod))
            member = phi_brute(p, y, Q, delta, n)
            lib = phi_membership(y, Q, delta, _identity_map(p, n)).member
            if member != lib:
                bad.append((i, Q, "phi routes", member, lib))
            if not member:
                outside += 1
                if not lams[0] > 1:
                    bad.append((i, Q, "lambda1", lams[0]))
    verdict(capsys, 2, not bad, time.time() - t0, 300,
            f"200 instances x Q in {{1,2,4,8}}, delta 1/2; second-theorem product bound "
            f"exact; {outside} brute-force non-members all with lambda_1 > 1; "
            f"failures {len(bad)} (tolerance 0) {bad[:3]}")


# -- 3 --------------------------------------------------------------------

def random_poly(rng, p, d):
    deg = rng.randint(1, 4)
    coeffs = {}
    for idx in product(range(deg + 1), repeat=d):
        if sum(idx) <= deg and rng.random() < 0.5:
            coeffs[idx] = rng.randint(-20, 20) * p ** rng.choice([0, 0, 1, 2])
    top = tuple([deg] + [0] * (d - 1))
    coeffs.setdefault(top, rng.choice([1, -1, p, 2]))
    if rng.random() < 0.5:
        coeffs[(0,) * d] = p ** rng.randint(0, 6) * rng.choice([1, -1, 2])
    return Poly(d, coeffs)


def test_acceptance_03_sublevel_oracle(capsys):
    t0 = time.time()
    rng = random.Random(33)
    bad = []
    nonzero = 0
    for i in range(50):
        p, d = rng.choice([3, 5]), rng.choice([1, 2])
        f = random_poly(rng, p, d)
        M = rng.randint(1, 5)
        ball = unit_ball(p, d)
        exact = sublevel_measure_exact(f, ball, M)
        want = brute_force_sublevel(f, ball, M, 6)
        nonzero += want != 0
        if not (exact.resolved and exact.lower == want):
            bad.append((i, p, d, M, str(exact), want))
    verdict(capsys, 3, not bad, time.time() - t0, 120,
            f"50 polynomials (deg <= 4, d <= 2, p in {{3,5}}, M <= 5) against full "
            f"residue enumeration mod p^6; {nonzero} with positive measure; exact "
            f"rational equality, failures {len(bad)} {bad[:2]}")


# -- 4 --------------------------------------------------------------------

def val_dist(c, m, p, cap):
    """Distribution of v_p over the ball c + p^m Z_p, relative to the ball: {v: mass}."""
    vc = vp(Fraction(c), p)
    if vc < m:
        return {int(vc): Fraction(1)}
    return {m + g: Fraction(p - 1, p) / p ** g for g in range(cap)} | \
        {m + cap: Fraction(1, p ** cap)}          # lumped tail: v >= m + cap


def monomial_oracle(k, ball, M):
    """(measure of |prod x_i^k| < p^-M on the ball, sup of |prod x_i^k|) in closed form."""
    p, m = ball.p, ball.k
    a = M // k + 1                      # need sum v_i >= a
    dists = [val_dist(c, m, p, a + 2) for c in ball.center]
    mass = Fraction(0)
    for combo in product(*[list(dd.items()) for dd in dists]):
        if sum(v for v, _ in combo) >= a:
            mass += math.prod(w for _, w in combo)
    vmin = sum(min(dd) for dd in dists)
    return mass * ball.measure(), Fraction(1, p ** (k * vmin))


def test_acceptance_04_good_certification(capsys):
    t0 = time.time()
    mpmath.mp.dps = 50
    bad = []
    checks = 0
    for p in (2, 3, 5, 7):
        for k in range(1, 5):
            C = mpmath.mpf(k) ** (3 - mpmath.mpf(1) / k)
            alpha = Fraction(1, k)
            one = good_certify(Poly(1, {(k,): 1}), unit_ball(p), C, alpha, range(1, 11))
            prod = product_good_check(Poly(2, {(k, k): 1}), unit_ball(p, 2), C, alpha,
                                      range(1, 11))
            if one.verdict != "pass" or prod.verdict != "pass":
                bad.append((p, k, one.verdict, prod.verdict))
            for rep, CC, al in ((one, C, alpha), (prod.product_report, 2 * C, alpha / 2)):
                for c in rep.checks:
                    checks += 1
                    M = -vp(c.eps, p)
                    mu, sup = monomial_oracle(k, c.ball, M)
                    if c.measure.lower != mu or c.measure.upper != mu or \
                            not c.sup.lower <= sup <= c.sup.upper:
                        bad.append((p, k, "oracle", c.ball, M))
                        continue
                    rhs = CC * (mpmath.mpf(c.eps.numerator) / c.eps.denominator /
                                (mpmath.mpf(sup.numerator) / sup.denominator)) ** \
                        (mpmath.mpf(al.numerator) / al.denominator) * \
                        (mpmath.mpf(c.ball.measure().numerator) / c.ball.measure().denominator)
                    if not mpmath.mpf(mu.numerator) / mu.denominator <= rhs:
                        bad.append((p, k, "bound", c.ball, M))
    verdict(capsys, 4, not bad, time.time() - t0, 60,
            f"x^k, k <= 4, p in {{2,3,5,7}}, C = k^(3-1/k), alpha = 1/k, eps = p^-1..p^-10 "
            f"over the ball and its children; product x1^k x2^k with (2C, alpha/2); "
            f"{checks} checks recomputed in closed form (50 digits), violations {len(bad)} {bad[:2]}")


# -- 5 --------------------------------------------------------------------

def test_acceptance_05_strong_approximation(capsys):
    t0 = time.time()
    rng = random.Random(5)
    bad = []
    for i in range(1000):
        p = rng.choice([2, 3, 5, 7, 11])
        e = rng.randint(-3, 8)
        eps_p = Fraction(p) ** -e
        eps_inf = Fraction(p, 2) / eps_p * Fraction(rng.randint(100, 400), 100)
        strict = rng.random() < 0.5
        if strict:
            eps_inf += Fraction(1, 10 ** 6)
        xi_inf = Fraction(rng.randint(-10 ** 6, 10 ** 6), rng.randint(1, 1000))
        xq = Fraction(rng.randint(-10 ** 6, 10 ** 6), rng.randint(1, 1000) * p ** rng.randint(0, 3))
        xi_p = PAdicNumber.from_rational(xq, p, 64) if rng.random() < 0.3 and xq else xq
        r = strong_approx(xi_inf, xi_p, eps_inf, eps_p, p, strict=strict)
        d = abs(r - xi_inf)
        den = r.denominator
        while den % p == 0:
            den //= p
        diff = r - xq
        ok_real = d < eps_inf if strict else d <= eps_inf
        ok_p = diff == 0 or vp(diff, p) >= e
        if not (ok_real and ok_p and den == 1):
            bad.append((i, p, e, xi_inf, xq, r))
    verdict(capsys, 5, not bad, time.time() - t0, 60,
            f"1000 inputs (p <= 11, eps_p = p^-e, e in [-3, 8], eps_inf >= p/(2 eps_p)); "
            f"real, p-adic and other-prime inequalities exact; failures {len(bad)} {bad[:2]}")


# -- 6 --------------------------------------------------------------------

def test_acceptance_06_hensel(capsys):
    t0 = time.time()
    rng = random.Random(6)
    bad = []
    N = 40
    for i in range(1000):
        p = rng.choice([2, 3, 5, 7])
        s = rng.randint(0, 3)
        extra = rng.randint(1, 8)
        unit = lambda: rng.choice([u for u in range(1, 4 * p) if u % p])
        g0 = p ** (2 * s + extra) * unit() * rng.choice([1, -1])
        g1 = Fraction(p ** s * unit(), rng.choice([1, 1, 2 if p != 2 else 3, 7 if p != 7 else 5]))
        higher = [Fraction(rng.randint(-30, 30), rng.choice([1, 1, 4 if p != 2 else 9]))
                  for _ in range(rng.randint(0, 4))]
        coeffs = [Fraction(g0), g1] + higher
        res = hensel_root(coeffs, p, N)
        val = sum(c * res.root ** k for k, c in enumerate(coeffs))
        residual_zero = val == 0 or vp(val, p) >= N
        # |xi_0| <= |g(0)| / |g'(0)|, i.e. v(root) >= v(g0) - v(g1)
        close = res.root % p ** N == 0 or vp(res.root, p) >= vp(g0, p) - vp(g1, p)
        steps = res.steps
        monotone = all(b >= a for a, b in zip(steps, steps[1:])) and hensel_gain_ok(res)
        if not (residual_zero and close and monotone):
            bad.append((i, p, coeffs, res.root, steps))
    verdict(capsys, 6, not bad, time.time() - t0, 60,
            f"1000 polynomials with |g(0)| < |g'(0)|^2 (p <= 7, deg <= 6, p-integral rational "
            f"coefficients), residual 0 mod p^{N}, |xi_0| <= |g(0)|/|g'(0)|, per-step "
            f"valuations nondecreasing with quadratic gain; failures {len(bad)} {bad[:1]}")


# -- 7 --------------------------------------------------------------------

def test_acceptance_07_resonant_pipeline(capsys):
    t0 = time.time()
    p, n, delta = 3, 2, Fraction(1, 3)
    ball = PAdicBall(p, (1,), 1)
    f = veronese(n, p, ball)
    theta = Poly(1, {(3,): 3, (1,): 9})
    Qs = [4, 16, 64, 256, 1024]
    X = sp.Symbol("X")
    bad = []
    done = members = 0
    i = 0
    while done < 100 and i < 2000:
        Q = Qs[i % len(Qs)]
        x = sample_point(ball, 7, i, 40)
        i += 1
        cfg = UbiquityConfig(p, n, Q, delta, ball=ball)
        try:
            c = resonant_construct(x, cfg, f, theta)
        except PipelineFailure as exc:
            if exc.stage == "precondition":
                members += 1
            else:
                bad.append((i, Q, exc.stage))
                done += 1
            continue
        done += 1
        Qc = c.Q
        a0, a1, a2 = c.coefficients
        G = a0 + a1 * X + a2 * X ** 2 + 3 * X ** 3 + 9 * X
        x0 = sp.Integer(x[0])
        val = Fraction(int(G.subs(X, x0)))
        slope = Fraction(int(sp.diff(G, X).subs(X, x0)))
        h = max(abs(a0), abs(a1), abs(a2))
        kappa0 = delta * Fraction(p) ** -(n + 2) / (3 * p * (n + 1))
        rho = Fraction(p, p - 1) * delta / Qc ** (n + 1)
        z = int(x0) + c.root.root
        own = {
            "integrality": all(isinstance(v, int) for v in c.coefficients),
            "value": val == 0 or norm_p(val, p) <= delta / Qc ** (n + 1),
            "slope": norm_p(slope, p) == 1,
            "height": p * Qc < h <= 3 * p * (n + 1) * Qc * Fraction(p) ** (n + 2) / delta,
            "beta": Fraction(1, 3 * p * (n + 1)) * Fraction(p) ** -(n + 1) * delta * Qc
                    < kappa0 * h <= Qc,
            "zero": int(G.subs(X, z)) % p ** c.root.N == 0,
            "distance": (c.root.root % p ** c.root.N == 0 and Fraction(1, p ** c.root.N) <= rho)
                        or norm_p(c.root.root, p) <= rho,
            "Q_range": Qc <= 2 ** 10,
        }
        near = delta_neighborhood(x, [(x, c.root)], rho, p) == "member"
        if not (c.ok and near and all(own.values())):
            bad.append((i, Q, [k for k, v in own.items() if not v],
                        [k for k, v in c.certificates.items() if not v]))
    ok = not bad and done >= 100
    verdict(capsys, 7, ok, time.time() - t0, 600,
            f"Veronese p=3 n=2, Theta = 3x^3 + 9x, delta 1/3, Q in {Qs}: {done} points "
            f"outside Phi ({members} inside skipped); integrality, value, slope, height, "
            f"beta-window and |x - x_xi0| <= rho(Q) recomputed with sympy; "
            f"failures {len(bad)} (tolerance 0) {bad[:2]}")


# -- 8 --------------------------------------------------------------------

def h_set_recheck(x, params, a2, nu):
    """H-set inequalities for the form a2 (no Theta), evaluated with 50-digit floats."""
    mpmath.mp.dps = 50
    t = params.t
    size = sum(t)
    l = params.l
    lam = mpmath.power(2, mpmath.mpf(params.delta.numerator) / params.delta.denominator * size)
    form_bound = 2 ** l * lam * mpmath.power(2, -size)
    vals = []
    for pl in params.places:
        xv = x.components[pl][0]
        F = a2[0] + a2[1] * xv + a2[2] * xv ** 2
        vals.append(abs(F) if pl == INF else norm_p(F, pl))
    form = mpmath.mpf(max(vals).numerator) / max(vals).denominator
    xv = x.components[nu][0]
    grad = a2[1] + 2 * a2[2] * xv
    eps = mpmath.mpf(params.eps.numerator) / params.eps.denominator
    if nu == INF:
        g, r = abs(grad), mpmath.power(2, (size + 1) * (1 - eps))
    else:
        g, r = norm_p(grad, nu), mpmath.power(2, -(size + 1) * eps)
    g = mpmath.mpf(g.numerator) / g.denominator
    dyadic = all(max(abs(ai), norm_p(ai, 3) if ai else 0) <= 2 ** (ti + 2)
                 for ai, ti in zip(a2[1:], t))
    return form ** l < form_bound and g < 2 * lam * r and dyadic and any(a2[1:])


def test_acceptance_08_intersection(capsys):
    t0 = time.time()
    bad = []
    places = {}
    for s in range(200):
        x, params, al, alp, nu, f, theta = synthetic_intersection_instance(random.Random(8000 + s))
        places[str(nu)] = places.get(str(nu), 0) + 1
        rep = intersection_witness(x, params, al, alp, nu, f, theta)
        a2 = tuple(u - v for u, v in zip(al, alp))
        if not (rep.ok and rep.alpha2 == a2 and h_set_recheck(x, params, a2, nu)):
            bad.append((s, rep.failed()))
    verdict(capsys, 8, not bad, time.time() - t0, 60,
            f"200 synthetic Veronese instances (S = {{inf, 3}}, nu counts {places}, Theta "
            f"vanishing to second order): alpha'' = alpha - alpha' meets the three H "
            f"inequalities (rechecked at 50 digits) with a'' != 0; failures {len(bad)} {bad[:2]}")


# -- 9 --------------------------------------------------------------------

def test_acceptance_09_series_audits(capsys):
    t0 = time.time()
    bad = []
    tuples = 0
    for n in range(1, 6):
        for places in ((INF,), (INF, 3)):
            l = len(places)
            for eps, delta in legal_grid(n, l, 10):
                tuples += 1
                alpha1 = Fraction(1, 1 + tuples % 3)
                g1, g2 = transference_gammas(eps, delta, l, n, alpha1)
                if g1 != (eps - 2 * delta) * alpha1 / (l * (n + 1)) or \
                        g2 != (eps - 2 * delta + 1) * alpha1 / (l * (n + 1)) or \
                        not (g1 > 0 and g2 > 0):
                    bad.append((n, l, eps, delta, "gamma"))
                params = TransferenceParams(eps, delta, n, (0,) * n, places, alpha1)
                for nu in places + ((5,) if l == 1 else ()):
                    s = series_audit(params, nu, 64)
                    if not s.bracket_ok or s.verdict != "summable":
                        bad.append((n, l, eps, delta, nu, "bracket"))
    # Borel-Cantelli family: sum k^w psi(k) with w = n (no real place) or n - 1
    bc = []
    for n in range(1, 5):
        for inf_place in (False, True):
            w = n - 1 if inf_place else n
            family = {"p-series": (PowerLogPsi(1, w + 2), "convergent"),
                      "harmonic": (PowerLogPsi(1, w + 1), "divergent"),
                      "log-refined": (PowerLogPsi(1, w + 1, L=2), "convergent")}
            for name, (psi, want) in family.items():
                got = borel_cantelli_sum(psi, n, inf_place, 1024).classification
                bc.append(got == want)
                if got != want:
                    bad.append((n, inf_place, name, got))
    verdict(capsys, 9, not bad, time.time() - t0, 60,
            f"{tuples} legal (n, l, eps, delta) tuples: both exponents positive and exact, "
            f"partial sums inside the closed-form tail bracket; Borel-Cantelli verdicts "
            f"{sum(bc)}/{len(bc)} (p-series, harmonic, log-refined); failures {len(bad)} {bad[:2]}")


# -- 10 -------------------------------------------------------------------

def test_acceptance_10_dichotomy(capsys):
    t0 = time.time()
    cfg = load(CONFIGS + "/dichotomy.yaml")
    P = cfg.params
    assert (P["p"], P["n"], P["samples"], P["t_max"]) == (3, 2, 1000, 8)
    rep = run(cfg)
    div, conv = rep.summary["divergent"], rep.summary["convergent"]
    div_ok = div["slope"] + 3 * div["slope_sigma"] >= -1
    conv_ok = conv["slope"] + 3 * conv["slope_sigma"] < -1
    hits = {name: [r[3] for r in rep.tables[name].rows] for name in ("divergent", "convergent")}
    verdict(capsys, 10, div_ok and conv_ok, time.time() - t0, 900,
            f"Veronese p=3 n=2, 1000 points, t = 1..8; psi = k^-3/24: slope "
            f"{div['slope']:.3f} +- {div['slope_sigma']:.3f} (non-summable, needs slope + 3 sigma "
            f">= -1); psi = k^-3 log(k+1)^-2/24: slope {conv['slope']:.3f} +- "
            f"{conv['slope_sigma']:.3f} (summable, needs slope + 3 sigma < -1); hits {hits}")
