"""Haar measure of polynomial sublevel sets, (C, alpha)-good certification, Monte Carlo."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Callable, Sequence

import mpmath
import numpy as np

from .padic import PAdicBall, PrecisionError, vp_int
from .poly import Poly

DEPTH_CAP = 12


@dataclass(frozen=True)
class MeasureBounds:
    lower: Fraction
    upper: Fraction
    depth: int            # deepest level (relative to the ball) the recursion reached

    @property
    def resolved(self) -> bool:
        return self.lower == self.upper

    @property
    def value(self) -> Fraction:
        if not self.resolved:
            raise PrecisionError(f"measure unresolved: [{self.lower}, {self.upper}]")
        return self.lower

    def to_record(self) -> dict:
        return {"lower": str(self.lower), "upper": str(self.upper),
                "depth": self.depth, "resolved": self.resolved}


# -- integer polynomial helpers -------------------------------------------
#
# The recursion works on g(y) = f(c + p^k y) with integer coefficients kept
# modulo p^(M+1); membership |f| < p^-M only depends on f mod p^(M+1).

def _integral_form(f: Poly, p: int) -> tuple[dict, int]:
    """Clear denominators: f = (integer poly) / den with v_p(den) = s.

    The unit part of den does not change any p-adic norm, so |f| = p^s |integer poly|.
    """
    den = math.lcm(*(c.denominator for c in f.coeffs.values())) if f.coeffs else 1
    return {k: int(c * den) for k, c in f.coeffs.items()}, vp_int(den, p)


def _shift(coeffs: dict, d: int, r: Sequence[int], p: int, mod: int | None) -> dict:
    """Coefficients of g(r + p*y) from those of g(y)."""
    out: dict = {}
    for idx, c in coeffs.items():
        # expand prod_i (r_i + p y_i)^e_i
        parts = [[(j, math.comb(e, j) * r[i] ** (e - j) * p ** j) for j in range(e + 1)]
                 for i, e in enumerate(idx)]
        for combo in product(*parts):
            k = tuple(j for j, _ in combo)
            val = c
            for _, w in combo:
                val *= w
            out[k] = out.get(k, 0) + val
    if mod is not None:
        out = {k: v % mod for k, v in out.items()}
    return {k: v for k, v in out.items() if v}


def _shift_axis(coeffs: dict, axis: int, r: int, p: int, mod: int | None) -> dict:
    """Coefficients of g after y_axis -> r + p*y_axis, the other variables untouched."""
    out: dict = {}
    for idx, c in coeffs.items():
        e = idx[axis]
        for j in range(e + 1):
            k = idx[:axis] + (j,) + idx[axis + 1:]
            out[k] = out.get(k, 0) + c * math.comb(e, j) * r ** (e - j) * p ** j
    if mod is not None:
        out = {k: v % mod for k, v in out.items()}
    return {k: v for k, v in out.items() if v}


def _split_axis(coeffs: dict, p: int) -> int:
    """A variable of a non-constant monomial of least valuation (first in sorted order)."""
    best = None
    for k in sorted(coeffs):
        if any(k):
            v = vp_int(coeffs[k], p)
            if best is None or v < best[0]:
                best = (v, next(i for i, e in enumerate(k) if e))
    return best[1]


def _center_coeffs(f: Poly, ball: PAdicBall, mod: int | None) -> tuple[dict, int]:
    """Integer coefficients of f(c + p^k y) scaled by the denominator; returns (coeffs, s)."""
    p = ball.p
    g = f.affine_substitute(ball.center, Fraction(p) ** ball.k)
    coeffs, s = _integral_form(g, p)
    if mod is not None:
        coeffs = {k: v % mod for k, v in coeffs.items()}
        coeffs = {k: v for k, v in coeffs.items() if v}
    return coeffs, s


def _node_vals(coeffs: dict, d: int, p: int, cap: float) -> tuple[float, float]:
    zero = (0,) * d
    m0, m1 = cap, cap
    for k, c in coeffs.items():
        v = min(vp_int(c, p), cap)
        if k == zero:
            m0 = v
        elif v < m1:
            m1 = v
    return m0, m1


def sublevel_measure_exact(f: Poly, ball: PAdicBall, M: int,
                           depth_cap: int = DEPTH_CAP) -> MeasureBounds:
    """Haar measure of {x in ball : |f(x)|_p < p^-M}.

    A node c + p^k Z_p^d with expansion g(y) = b0 + sum b_beta y^beta is
      * inside when every b_beta (beta != 0) and b0 have valuation >= M+1,
      * outside when v(b0) < min v(b_beta), since then |g| = |b0| >= p^-M,
      * split into p^d children otherwise.
    Nodes still open at ``depth_cap`` levels below the ball only widen the bracket.
    """
    p, d = ball.p, ball.d
    coeffs, s = _center_coeffs(f, ball, None)
    target = M + 1 + s                      # need v(scaled f) >= M + 1 + s
    mod = p ** max(target, 1)
    coeffs = {k: v % mod for k, v in coeffs.items() if v % mod}
    lower = Fraction(0)
    upper_extra = Fraction(0)
    reached = 0
    base = Fraction(1, p ** (ball.k * d))
    # nodes refine one coordinate at a time; levels[i] counts the digits fixed in y_i
    stack = [(coeffs, (0,) * d)]
    while stack:
        g, levels = stack.pop()
        depth = max(levels)
        reached = max(reached, depth)
        m0, m1 = _node_vals(g, d, p, math.inf)
        node_measure = base / p ** sum(levels)
        if m0 >= target and m1 >= target:
            lower += node_measure
            continue
        if m0 < m1:
            # |g| constant on the node; inside iff m0 >= target (impossible here)
            continue
        axis = _split_axis(g, p)
        if levels[axis] >= depth_cap:
            upper_extra += node_measure
            continue
        kid = levels[:axis] + (levels[axis] + 1,) + levels[axis + 1:]
        for r in range(p):
            stack.append((_shift_axis(g, axis, r, p, mod), kid))
    return MeasureBounds(lower, lower + upper_extra, reached)


def brute_force_sublevel(f: Poly, ball: PAdicBall, M: int, depth: int) -> Fraction:
    """Oracle: count residues mod p^depth of the ball whose f-value has |.| < p^-M.

    Needs integer-valued f on the ball and depth >= M + 1 (membership then only
    depends on the residue).  Vectorised with numpy, all arithmetic mod p^depth.
    """
    p, d = ball.p, ball.d
    if depth < M + 1:
        raise ValueError("depth must be at least M + 1")
    if any(c.denominator % p == 0 for c in f.coeffs.values()) or \
            any(c.denominator != 1 for c in ball.center):
        raise ValueError("oracle needs p-integral coefficients and an integer center")
    mod = p ** depth
    free = depth - ball.k
    if free < 0:
        raise ValueError("depth must be at least the ball level")
    coeffs = {k: (c.numerator * pow(c.denominator, -1, mod)) % mod for k, c in f.coeffs.items()}
    target = p ** (M + 1)
    n_side = p ** free
    step = p ** ball.k
    axis = [(int(c) + step * np.arange(n_side, dtype=np.int64)) % mod for c in ball.center]
    hits = 0
    if d == 1:
        grids = [axis[0]]
        hits = _count_zero_mod(coeffs, grids, mod, target)
    else:
        # f = sum_e x0^e h_e(rest): evaluate each h_e once on the mesh of the
        # remaining coordinates, then run Horner in x0 over chunks of rows
        if mod >= 2 ** 31:
            raise OverflowError("depth too large for int64 products")
        dt = np.int32 if mod * mod + mod < 2 ** 31 else np.int64
        # Horner runs over the variable of least degree; the count is symmetric
        lead = min(range(d), key=lambda i: max(k[i] for k in coeffs) if coeffs else 0)
        others = [i for i in range(d) if i != lead]
        rest = np.meshgrid(*[axis[i] for i in others], indexing="ij")
        rest = [r.ravel() for r in rest]
        parts: dict = {}
        for idx, c in coeffs.items():
            parts.setdefault(idx[lead], {})[tuple(idx[i] for i in others)] = c
        top = max(parts, default=0)
        zero = np.zeros_like(rest[0])
        hs = [(_eval_mod(parts[e], rest, mod) if e in parts else zero).astype(dt)
              for e in range(top + 1)]
        x0 = axis[lead].astype(dt)
        chunk = max(1, 1_000_000 // max(1, rest[0].size))
        for start in range(0, n_side, chunk):
            col = x0[start:start + chunk, None]
            total = np.broadcast_to(hs[top], (col.shape[0], hs[top].size)).copy()
            for e in range(top - 1, -1, -1):
                np.multiply(total, col, out=total)
                np.add(total, hs[e], out=total)
                # target divides mod, so the last step can reduce by target directly
                np.remainder(total, mod if e else target, out=total)
            if top == 0:
                np.remainder(total, target, out=total)
            hits += int(total.size - np.count_nonzero(total))
    return Fraction(hits, n_side ** d) * ball.measure()


def _count_zero_mod(coeffs: dict, grids: list, mod: int, target: int) -> int:
    total = _eval_mod(coeffs, grids, mod)
    return int(np.count_nonzero(total % target == 0))


def _eval_mod(coeffs: dict, grids: list, mod: int):
    total = np.zeros_like(grids[0])
    for idx, c in coeffs.items():
        term = np.full_like(grids[0], c % mod)
        for g, e in zip(grids, idx):
            for _ in range(e):
                term = (term * g) % mod
        total = (total + term) % mod
    return total


def lifted_count_sublevel(f: Poly, ball: PAdicBall, M: int) -> Fraction:
    """Oracle by residue lifting: the same count as :func:`brute_force_sublevel`.

    Points are x = c + p^k t.  f(x) mod p^(k+L) only depends on t mod p^L, so a
    residue t mod p^(L+1) can satisfy f(x) = 0 mod p^(M+1) only if its parent
    mod p^L satisfies f(x) = 0 mod p^min(k+L, M+1).  Every survivor is lifted to
    all p^d children; nothing else is pruned.
    """
    p, d, k = ball.p, ball.d, ball.k
    if any(c.denominator % p == 0 for c in f.coeffs.values()) or \
            any(c.denominator != 1 for c in ball.center):
        raise ValueError("oracle needs p-integral coefficients and an integer center")
    top = M + 1
    levels = max(0, top - k)
    mod = p ** max(top, 1)
    g = f.affine_substitute(ball.center, p ** k)    # integer polynomial in t
    coeffs = {i: (c.numerator * pow(c.denominator, -1, mod)) % mod for i, c in g.coeffs.items()}
    survivors = np.zeros((1, d), dtype=np.int64)
    offsets = np.array(list(product(range(p), repeat=d)), dtype=np.int64)
    for L in range(levels):
        # children t + p^L r of every survivor t mod p^L
        kids = (survivors[:, None, :] + p ** L * offsets[None, :, :]).reshape(-1, d)
        need = p ** min(k + L + 1, top)
        vals = _eval_mod(coeffs, [kids[:, i] for i in range(d)], mod)
        survivors = kids[vals % need == 0]
        if survivors.size == 0:
            return Fraction(0)
    if levels == 0:
        vals = _eval_mod(coeffs, [survivors[:, i] for i in range(d)], mod)
        return ball.measure() if int(vals[0]) % p ** top == 0 else Fraction(0)
    return Fraction(len(survivors), p ** (levels * d)) * ball.measure()


# -- sup norm -------------------------------------------------------------

@dataclass(frozen=True)
class SupBounds:
    lower: Fraction
    upper: Fraction

    @property
    def resolved(self) -> bool:
        return self.lower == self.upper


def sup_norm(f: Poly, ball: PAdicBall, depth_cap: int = DEPTH_CAP) -> SupBounds:
    """sup over the ball of |f|_p by branch and bound on the same residue tree.

    A node is closed exactly when its constant coefficient has the minimal
    valuation (then |g(0)| attains the node's bound).
    """
    p, d = ball.p, ball.d
    coeffs, s = _center_coeffs(f, ball, None)
    scale = Fraction(p) ** s
    if not coeffs:
        return SupBounds(Fraction(0), Fraction(0))
    best_v = math.inf              # valuation of best value seen (lower bound on sup)
    open_upper = math.inf          # min valuation over nodes cut by the cap
    stack = [(coeffs, 0)]
    while stack:
        g, depth = stack.pop()
        m0, m1 = _node_vals(g, d, p, math.inf)
        best_v = min(best_v, m0)
        node_min = min(m0, m1)
        if node_min >= best_v or m0 <= m1:
            continue
        if depth >= depth_cap:
            open_upper = min(open_upper, node_min)
            continue
        for r in product(range(p), repeat=d):
            stack.append((_shift(g, d, r, p, None), depth + 1))

    def to_norm(v):
        return Fraction(0) if v == math.inf else Fraction(p) ** (-v) * scale

    lo = to_norm(best_v)
    hi = max(lo, to_norm(open_upper))
    return SupBounds(lo, hi)


# -- (C, alpha)-good certification ----------------------------------------

_DPS = 50


def _mpf(x):
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)


def _good_rhs(C, alpha, eps: Fraction, sup: Fraction, ball_measure: Fraction):
    with mpmath.workdps(_DPS):
        return _mpf(C) * (_mpf(eps) / _mpf(sup)) ** _mpf(alpha) * _mpf(ball_measure)


def _le(a: Fraction, b) -> bool | None:
    """a <= b for exact a and 50-digit b; None when too close to call."""
    with mpmath.workdps(_DPS):
        x = _mpf(a)
        tol = mpmath.mpf(10) ** (-(_DPS - 10)) * max(abs(x), abs(b), 1)
        if x < b - tol:
            return True
        if x > b + tol:
            return False
        return None


@dataclass
class GoodCheck:
    ball: PAdicBall
    eps: Fraction
    measure: MeasureBounds
    sup: SupBounds
    rhs_low: str
    rhs_high: str
    verdict: str            # pass / violation / inconclusive

    def to_record(self) -> dict:
        return {"center": [str(c) for c in self.ball.center], "k": self.ball.k,
                "eps": str(self.eps), "measure": self.measure.to_record(),
                "sup_lower": str(self.sup.lower), "sup_upper": str(self.sup.upper),
                "rhs_low": self.rhs_low, "rhs_high": self.rhs_high, "verdict": self.verdict}


@dataclass
class GoodReport:
    C: object
    alpha: object
    checks: list = field(default_factory=list)

    @property
    def violations(self) -> list:
        return [c for c in self.checks if c.verdict == "violation"]

    @property
    def inconclusive(self) -> list:
        return [c for c in self.checks if c.verdict == "inconclusive"]

    @property
    def verdict(self) -> str:
        if self.violations:
            return "violation"
        if self.inconclusive:
            return "inconclusive"
        return "pass"

    def to_record(self) -> dict:
        return {"C": str(self.C), "alpha": str(self.alpha), "verdict": self.verdict,
                "checks": [c.to_record() for c in self.checks]}


def _sub_balls(ball: PAdicBall, levels: int):
    layer = [ball]
    for _ in range(levels + 1):
        yield from layer
        layer = [ch for b in layer for ch in b.children()]


def check_good_on_ball(f: Poly, ball: PAdicBall, C, alpha, M: int,
                       depth_cap: int = DEPTH_CAP) -> GoodCheck:
    p = ball.p
    eps = Fraction(1, p ** M)
    meas = sublevel_measure_exact(f, ball, M, depth_cap)
    sup = sup_norm(f, ball, depth_cap)
    if sup.upper == 0:
        # f vanishes on the ball: the right side is read as +infinity
        return GoodCheck(ball, eps, meas, sup, "inf", "inf", "pass")
    mu = ball.measure()
    # the bound decreases in sup, so sup.upper gives the smallest right side
    rhs_small = _good_rhs(C, alpha, eps, sup.upper, mu)
    rhs_big = _good_rhs(C, alpha, eps, sup.lower, mu) if sup.lower > 0 else mpmath.inf
    ok = _le(meas.upper, rhs_small)
    bad = _le(meas.lower, rhs_big)
    if ok:
        verdict = "pass"
    elif bad is False:
        verdict = "violation"
    else:
        verdict = "inconclusive"
    return GoodCheck(ball, eps, meas, sup, mpmath.nstr(rhs_small, 20),
                     mpmath.nstr(rhs_big, 20), verdict)


def good_certify(f: Poly, ball: PAdicBall, C, alpha, eps_exponents: Sequence[int],
                 ball_depth: int = 1, depth_cap: int = DEPTH_CAP) -> GoodReport:
    """Check mu{x in B': |f| < eps} <= C (eps / sup_B'|f|)^alpha |B'| over a grid.

    B' runs over the ball and its sub-balls down to ``ball_depth`` levels;
    eps runs over p^-M for M in ``eps_exponents``.
    """
    rep = GoodReport(C, alpha)
    for b in _sub_balls(ball, ball_depth):
        for M in eps_exponents:
            rep.checks.append(check_good_on_ball(f, b, C, alpha, M, depth_cap))
    return rep


@dataclass
class ProductGoodReport:
    slice_reports: list
    product_report: GoodReport

    @property
    def verdict(self) -> str:
        verdicts = [r.verdict for r in self.slice_reports] + [self.product_report.verdict]
        if "violation" in verdicts:
            return "violation"
        if "inconclusive" in verdicts:
            return "inconclusive"
        return "pass"


def _slice(f: Poly, axis: int, fixed: Sequence[int]) -> Poly:
    """One-variable restriction of f with all other coordinates frozen."""
    subs = []
    for j in range(f.nvars):
        if j == axis:
            subs.append(Poly.var(1, 0))
        else:
            subs.append(Poly.const(1, fixed[j]))
    return f.compose(subs)


def product_good_check(f: Poly, ball: PAdicBall, C, alpha, eps_exponents: Sequence[int],
                       fibers: int = 3, ball_depth: int = 1,
                       depth_cap: int = DEPTH_CAP) -> ProductGoodReport:
    """Certify slices with (max(C, 1), alpha), then the product with (d C, alpha / d).

    Slices are taken through ``fibers`` deterministic integer points of the ball
    per axis.  Constant slices are allowed the relaxed constant max(C, 1).
    """
    p, d = ball.p, ball.d
    if d == 1:
        rep = good_certify(f, ball, C, alpha, eps_exponents, ball_depth, depth_cap)
        return ProductGoodReport([], rep)
    step = p ** ball.k
    slices = []
    c_slice = max(C, 1)
    for axis in range(d):
        for t in range(fibers):
            fixed = [int(c) + step * ((t * (j + 2)) % p ** 2) for j, c in enumerate(ball.center)]
            g = _slice(f, axis, fixed)
            sub = PAdicBall(p, (ball.center[axis],), ball.k)
            slices.append(good_certify(g, sub, c_slice, alpha, eps_exponents, 0, depth_cap))
    prod_rep = good_certify(f, ball, d * C, Fraction(alpha) / d if isinstance(alpha, (int, Fraction))
                            else alpha / d, eps_exponents, ball_depth, depth_cap)
    return ProductGoodReport(slices, prod_rep)


# -- Monte Carlo ----------------------------------------------------------

@dataclass(frozen=True)
class MCEstimate:
    hits: int
    misses: int
    indeterminate: int
    estimate: float
    sigma: float
    ci_low: float
    ci_high: float

    @property
    def samples(self) -> int:
        return self.hits + self.misses + self.indeterminate

    def to_record(self) -> dict:
        return dict(hits=self.hits, misses=self.misses, indeterminate=self.indeterminate,
                    estimate=self.estimate, sigma=self.sigma,
                    ci_low=self.ci_low, ci_high=self.ci_high)


def sample_point(ball: PAdicBall, seed: int, index: int, digits: int) -> tuple[int, ...]:
    """Haar-uniform point of the ball, truncated to ``digits`` digits below its level.

    Counter-based: the point only depends on (seed, index).
    """
    rng = np.random.default_rng([seed, index])
    p = ball.p
    step = p ** ball.k
    out = []
    for c in ball.center:
        ds = rng.integers(0, p, size=digits)
        val = 0
        for dgt in reversed(ds.tolist()):
            val = val * p + dgt
        out.append(int(c) + step * val)
    return tuple(out)


def wilson_interval(hits: int, n: int, z: float = 3.0) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    ph = hits / n
    den = 1 + z * z / n
    mid = (ph + z * z / (2 * n)) / den
    half = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / den
    return max(0.0, mid - half), min(1.0, mid + half)


def measure_mc(predicate: Callable, ball: PAdicBall, samples: int, seed: int,
               digits: int = 24, z: float = 3.0) -> MCEstimate:
    """Fraction of Haar-random points of the ball satisfying ``predicate``.

    A PrecisionError from the predicate is counted as indeterminate.  The
    estimate is relative to the determinate samples.
    """
    hits = misses = indet = 0
    for i in range(samples):
        x = sample_point(ball, seed, i, digits)
        try:
            ok = predicate(x if ball.d > 1 else x[0])
        except PrecisionError:
            indet += 1
            continue
        if ok:
            hits += 1
        else:
            misses += 1
    n = hits + misses
    est = hits / n if n else float("nan")
    sigma = math.sqrt(est * (1 - est) / n) if n else float("nan")
    lo, hi = wilson_interval(hits, n, z)
    return MCEstimate(hits, misses, indet, est, sigma, lo, hi)
