"""Polynomial maps U -> Q_p^n and their ultrametric calculus."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Callable, Mapping, Sequence

from .padic import (DEFAULT_PRECISION, PAdicBall, PAdicNumber, norm_p,
                    padic_from_rational, unit_ball, vp)
from .poly import Poly, monomials


def multi_factorial(beta: Sequence[int]) -> int:
    return math.prod(math.factorial(b) for b in beta)


@dataclass(frozen=True)
class AnalyticMap:
    """A polynomial map from a ball U in Z_p^m to Q_p^n.

    ``components`` holds one Poly per output coordinate.  ``rescaled_by``
    records a factor applied by :func:`normalize_scaling` (1 if untouched).
    """

    p: int
    components: tuple
    domain: PAdicBall
    name: str = "map"
    rescaled_by: Fraction = Fraction(1)

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("map needs at least one component")
        m = comps[0].nvars
        if any(c.nvars != m for c in comps):
            raise ValueError("components disagree on the number of variables")
        if self.domain.d != m:
            raise ValueError("domain ball dimension does not match the map")
        object.__setattr__(self, "components", comps)

    @property
    def m(self) -> int:
        return self.components[0].nvars

    @property
    def n(self) -> int:
        return len(self.components)

    def __call__(self, x):
        return [c(*_as_tuple(x)) for c in self.components]

    def scalar(self, i: int = 0) -> Poly:
        return self.components[i]

    def linear_form(self, a0, a: Sequence, theta: "AnalyticMap | None" = None) -> Poly:
        """The scalar polynomial a0 + a.f (+ theta)."""
        out = Poly.const(self.m, a0)
        for ai, fi in zip(a, self.components):
            if ai:
                out = out + fi * ai
        if theta is not None:
            out = out + theta.scalar()
        return out

    def to_record(self) -> dict:
        return {"name": self.name, "p": self.p, "m": self.m,
                "components": [c.to_record() for c in self.components],
                "domain": {"center": [str(c) for c in self.domain.center],
                           "k": self.domain.k},
                "rescaled_by": str(self.rescaled_by)}


def _as_tuple(x) -> tuple:
    if isinstance(x, (list, tuple)):
        return tuple(x)
    return (x,)


# -- constructors ---------------------------------------------------------

def veronese(n: int, p: int, domain: PAdicBall | None = None) -> AnalyticMap:
    """x -> (x, x^2, ..., x^n)."""
    comps = tuple(Poly(1, {(k,): 1}) for k in range(1, n + 1))
    return AnalyticMap(p, comps, domain or unit_ball(p, 1), name=f"veronese{n}")


def polynomial_map(p: int, tables: Sequence[Mapping], m: int,
                   domain: PAdicBall | None = None, name: str = "map") -> AnalyticMap:
    """Build a map from coefficient tables ``{multiindex: rational}`` per coordinate.

    Multi-indices may be tuples or comma-separated strings as they appear in
    config files.
    """
    comps = []
    for table in tables:
        coeffs = {}
        for key, val in table.items():
            if isinstance(key, str):
                idx = tuple(int(t) for t in key.split(","))
            else:
                idx = _as_tuple(key)
            coeffs[idx] = Fraction(str(val)) if isinstance(val, str) else Fraction(val)
        comps.append(Poly(m, coeffs))
    return AnalyticMap(p, tuple(comps), domain or unit_ball(p, m), name=name)


def scalar_map(p: int, poly: Poly, domain: PAdicBall | None = None,
               name: str = "theta") -> AnalyticMap:
    return AnalyticMap(p, (poly,), domain or unit_ball(p, poly.nvars), name=name)


# -- evaluation -----------------------------------------------------------

def _check_in_domain(F: AnalyticMap, x: tuple) -> None:
    if len(x) != F.m:
        raise ValueError(f"expected a point with {F.m} coordinates")
    rat = []
    for xi in x:
        if isinstance(xi, PAdicNumber):
            if xi.is_zero:
                rat.append(Fraction(0))
                continue
            if xi.abs_precision < F.domain.k:
                raise ValueError("point precision too low to decide domain membership")
            rat.append(xi.to_fraction())
        else:
            rat.append(Fraction(xi))
    if not F.domain.contains(rat):
        raise ValueError(f"point {x} lies outside the domain ball")


def eval_map(F: AnalyticMap, x, N: int = DEFAULT_PRECISION) -> list[PAdicNumber]:
    """Evaluate F at x; rational inputs are evaluated exactly, then encoded."""
    x = _as_tuple(x)
    _check_in_domain(F, x)
    if any(isinstance(xi, PAdicNumber) for xi in x):
        xs = [xi if isinstance(xi, PAdicNumber) else padic_from_rational(xi, F.p, N)
              for xi in x]
        out = []
        for c in F.components:
            val = c(*xs)
            out.append(val if isinstance(val, PAdicNumber)
                       else padic_from_rational(val, F.p, N))
        return out
    return [padic_from_rational(v, F.p, N) for v in F(x)]


def eval_exact(F: AnalyticMap, x) -> list[Fraction]:
    x = _as_tuple(x)
    _check_in_domain(F, x)
    return [Fraction(v) for v in F(x)]


# -- difference quotients -------------------------------------------------

def _dq_1d(g: Callable, pts: Sequence[Fraction]):
    """Divided difference by the defining recursion.

    Phi_0 g(x) = g(x);
    Phi_n g(x1,...,x_{n+1}) = (Phi_{n-1} g(x1,x3,...) - Phi_{n-1} g(x2,x3,...)) / (x1 - x2).
    """
    if len(pts) == 1:
        return g(pts[0])
    x1, x2, rest = pts[0], pts[1], tuple(pts[2:])
    if x1 == x2:
        raise ZeroDivisionError("coincident points in a difference quotient")
    return (_dq_1d(g, (x1,) + rest) - _dq_1d(g, (x2,) + rest)) / (x1 - x2)


def difference_quotient(F: Poly, beta: Sequence[int], points: Sequence[Sequence]) -> Fraction:
    """Phi_beta F at ``points``: one group of beta_j + 1 distinct points per variable."""
    beta = tuple(beta)
    if len(beta) != F.nvars or len(points) != F.nvars:
        raise ValueError("need one order and one point group per variable")
    groups = []
    for b, grp in zip(beta, points):
        grp = tuple(Fraction(t) for t in _as_tuple(grp))
        if len(grp) != b + 1:
            raise ValueError(f"order {b} needs {b + 1} points, got {len(grp)}")
        if len(set(grp)) != len(grp):
            raise ZeroDivisionError("coincident points in a difference quotient")
        groups.append(grp)

    def rec(j: int, fixed: tuple):
        if j == F.nvars:
            return Fraction(F(*fixed))
        return _dq_1d(lambda t: rec(j + 1, fixed + (t,)), groups[j])

    return rec(0, ())


def dn_at_point(F: Poly, order, a) -> Fraction:
    """Diagonal value of the difference quotient, D_beta F(a).

    Computed from the closed form of divided differences of monomials
    (complete homogeneous polynomials at a repeated argument), not from
    derivatives, so ``beta! * D_beta F(a) == partial_beta F(a)`` is a real check.
    """
    a = tuple(Fraction(t) for t in _as_tuple(a))
    beta = (order,) if isinstance(order, int) else tuple(order)
    if len(beta) != F.nvars or len(a) != F.nvars:
        raise ValueError("order/point dimension mismatch")
    total = Fraction(0)
    for idx, c in F.coeffs.items():
        term = c
        for k, b, t in zip(idx, beta, a):
            if k < b:
                term = 0
                break
            term *= math.comb(k, b) * t ** (k - b)
        total += term
    return total


# -- gradients and nondegeneracy -----------------------------------------

def gradient(F: Poly, x, p: int) -> tuple[list[Fraction], Fraction]:
    """First partials at x and their sup p-adic norm."""
    x = _as_tuple(x)
    vals = [Fraction(g(*x)) for g in F.gradient()]
    return vals, max((norm_p(v, p) for v in vals), default=Fraction(0))


def _rank(rows: list[list[Fraction]]) -> int:
    rows = [list(r) for r in rows]
    rank, ncols = 0, len(rows[0]) if rows else 0
    for col in range(ncols):
        piv = next((i for i in range(rank, len(rows)) if rows[i][col] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        for i in range(len(rows)):
            if i != rank and rows[i][col] != 0:
                fac = rows[i][col] / rows[rank][col]
                rows[i] = [u - fac * w for u, w in zip(rows[i], rows[rank])]
        rank += 1
    return rank


def nondegeneracy_order(F: AnalyticMap, x, lmax: int) -> int | None:
    """Smallest l whose partials of order 1..l span Q_p^n; None if degenerate up to lmax.

    Rank is computed over Q; for rational data it equals the rank over Q_p.
    """
    if lmax < 1:
        raise ValueError("lmax must be >= 1")
    x = _as_tuple(x)
    rows = []
    for ell in range(1, lmax + 1):
        for beta in monomials(F.m, ell):
            if sum(beta) != ell:
                continue
            rows.append([Fraction(c.partial(beta)(*x)) for c in F.components])
        if _rank(rows) == F.n:
            return ell
    return None


def directional_derivative(F: Poly, direction: Sequence, k: int, x0) -> Fraction:
    """(direction . grad)^k F at x0, i.e. the pure k-th partial of F(A y) along one column."""
    g = F
    for _ in range(k):
        g = sum((g.diff(i) * Fraction(d) for i, d in enumerate(direction) if d),
                Poly(F.nvars))
    return Fraction(g(*_as_tuple(x0)))


@dataclass
class CoordinateChange:
    matrix: list                 # rows of A
    pure_partials: list          # pure k-th partial of F o A at A^-1 x0, one per axis
    determinant: Fraction
    searched: int = 0


def _det(M: list[list[Fraction]]) -> Fraction:
    M = [list(map(Fraction, r)) for r in M]
    n, det = len(M), Fraction(1)
    for c in range(n):
        piv = next((i for i in range(c, n) if M[i][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            M[c], M[piv] = M[piv], M[c]
            det = -det
        det *= M[c][c]
        for i in range(c + 1, n):
            fac = M[i][c] / M[c][c]
            M[i] = [u - fac * w for u, w in zip(M[i], M[c])]
    return det


def normalize_coordinates(F: Poly, x0, k: int, p: int, depth: int = 3) -> CoordinateChange:
    """Find A in GL_d(Z_p) with every pure k-th partial of F o A nonzero at A^-1 x0.

    Column i is drawn from e_i + p * (digit vector), the digit vectors walked in
    lexicographic order with entries below p^depth.  Each column only affects
    its own pure partial, so columns are searched independently.  The result is
    congruent to the identity mod p, hence has unit determinant.
    """
    d = F.nvars
    x0 = _as_tuple(x0)
    if not any(Fraction(F.partial(b)(*x0)) != 0
               for b in monomials(d, k) if sum(b) == k):
        raise ValueError(f"no partial of order {k} is nonzero at {x0}")
    cols, partials, searched = [], [], 0
    for i in range(d):
        found = None
        for digits in product(range(p ** depth), repeat=d):
            searched += 1
            col = [Fraction(p * c) for c in digits]
            col[i] += 1
            val = directional_derivative(F, col, k, x0)
            if val != 0:
                found = (col, val)
                break
        if found is None:
            raise RuntimeError(f"no admissible column {i} up to digit depth {depth}")
        cols.append(found[0])
        partials.append(found[1])
    A = [[cols[c][r] for c in range(d)] for r in range(d)]
    det = _det(A)
    if vp(det, p) != 0:
        raise AssertionError("coordinate change is not invertible over Z_p")
    return CoordinateChange(A, partials, det, searched)


# -- normalization of (I3)-type bounds -----------------------------------

def sup_norm_on_ball(F: Poly, ball: PAdicBall) -> Fraction:
    """Upper bound for sup_B |F|: |F(c + p^k y)| <= max of coefficient norms."""
    g = F.affine_substitute(ball.center, Fraction(ball.p) ** ball.k)
    v = g.min_valuation(ball.p)
    return Fraction(0) if v == math.inf else Fraction(ball.p) ** (-v)


@dataclass
class NormalizationCheck:
    value_bound: Fraction
    gradient_bound: Fraction
    holds: bool
    notes: list = field(default_factory=list)


def check_normalization(F: AnalyticMap) -> NormalizationCheck:
    """Certify max_i sup_U |f_i| <= 1 and sup_U ||grad f_i|| <= 1."""
    vb = max(sup_norm_on_ball(c, F.domain) for c in F.components)
    gb = max(sup_norm_on_ball(g, F.domain) for c in F.components for g in c.gradient())
    return NormalizationCheck(vb, gb, vb <= 1 and gb <= 1)


def normalize_scaling(F: AnalyticMap) -> AnalyticMap:
    """Multiply F by the smallest power of p that makes the bounds of
    :func:`check_normalization` hold; the factor is kept in ``rescaled_by``."""
    chk = check_normalization(F)
    worst = max(chk.value_bound, chk.gradient_bound)
    if worst <= 1:
        return F
    e = vp(worst, F.p)       # worst = p^e, and |p^e|_p = p^-e
    fac = Fraction(F.p) ** e
    return AnalyticMap(F.p, tuple(c * fac for c in F.components), F.domain,
                       name=F.name, rescaled_by=F.rescaled_by * fac)
