"""Approximating functions and membership tests for the approximation sets.

A point of Q_S^m is an :class:`SAdicVector` whose component at each place is
the tuple of its m coordinates (Fractions, or PAdicNumbers at finite places).
The map f is given by its coordinate polynomials and is the same polynomial
at every place; Theta is a Poly, a dict ``{place: Poly}`` or None.

Comparison directions, as used by the predicates below:

    predicate              comparison
    is_approximable        |a0 + a.f(x) + Theta(x)|_S^l  <=  Psi
    phi_membership         |a0 + a.f(x)|_p  <  delta Q^-(n+1),  ||(a0, a)|| <= Q
    derivative_split       large iff ||grad||_nu  >  ||a||_S^phi(nu) at every place
    I-set                  <  lambda Psi0(2^t);  <  lambda r_nu(t);
                           2^t_i <= max(1, |a_i|_S) <= 2^(t_i+1)
    H-set                  <  2^l lambda Psi0(2^t);  <  2 lambda r_nu(t);
                           |a_i|_S <= 2^(t_i+2)

The archimedean gradient norm is Euclidean, finite-place norms are sup norms.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Callable, Mapping, Sequence

import mpmath
import numpy as np

from .lattice import (BudgetExceeded, InvariantError, build_gamma, first_minimum,
                      points_in_box, smallness_exponent, _count_in_class, _residue, _sup)
from .maps import AnalyticMap
from .padic import INF, PAdicNumber, SAdicVector, norm_place, quasinorm_v, value_norm, vp
from .poly import Poly

DPS = 50


class IndeterminateComparison(ArithmeticError):
    """A floating comparison landed too close to a tie to be trusted."""


# -- exact comparisons with real powers -----------------------------------

def cmp_power(y, coef, base, exp) -> int:
    """Sign of y - coef * base^exp for rationals y >= 0, coef > 0, base > 0."""
    y, coef, base, exp = Fraction(y), Fraction(coef), Fraction(base), Fraction(exp)
    if coef <= 0 or base <= 0:
        raise ValueError("coef and base must be positive")
    if y <= 0:
        return -1
    z = y / coef
    s, r = exp.denominator, exp.numerator
    lhs, rhs = z ** s, base ** r
    return (lhs > rhs) - (lhs < rhs)


@dataclass(frozen=True)
class RealPower:
    """coef * base^exp, a positive real compared exactly against rationals."""

    coef: Fraction
    base: Fraction = Fraction(2)
    exp: Fraction = Fraction(0)

    def __mul__(self, other) -> "RealPower":
        if isinstance(other, RealPower):
            if other.base != self.base:
                raise ValueError("bases differ")
            return RealPower(self.coef * other.coef, self.base, self.exp + other.exp)
        return RealPower(self.coef * Fraction(other), self.base, self.exp)

    __rmul__ = __mul__

    def squared(self) -> "RealPower":
        return RealPower(self.coef ** 2, self.base, 2 * self.exp)

    def __float__(self):
        return float(self.coef) * float(self.base) ** float(self.exp)

    def gt(self, y) -> bool:
        """self > y."""
        return cmp_power(y, self.coef, self.base, self.exp) < 0

    def ge(self, y) -> bool:
        return cmp_power(y, self.coef, self.base, self.exp) <= 0

    def __str__(self):
        return f"{self.coef}*{self.base}^({self.exp})"


def _as_mpf(v):
    if isinstance(v, Fraction):
        return mpmath.mpf(v.numerator) / v.denominator
    return mpmath.mpf(v)


def le_value(lhs, rhs) -> bool:
    """lhs <= rhs, exact for rationals, guarded at 50 digits otherwise."""
    if isinstance(rhs, RealPower):
        return rhs.ge(lhs)
    if isinstance(lhs, (int, Fraction)) and isinstance(rhs, (int, Fraction)):
        return Fraction(lhs) <= Fraction(rhs)
    with mpmath.workdps(DPS):
        a, b = _as_mpf(lhs), _as_mpf(rhs)
        if abs(a - b) <= mpmath.mpf(10) ** (-40) * max(abs(b), mpmath.mpf(10) ** (-300)):
            raise IndeterminateComparison(f"{lhs} vs {rhs} too close to call")
        return bool(a <= b)


# -- approximating functions ----------------------------------------------

@dataclass(frozen=True)
class PowerLogPsi:
    """psi(k) = c * k^-e * log(k + shift)^-L (natural log).

    Exact Fractions when L == 0 and e is an integer; mpmath values otherwise.
    """

    c: Fraction = Fraction(1)
    e: Fraction = Fraction(1)
    L: int = 0
    shift: int = 1

    def __post_init__(self):
        object.__setattr__(self, "c", Fraction(self.c))
        object.__setattr__(self, "e", Fraction(self.e))
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.L < 0 or self.shift < 1:
            raise ValueError("need L >= 0 and shift >= 1")

    def __call__(self, k):
        if k <= 0:
            raise ValueError("psi is defined on positive heights")
        if self.L == 0 and self.e.denominator == 1 and isinstance(k, (int, Fraction)):
            return self.c / Fraction(k) ** int(self.e)
        with mpmath.workdps(DPS):
            kk = _as_mpf(k)
            return _as_mpf(self.c) * kk ** (-_as_mpf(self.e)) * \
                mpmath.log(kk + self.shift) ** (-self.L)

    def to_record(self) -> dict:
        return {"family": "power-log", "c": str(self.c), "e": str(self.e),
                "L": self.L, "shift": self.shift}


KINDS = ("psi", "multi", "quasinorm", "psi0")


@dataclass(frozen=True)
class ApproxFunction:
    """An approximating function on integer vectors.

    kind ``psi``: psi(max |a_i|); ``quasinorm``: psi(max |a_i|^(1/v_i));
    ``multi``: an arbitrary function of the vector; ``psi0``: the product
    prod_{a_i != 0} |a_i|_S^-1 over ``places``.
    """

    kind: str
    func: Callable | None = None
    weights: tuple | None = None
    places: tuple = (INF,)
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.kind != "psi0" and self.func is None:
            raise ValueError(f"kind {self.kind!r} needs a function")
        if self.kind == "quasinorm":
            if self.weights is None:
                raise ValueError("quasinorm kind needs weights")
            object.__setattr__(self, "weights", tuple(Fraction(w) for w in self.weights))

    def __call__(self, a):
        return psi_eval(self, a)

    def to_record(self) -> dict:
        rec = {"kind": self.kind, "name": self.name,
               "places": [str(p) for p in self.places]}
        if hasattr(self.func, "to_record"):
            rec["psi"] = self.func.to_record()
        if self.weights is not None:
            rec["weights"] = [str(w) for w in self.weights]
        return rec


def psi0_value(a: Sequence[int], places: Sequence) -> Fraction:
    """prod over nonzero a_i of |a_i|_S^-1."""
    out = Fraction(1)
    for ai in a:
        if ai:
            out /= max(norm_place(ai, pl) for pl in places)
    return out


def psi_eval(Psi: ApproxFunction, a: Sequence[int]):
    a = tuple(int(v) for v in a)
    if Psi.kind == "psi0":
        return psi0_value(a, Psi.places)
    if Psi.kind == "multi":
        return Psi.func(a)
    if not any(a):
        raise ValueError("approximating function is undefined at the zero vector")
    if Psi.kind == "psi":
        return Psi.func(max(abs(v) for v in a))
    if len(Psi.weights) != len(a):
        raise ValueError("weight vector length mismatch")
    return Psi.func(quasinorm_v(a, Psi.weights))


def power_psi(e, c=1, L: int = 0, places=(INF,), shift: int = 1) -> ApproxFunction:
    """Psi(a) = psi(||a||) with psi(k) = c k^-e log(k + shift)^-L."""
    fn = PowerLogPsi(Fraction(c), Fraction(e), L, shift)
    return ApproxFunction("psi", fn, places=tuple(places),
                          name=f"{c}*k^-{e}" + (f"*log(k+{shift})^-{L}" if L else ""))


def sadic_int_norm(a: int, places: Sequence) -> Fraction:
    return max(norm_place(a, pl) for pl in places)


def check_monotone(Psi: ApproxFunction, n: int, trials: int = 200, height: int = 50,
                   seed: int = 0) -> list[tuple]:
    """Spot-check componentwise monotonicity on random comparable pairs.

    Returns the pairs (a, a') with |a_i|_S <= |a'_i|_S but Psi(a) < Psi(a').
    """
    rng = random.Random(seed)
    bad = []
    for _ in range(trials):
        a = [rng.randint(-height, height) for _ in range(n)]
        i = rng.randrange(n)
        b = list(a)
        b[i] = rng.randint(-height, height)
        if sadic_int_norm(a[i], Psi.places) > sadic_int_norm(b[i], Psi.places):
            a, b = b, a
        if not any(a) or not any(b):
            continue
        if not le_value(psi_eval(Psi, b), psi_eval(Psi, a)):
            bad.append((tuple(a), tuple(b)))
    return bad


def psi0_domination(Psi: ApproxFunction, vectors: Sequence[Sequence[int]]) -> list[tuple]:
    """Vectors where Psi(a) < Psi0(a) fails (Psi0 over the same places)."""
    bad = []
    for a in vectors:
        if not le_value(psi_eval(Psi, a), psi0_value(a, Psi.places)) or \
                psi_eval(Psi, a) == psi0_value(a, Psi.places):
            bad.append(tuple(a))
    return bad


def is_nonincreasing(psi: Callable, horizon: int) -> bool:
    return all(le_value(psi(k + 1), psi(k)) for k in range(1, horizon))


# -- points and linear forms ----------------------------------------------

def diagonal_point(places: Sequence, coords) -> SAdicVector:
    """The same rational coordinates at every place."""
    coords = tuple(Fraction(c) for c in (coords if isinstance(coords, (list, tuple)) else [coords]))
    return SAdicVector(tuple(places), {pl: coords for pl in places})


def _components(f) -> tuple:
    if isinstance(f, AnalyticMap):
        return f.components
    return tuple(f)


def _theta_at(theta, place) -> Poly | None:
    if theta is None:
        return None
    if isinstance(theta, Mapping):
        return theta.get(place)
    if isinstance(theta, AnalyticMap):
        return theta.scalar()
    return theta


def _as_coords(v) -> tuple:
    return tuple(v) if isinstance(v, (list, tuple)) else (v,)


def form_value(x: SAdicVector, place, a0, a: Sequence[int], f, theta=None):
    """a0 + a.f(x_nu) + Theta_nu(x_nu) at one place."""
    xs = _as_coords(x.components[place])
    total = Fraction(a0)
    for ai, fi in zip(a, _components(f)):
        if ai:
            total = fi(*xs) * ai + total
    th = _theta_at(theta, place)
    if th is not None:
        total = th(*xs) + total
    return total


def form_norm(x: SAdicVector, a0, a: Sequence[int], f, theta=None) -> Fraction:
    """|a0 + a.f(x) + Theta(x)|_S."""
    return max(value_norm(form_value(x, pl, a0, a, f, theta), pl) for pl in x.places)


def gradient_norm(x: SAdicVector, place, a: Sequence[int], f, theta=None) -> tuple[Fraction, bool]:
    """Norm of grad(a.f_nu + Theta_nu) at x_nu.

    Returns (value, squared): at the real place the squared Euclidean norm,
    elsewhere the sup norm.
    """
    xs = _as_coords(x.components[place])
    comps = _components(f)
    m = comps[0].nvars
    g = Poly(m)
    for ai, fi in zip(a, comps):
        if ai:
            g = g + fi * ai
    th = _theta_at(theta, place)
    if th is not None:
        g = g + th
    vals = [gi(*xs) for gi in g.gradient()]
    if place == INF:
        return sum((Fraction(v) ** 2 for v in vals), Fraction(0)), True
    return max((value_norm(v, place) for v in vals), default=Fraction(0)), False


def _ineq_lt(value: Fraction, squared: bool, bound) -> bool:
    """value < bound, where ``value`` may be a squared norm."""
    if isinstance(bound, RealPower):
        return (bound.squared() if squared else bound).gt(value)
    bound = Fraction(bound)
    return value < (bound * bound if squared else bound)


def is_approximable(x: SAdicVector, a0: int, a: Sequence[int], Psi: ApproxFunction,
                    f, theta=None) -> bool:
    """|a0 + a.f(x) + Theta(x)|_S^l <= Psi(a~) (no infinite place) or Psi(a)."""
    lhs = form_norm(x, a0, a, f, theta) ** x.l
    arg = tuple(a) if INF in x.places else (int(a0), *a)
    return le_value(lhs, psi_eval(Psi, arg))


# -- solution search ------------------------------------------------------

@dataclass
class SearchResult:
    solutions: list
    T: int
    partial: bool = False
    method: str = "exact"

    def rows(self) -> list[list]:
        return [list(s) for s in self.solutions]


def _nonzero_ok(a0: int, a: Sequence[int], convention: str) -> bool:
    return any(a) if convention == "a" else (a0 != 0 or any(a))


def _threshold_exponent(Psi: ApproxFunction, h: int, p: int, kmax: int = 200) -> int:
    """Smallest k >= 0 with p^-k <= psi(h)."""
    val = Psi.func(h)
    k = 0
    while not le_value(Fraction(1, p ** k), val):
        k += 1
        if k > kmax:
            raise BudgetExceeded("approximating function too small for the p-adic fast path")
    return k


def solution_search(x: SAdicVector, Psi: ApproxFunction, f, T: int, theta=None,
                    nonzero: str = "a", budget: int = 20_000_000,
                    fast: bool = True) -> SearchResult:
    """All (a0, a) with height of a at most T solving the approximation inequality.

    Without the real place the height bound covers (a0, a); with it, a0 runs
    over the integers for which the real part can be small enough.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if nonzero not in ("a", "a0a"):
        raise ValueError("nonzero convention is 'a' or 'a0a'")
    n = len(_components(f))
    if fast and x.places and len(x.places) == 1 and x.places[0] != INF \
            and Psi.kind == "psi":
        try:
            return _search_padic_fast(x, Psi, f, T, theta, nonzero)
        except (BudgetExceeded, ValueError, OverflowError):
            pass
    sols = []
    count = 0
    partial = False
    has_inf = INF in x.places
    for a in product(range(-T, T + 1), repeat=n):
        count += 1
        if count > budget:
            partial = True
            break
        if has_inf:
            if not any(a):
                continue
            bound = psi_eval(Psi, a)
            R = float(_as_mpf(bound)) ** (1.0 / x.l) if not isinstance(bound, RealPower) \
                else float(bound) ** (1.0 / x.l)
            v = form_value(x, INF, 0, a, f, theta)
            lo = math.floor(-v - Fraction(R)) - 1
            hi = math.ceil(-v + Fraction(R)) + 1
            a0_range = range(lo, hi + 1)
        else:
            a0_range = range(-T, T + 1)
        for a0 in a0_range:
            if not _nonzero_ok(a0, a, nonzero):
                continue
            if is_approximable(x, a0, a, Psi, f, theta):
                sols.append((a0, *a))
    return SearchResult(sorted(sols), T, partial, "exact")


def _search_padic_fast(x: SAdicVector, Psi: ApproxFunction, f, T: int, theta,
                       nonzero: str) -> SearchResult:
    """S = {p}: |L|_p <= psi(h) iff L = 0 mod p^k(h); vectorized over a."""
    p = x.places[0]
    xs = _as_coords(x.components[p])
    comps = _components(f)
    n = len(comps)
    ks = [0] + [_threshold_exponent(Psi, h, p) for h in range(1, T + 1)]
    K = max(ks)
    mod = p ** K
    if (n + 2) * T * mod >= 2 ** 62:
        raise OverflowError("residues too large for int64")
    ys = [_residue(fi(*xs), p, K) if K else 0 for fi in comps]
    th = _theta_at(theta, p)
    c = _residue(th(*xs), p, K) if (th is not None and K) else 0
    pk = np.array([p ** k for k in ks], dtype=np.int64)
    rng = np.arange(-T, T + 1, dtype=np.int64)
    grids = np.meshgrid(*[rng] * n, indexing="ij")
    A = np.stack([g.ravel() for g in grids], axis=1)
    partial_form = (A * np.array(ys, dtype=np.int64)).sum(axis=1) + c
    hA = np.abs(A).max(axis=1)
    a_nonzero = np.any(A != 0, axis=1)
    sols = []
    for a0 in range(-T, T + 1):
        h = np.maximum(hA, abs(a0))
        ok = h >= 1
        hh = np.where(ok, h, 1)
        L = partial_form + a0
        ok &= (L % pk[hh]) == 0
        ok &= a_nonzero if nonzero == "a" else (a_nonzero | (a0 != 0))
        for row in A[ok]:
            sols.append((a0, *(int(v) for v in row)))
    return SearchResult(sorted(sols), T, False, "padic-vectorized")


def window_witness(y: Sequence, p: int, Psi: ApproxFunction, t: int) -> tuple | None:
    """A solution (a0, a) with a != 0 and height in [2^t, 2^(t+1)) for S = {p}.

    |a0 + a.y|_p <= psi(height).  The search enumerates the coarsest congruence
    lattice needed in the window, then checks each point's own threshold.
    """
    lo, hi = 2 ** t, 2 ** (t + 1) - 1
    k_lo = _threshold_exponent(Psi, lo, p)
    if k_lo == 0:
        pts = None
    else:
        L = build_gamma(list(y), k_lo, p, divisible=False)
        pts = points_in_box(L.basis, hi)
    if pts is None:
        # every integral form qualifies at the bottom of the window
        pts = [(a0, *a) for a0 in range(-hi, hi + 1)
               for a in product(range(-hi, hi + 1), repeat=len(y))]
    best = None
    for v in pts:
        h = _sup(v)
        if h < lo or not any(v[1:]):
            continue
        k = _threshold_exponent(Psi, h, p)
        form = v[0] + sum(ai * _residue(yi, p, k) for ai, yi in zip(v[1:], y)) if k else 0
        if k == 0 or form % p ** k == 0:
            if best is None or (h, v) < (_sup(best), best):
                best = v
    return best


# -- the set Phi^f(Q, delta) ----------------------------------------------

@dataclass
class PhiVerdict:
    member: bool
    method: str
    j: int
    witness: tuple | None = None
    routes: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {"member": self.member, "method": self.method, "j": self.j,
                "witness": list(self.witness) if self.witness else None,
                "routes": self.routes}


def _phi_exhaustive(y_res: Sequence[int], p: int, j: int, Qi: int,
                    budget: int) -> tuple | None:
    n = len(y_res)
    pj = p ** j
    if (2 * Qi + 1) ** n > budget:
        raise BudgetExceeded("exhaustive Phi search exceeds the budget")
    if (n + 1) * Qi * pj >= 2 ** 62:
        raise OverflowError("residues too large for int64")
    rng = np.arange(-Qi, Qi + 1, dtype=np.int64)
    # residue of -a.y mod p^j, built axis by axis by broadcasting
    r = np.zeros((1,) * n, dtype=np.int64)
    for i, yi in enumerate(y_res):
        shape = [1] * n
        shape[i] = len(rng)
        r = (r - ((rng * (int(yi) % pj)) % pj).reshape(shape)) % pj
    r = r.ravel()
    count = (Qi - r) // pj - (-Qi - 1 - r) // pj
    count[len(r) // 2] -= 1                  # the zero vector sits at the centre
    if not (count > 0).any():
        return None
    # prefer a witness of least height: nearest representative of a0
    a0c = np.where(r <= pj - r, r, r - pj)
    ha = np.abs(rng)
    height = np.zeros((1,) * n, dtype=np.int64)
    for i in range(n):
        shape = [1] * n
        shape[i] = len(rng)
        height = np.maximum(height, ha.reshape(shape))
    height = np.maximum(height.ravel(), np.abs(a0c))
    good = (count > 0) & (np.abs(a0c) <= Qi)
    good[len(r) // 2] = False
    if good.any():
        pick = int(np.argmin(np.where(good, height, np.iinfo(np.int64).max)))
    else:
        pick = int(np.nonzero(count > 0)[0][0])
    a = [int(v) - Qi for v in np.unravel_index(pick, (2 * Qi + 1,) * n)]
    r0 = int(r[pick])
    cands = [r0 + pj * s for s in range(-(Qi // pj) - 2, Qi // pj + 3)]
    a0 = min((c for c in cands if abs(c) <= Qi and (c or any(a))), key=lambda c: (abs(c), c))
    return (a0, *a)


def phi_membership(x, Q, delta, f: AnalyticMap, method: str = "both",
                   budget: int = 50_000_000) -> PhiVerdict:
    """Is there a nonzero (a0, a) with ||(a0, a)|| <= Q and |a0 + a.f(x)|_p < delta Q^-(n+1)?

    ``exhaustive`` scans a and solves for a0 by congruence; ``lattice`` tests
    whether the first minimum of the congruence lattice exceeds Q; ``both``
    runs the two and raises InvariantError if they disagree.
    """
    Q, delta = Fraction(Q), Fraction(delta)
    if not Q >= 1 or not 0 < delta < 1:
        raise ValueError("need Q >= 1 and 0 < delta < 1")
    if method not in ("exhaustive", "lattice", "both"):
        raise ValueError(f"unknown method {method!r}")
    p = f.p
    xs = _as_coords(x.components[p]) if isinstance(x, SAdicVector) else _as_coords(x)
    y = [fi(*xs) for fi in f.components]
    n = len(y)
    j = smallness_exponent(p, Q, delta, n)
    Qi = math.floor(Q)
    routes = {}
    witness = None
    if method in ("exhaustive", "both"):
        y_res = [_residue(v, p, j) for v in y]
        witness = _phi_exhaustive(y_res, p, j, Qi, budget)
        routes["exhaustive"] = witness is not None
    if method in ("lattice", "both"):
        L = build_gamma(y, j, p, divisible=False)
        v = first_minimum(L)
        routes["lattice"] = _sup(v) <= Qi
        if witness is None and routes["lattice"]:
            witness = tuple(v)
    if len(set(routes.values())) > 1:
        raise InvariantError(f"exhaustive and lattice Phi membership disagree at {xs}: {routes}")
    member = next(iter(routes.values()))
    return PhiVerdict(member, method, j, witness if member else None, routes)


# -- large / small derivative split ---------------------------------------

@dataclass
class DerivativeSplit:
    label: str                    # "large" or "small"
    small_places: tuple
    norms: dict                   # place -> (value, squared)
    a_norm: Fraction
    borderline: tuple = ()

    def to_record(self) -> dict:
        return {"label": self.label, "small_places": [str(p) for p in self.small_places],
                "norms": {str(k): {"value": str(v), "squared": s}
                          for k, (v, s) in self.norms.items()},
                "a_norm": str(self.a_norm), "borderline": [str(p) for p in self.borderline]}


def phi_exponent(place, eps) -> Fraction:
    eps = Fraction(eps)
    return 1 - eps if place == INF else -eps


def derivative_split(x: SAdicVector, a: Sequence[int], f, eps, theta=None) -> DerivativeSplit:
    """Large iff ||grad(a.f_nu + Theta_nu)(x_nu)||_nu > ||a||_S^phi(nu) at every place.

    Equality counts as small and is recorded in ``borderline``.
    """
    if not any(a):
        raise ValueError("a must be nonzero")
    A = max(sadic_int_norm(ai, x.places) for ai in a)
    small, border, norms = [], [], {}
    for pl in x.places:
        val, sq = gradient_norm(x, pl, a, f, theta)
        norms[pl] = (val, sq)
        e = phi_exponent(pl, eps) * (2 if sq else 1)
        c = cmp_power(val, 1, A, e) if A != 1 else ((val > 1) - (val < 1))
        if c <= 0:
            small.append(pl)
            if c == 0:
                border.append(pl)
    return DerivativeSplit("small" if small else "large", tuple(small), norms, A, tuple(border))


# -- transference sets ----------------------------------------------------

@dataclass(frozen=True)
class TransferenceParams:
    eps: Fraction
    delta: Fraction
    n: int
    t: tuple
    places: tuple = (INF,)
    alpha1: Fraction = Fraction(1)

    def __post_init__(self):
        for name in ("eps", "delta", "alpha1"):
            object.__setattr__(self, name, Fraction(getattr(self, name)))
        object.__setattr__(self, "t", tuple(int(v) for v in self.t))
        object.__setattr__(self, "places", tuple(self.places))
        l = len(self.places)
        if not 0 < self.eps < Fraction(1, 4 * (self.n + 1) * l * l):
            raise ValueError("need 0 < eps < 1/(4(n+1)l^2)")
        if not 0 < self.delta <= self.eps / 2:
            raise ValueError("need 0 < delta <= eps/2")
        if len(self.t) != self.n or any(v < 0 for v in self.t):
            raise ValueError("t must be a nonnegative multi-index of length n")
        if self.alpha1 <= 0:
            raise ValueError("alpha1 must be positive")

    @property
    def l(self) -> int:
        return len(self.places)

    @property
    def size(self) -> int:
        return sum(self.t)

    def phi_delta(self) -> RealPower:
        return RealPower(Fraction(1), Fraction(2), self.delta * self.size)

    def r(self, place) -> RealPower:
        if place == INF:
            return RealPower(Fraction(1), Fraction(2), (self.size + 1) * (1 - self.eps))
        return RealPower(Fraction(1), Fraction(2), -(self.size + 1) * self.eps)

    def psi0_dyadic(self) -> Fraction:
        return psi0_value([2 ** ti for ti in self.t], self.places)


@dataclass
class SetCheck:
    which: str
    conditions: dict
    member: bool

    def failed(self) -> list[str]:
        return [k for k, v in self.conditions.items() if not v]


def it_ht_membership(x: SAdicVector, params: TransferenceParams, alpha: Sequence[int],
                     lam, nu, which: str, f, theta=None) -> SetCheck:
    """Membership of x in I_t^nu(alpha, lambda) or H_t^nu(alpha, lambda)."""
    if which not in ("I", "H"):
        raise ValueError("which is 'I' or 'H'")
    if tuple(x.places) != params.places:
        raise ValueError("point and parameters use different places")
    if nu not in params.places:
        raise ValueError(f"place {nu} not in S")
    lam = lam if isinstance(lam, RealPower) else RealPower(Fraction(lam))
    a0, a = int(alpha[0]), [int(v) for v in alpha[1:]]
    l = params.l
    psi0 = params.psi0_dyadic()
    th = theta if which == "I" else None
    value = form_norm(x, a0, a, f, th) ** l
    gval, sq = gradient_norm(x, nu, a, f, th)
    norms = [sadic_int_norm(ai, params.places) for ai in a]
    if which == "I":
        c1 = (lam * psi0).gt(value)
        c2 = _ineq_lt(gval, sq, lam * params.r(nu))
        c3 = all(2 ** ti <= max(Fraction(1), na) <= 2 ** (ti + 1)
                 for ti, na in zip(params.t, norms))
    else:
        c1 = (lam * (Fraction(2) ** l * psi0)).gt(value)
        c2 = _ineq_lt(gval, sq, lam * (2 * params.r(nu)))
        c3 = all(na <= 2 ** (ti + 2) for ti, na in zip(params.t, norms))
    conds = {"form": c1, "gradient": c2, "dyadic": c3}
    return SetCheck(which, conds, all(conds.values()))


@dataclass
class IntersectionReport:
    alpha2: tuple
    checks: dict
    ok: bool

    def failed(self) -> list[str]:
        return [k for k, v in self.checks.items() if not v]

    def to_record(self) -> dict:
        return {"alpha2": list(self.alpha2), "checks": self.checks, "ok": self.ok}


def intersection_witness(x: SAdicVector, params: TransferenceParams, alpha: Sequence[int],
                         alpha_p: Sequence[int], nu, f, theta=None) -> IntersectionReport:
    """From x in I(alpha) and I(alpha') build alpha'' = alpha - alpha' and check H."""
    alpha, alpha_p = tuple(int(v) for v in alpha), tuple(int(v) for v in alpha_p)
    if alpha == alpha_p:
        raise ValueError("alpha and alpha' must be distinct")
    if not params.size > Fraction(params.l) / (1 - params.eps / 2):
        raise ValueError("need |t| > l / (1 - eps/2)")
    lam = params.phi_delta()
    for al in (alpha, alpha_p):
        chk = it_ht_membership(x, params, al, lam, nu, "I", f, theta)
        if not chk.member:
            raise ValueError(f"x is not in I_t for {al}: failed {chk.failed()}")
    a2 = tuple(u - v for u, v in zip(alpha, alpha_p))
    h = it_ht_membership(x, params, a2, lam, nu, "H", f, theta)
    checks = dict(h.conditions)
    checks["a_nonzero"] = any(a2[1:])
    return IntersectionReport(a2, checks, all(checks.values()))


def synthetic_intersection_instance(rng: random.Random, p: int = 3, nu=None,
                                    eps=Fraction(1, 50), delta=Fraction(1, 200),
                                    with_theta: bool = True, tries: int = 200):
    """A point x on the Veronese curve (n = 2) in I_t(alpha) and I_t(alpha').

    Both forms vanish at u/q: a2 X^2 + a1 X + a0 = (qX - u)(cX + e).  The real
    coordinate is u/q plus a tiny shift; the p-adic one is u/q + p^K w.  For
    the p-adic gradient condition c u + q e = 0 mod p.  Theta (if used) is
    p k (qX - u)^2, which vanishes to second order at u/q.
    Returns (x, params, alpha, alpha', nu, f, theta).
    """
    places = (INF, p)
    nu = nu if nu is not None else rng.choice(places)
    f = [Poly(1, {(1,): 1}), Poly(1, {(2,): 1})]
    for _ in range(tries):
        t = (rng.randint(3, 8), rng.randint(3, 8))
        params = TransferenceParams(eps, delta, 2, t, places)
        q = rng.choice([1, 2, 4, 5, 7])
        u = rng.randint(-3 * q, 3 * q)
        if math.gcd(u, q) != 1 or q % p == 0:
            continue
        pairs = []
        for _ in range(400):
            c = rng.choice([-1, 1]) * rng.randint(1, 2 ** (t[1] + 1) // q + 1)
            a2 = q * c
            if not 2 ** t[1] <= abs(a2) <= 2 ** (t[1] + 1):
                continue
            # a1 = q e - u c in the window
            target = rng.choice([-1, 1]) * rng.randint(2 ** t[0], 2 ** (t[0] + 1))
            e = round(Fraction(target + u * c, q))
            a1 = q * e - u * c
            if not 2 ** t[0] <= abs(a1) <= 2 ** (t[0] + 1):
                continue
            if nu == p and (c * u + q * e) % p:
                continue
            alpha = (-u * e, a1, a2)
            if alpha not in pairs:
                pairs.append(alpha)
            if len(pairs) == 2:
                break
        if len(pairs) < 2:
            continue
        theta = None
        if with_theta:
            k = rng.randint(-2, 2)
            theta = Poly(1, {(2,): p * k * q * q, (1,): -2 * p * k * q * u, (0,): p * k * u * u})
        eta2 = params.phi_delta() * params.psi0_dyadic()    # bound on |L|_S^2
        K = 1
        while not eta2.gt(Fraction(1, p ** (2 * K))):
            K += 1
        w = rng.randint(1, p - 1)
        x_p = Fraction(u, q) + Fraction(p ** (K + 2)) * w
        scale = max(abs(v) for al in pairs for v in al) + 1
        hshift = Fraction(1, 2 ** (params.size + 8) * scale * q)
        x_inf = Fraction(u, q) + hshift
        x = SAdicVector(places, {INF: (x_inf,), p: (x_p,)})
        ok = all(it_ht_membership(x, params, al, params.phi_delta(), nu, "I", f, theta).member
                 for al in pairs)
        if ok:
            return x, params, pairs[0], pairs[1], nu, f, theta
    raise RuntimeError("no synthetic instance found")


# -- series audits --------------------------------------------------------

def transference_gammas(eps, delta, l: int, n: int, alpha1) -> tuple[Fraction, Fraction]:
    """Exponents of the geometric bounds in the two cases (real place, finite place)."""
    eps, delta, alpha1 = Fraction(eps), Fraction(delta), Fraction(alpha1)
    g1 = (eps - 2 * delta) * alpha1 / (l * (n + 1))
    g2 = (eps - 2 * delta + 1) * alpha1 / (l * (n + 1))
    return g1, g2


@dataclass
class SeriesAudit:
    gamma: Fraction
    case: int
    horizon: int
    partial: float
    total: float
    tail_lower: float
    tail_upper: float
    verdict: str             # "summable" or "gamma-nonpositive"
    bracket_ok: bool

    def to_record(self) -> dict:
        return {"case": self.case, "gamma": str(self.gamma), "horizon": self.horizon,
                "partial": self.partial, "total": self.total,
                "tail_lower": self.tail_lower, "tail_upper": self.tail_upper,
                "verdict": self.verdict, "bracket_ok": self.bracket_ok}


def series_audit(params: TransferenceParams, nu, horizon: int = 200) -> SeriesAudit:
    """sum over t in Z_{>=0}^n of 2^(-gamma |t|) against its closed form.

    With x = 2^-gamma the sum is (1-x)^-n; the terms with |t| = s number
    C(s+n-1, n-1).  For horizon H >= n the tail beyond H lies in
    [C(H+n, n-1) x^(H+1), C(H+n, n-1) x^(H+1) (1-x)^-n].
    """
    n, l = params.n, params.l
    g1, g2 = transference_gammas(params.eps, params.delta, l, n, params.alpha1)
    case, gamma = (1, g1) if nu == INF else (2, g2)
    if gamma <= 0:
        return SeriesAudit(gamma, case, horizon, math.inf, math.inf, math.nan, math.nan,
                           "gamma-nonpositive", False)
    H = max(horizon, n)
    with mpmath.workdps(DPS):
        x = mpmath.power(2, -_as_mpf(gamma))
        partial = mpmath.fsum(math.comb(s + n - 1, n - 1) * x ** s for s in range(H + 1))
        total = (1 - x) ** (-n)
        first = math.comb(H + n, n - 1) * x ** (H + 1)
        lower, upper = first, first * (1 - x) ** (-n)
        tail = total - partial
        slack = mpmath.mpf(10) ** (-(DPS - 10)) * total
        ok = lower - slack <= tail <= upper + slack
    return SeriesAudit(gamma, case, H, float(partial), float(total), float(lower),
                       float(upper), "summable", bool(ok))


@dataclass
class BorelCantelli:
    partial_sums: list        # (k, partial sum) at powers of two
    tail_lower: float
    tail_upper: float
    classification: str       # convergent / divergent / undecided
    exponent: Fraction | None
    log_power: int | None

    def to_record(self) -> dict:
        return {"partial_sums": [[k, float(s)] for k, s in self.partial_sums],
                "tail_lower": self.tail_lower, "tail_upper": self.tail_upper,
                "classification": self.classification,
                "exponent": None if self.exponent is None else str(self.exponent),
                "log_power": self.log_power}


def borel_cantelli_sum(psi: Callable, n: int, infinite_place: bool,
                       horizon: int = 2 ** 12) -> BorelCantelli:
    """Partial sums of sum k^w psi(k) (w = n, or n - 1 with the real place).

    For power-log psi the tail beyond the horizon H is bracketed by the
    integral test and the series classified; other psi are "undecided".
    """
    w = n - 1 if infinite_place else n
    sums = []
    with mpmath.workdps(30):
        s = mpmath.mpf(0)
        nxt = 1
        for k in range(1, horizon + 1):
            s += _as_mpf(Fraction(k) ** w) * _as_mpf(psi(k))
            if k == nxt:
                sums.append((k, s))
                nxt *= 2
        if sums[-1][0] != horizon:
            sums.append((horizon, s))
        fam = psi if isinstance(psi, PowerLogPsi) else getattr(psi, "func", None)
        if not isinstance(fam, PowerLogPsi):
            return BorelCantelli(sums, math.nan, math.nan, "undecided", None, None)
        sigma = fam.e - w          # term ~ c k^-sigma log(k+shift)^-L
        H = horizon
        c = _as_mpf(fam.c)
        Lp = fam.L
        if sigma > 1:
            upper = c * mpmath.power(H, 1 - _as_mpf(sigma)) / (_as_mpf(sigma) - 1) * \
                mpmath.log(H + fam.shift) ** (-Lp)
            lower = c * mpmath.power(H + 1, -_as_mpf(sigma)) * mpmath.log(H + 1 + fam.shift) ** (-Lp)
            cls = "convergent"
        elif sigma == 1 and Lp > 1:
            # 1/k <= (1 + shift)/(k + shift) for k >= 1; integrate in u = k + shift
            upper = c * (1 + fam.shift) * mpmath.log(H + fam.shift) ** (1 - Lp) / (Lp - 1)
            lower = c * mpmath.log(H + 1 + fam.shift) ** (1 - Lp) / (Lp - 1)
            cls = "convergent"
        else:
            upper = mpmath.inf
            lower = mpmath.inf
            cls = "divergent"
    return BorelCantelli(sums, float(lower), float(upper), cls, sigma, Lp)


@dataclass
class LowerOrder:
    grid: list               # t values (powers of two)
    values: list             # -log psi(t) / log t
    tail_inf: list           # inf over the grid from each point on
    estimate: object         # tail infimum over the upper half of the grid

    def to_record(self) -> dict:
        return {"grid": self.grid, "values": [str(v) for v in self.values],
                "tail_inf": [str(v) for v in self.tail_inf], "estimate": str(self.estimate)}


def _log2_exact(q: Fraction) -> Fraction | None:
    num, den = q.numerator, q.denominator
    if num & (num - 1) or den & (den - 1):
        return None
    return Fraction(num.bit_length() - den.bit_length())


def lower_order(psi: Callable, horizon: int = 2 ** 20) -> LowerOrder:
    """-log psi(t)/log t on t = 2, 4, ..., horizon, with running tail infima.

    Exact when psi(t) is a power of two; 50-digit floats otherwise.
    """
    kmax = max(1, int(math.log2(horizon)))
    grid, vals = [], []
    for k in range(1, kmax + 1):
        t = 2 ** k
        v = psi(t)
        exact = _log2_exact(Fraction(v)) if isinstance(v, (int, Fraction)) else None
        if exact is not None:
            val = -exact / k
        else:
            with mpmath.workdps(DPS):
                val = -mpmath.log(_as_mpf(v)) / mpmath.log(t)
        grid.append(t)
        vals.append(val)
    tails = []
    cur = None
    for v in reversed(vals):
        cur = v if cur is None or v < cur else cur
        tails.append(cur)
    tails.reverse()
    return LowerOrder(grid, vals, tails, tails[len(tails) // 2])
