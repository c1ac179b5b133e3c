"""Sparse multivariate polynomials with exact rational coefficients."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .padic import PAdicNumber, vp


def _add_idx(a: tuple, b: tuple) -> tuple:
    return tuple(x + y for x, y in zip(a, b))


class Poly:
    """Polynomial in ``nvars`` variables, ``{exponent tuple: Fraction}``.

    Evaluation is generic: it works over ints, Fractions and PAdicNumbers.
    """

    __slots__ = ("nvars", "coeffs")

    def __init__(self, nvars: int, coeffs: Mapping[Sequence[int], object] | None = None):
        self.nvars = nvars
        out = {}
        for idx, c in (coeffs or {}).items():
            idx = tuple(int(i) for i in idx)
            if len(idx) != nvars or any(i < 0 for i in idx):
                raise ValueError(f"bad exponent {idx} for {nvars} variables")
            c = Fraction(c)
            if c:
                out[idx] = out.get(idx, Fraction(0)) + c
        self.coeffs = {k: v for k, v in out.items() if v}

    # -- constructors ---------------------------------------------------
    @classmethod
    def const(cls, nvars: int, c) -> "Poly":
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def var(cls, nvars: int, i: int) -> "Poly":
        idx = [0] * nvars
        idx[i] = 1
        return cls(nvars, {tuple(idx): 1})

    @classmethod
    def univariate(cls, coeffs: Sequence) -> "Poly":
        """From a low-to-high coefficient list."""
        return cls(1, {(i,): c for i, c in enumerate(coeffs)})

    # -- structure ------------------------------------------------------
    def degree(self) -> int:
        return max((sum(i) for i in self.coeffs), default=-1)

    def is_zero(self) -> bool:
        return not self.coeffs

    def constant_term(self) -> Fraction:
        return self.coeffs.get((0,) * self.nvars, Fraction(0))

    def __eq__(self, other):
        if isinstance(other, Poly):
            return self.nvars == other.nvars and self.coeffs == other.coeffs
        if isinstance(other, (int, Fraction)):
            return self == Poly.const(self.nvars, other)
        return NotImplemented

    def __hash__(self):
        return hash((self.nvars, frozenset(self.coeffs.items())))

    def __repr__(self):
        if not self.coeffs:
            return "Poly(0)"
        terms = []
        for idx, c in sorted(self.coeffs.items()):
            mono = "*".join(f"x{j}^{e}" if e > 1 else f"x{j}"
                            for j, e in enumerate(idx) if e)
            terms.append(f"{c}" + (f"*{mono}" if mono else ""))
        return "Poly(" + " + ".join(terms) + ")"

    # -- ring operations ----------------------------------------------
    def _lift(self, other) -> "Poly":
        if isinstance(other, Poly):
            if other.nvars != self.nvars:
                raise ValueError("variable count mismatch")
            return other
        return Poly.const(self.nvars, other)

    def __add__(self, other):
        other = self._lift(other)
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, Fraction(0)) + v
        return Poly(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.nvars, {k: -v for k, v in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Poly):
            c = Fraction(other)
            return Poly(self.nvars, {k: v * c for k, v in self.coeffs.items()})
        other = self._lift(other)
        out: dict = {}
        for k1, v1 in self.coeffs.items():
            for k2, v2 in other.coeffs.items():
                k = _add_idx(k1, k2)
                out[k] = out.get(k, Fraction(0)) + v1 * v2
        return Poly(self.nvars, out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = Poly.const(self.nvars, 1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    # -- calculus -------------------------------------------------------
    def diff(self, i: int, k: int = 1) -> "Poly":
        out = {}
        for idx, c in self.coeffs.items():
            e = idx[i]
            if e < k:
                continue
            new = list(idx)
            new[i] = e - k
            out[tuple(new)] = c * math.perm(e, k)
        return Poly(self.nvars, out)

    def partial(self, beta: Sequence[int]) -> "Poly":
        out = self
        for i, k in enumerate(beta):
            if k:
                out = out.diff(i, k)
        return out

    def gradient(self) -> list["Poly"]:
        return [self.diff(i) for i in range(self.nvars)]

    # -- evaluation / substitution -------------------------------------
    def __call__(self, *xs):
        if len(xs) == 1 and isinstance(xs[0], (tuple, list)):
            xs = tuple(xs[0])
        if len(xs) != self.nvars:
            raise ValueError(f"expected {self.nvars} arguments")
        cache = [{0: 1} for _ in xs]

        def power(j, e):
            got = cache[j].get(e)
            if got is None:
                got = xs[j] ** e
                cache[j][e] = got
            return got

        total = None
        for idx, c in self.coeffs.items():
            term = None
            for j, e in enumerate(idx):
                if e:
                    term = power(j, e) if term is None else term * power(j, e)
            if term is None:
                term = c
            elif c != 1:
                term = term * c
            total = term if total is None else total + term
        if total is None:
            return Fraction(0)
        return total

    def eval_padic(self, xs: Sequence[PAdicNumber]) -> PAdicNumber:
        """Evaluation with PAdicNumber arguments; the result carries tracked precision."""
        p = xs[0].p
        val = self(*xs)
        if not isinstance(val, PAdicNumber):
            val = PAdicNumber.from_rational(val, p, max(x.N for x in xs) or 1)
        return val

    def compose(self, subs: Sequence["Poly"]) -> "Poly":
        """Substitute ``x_j -> subs[j]`` (all in the same number of variables)."""
        if len(subs) != self.nvars:
            raise ValueError("need one substitution per variable")
        nv = subs[0].nvars
        out = Poly(nv)
        cache: list[dict] = [dict() for _ in subs]
        for idx, c in self.coeffs.items():
            term = Poly.const(nv, c)
            for j, e in enumerate(idx):
                if e:
                    pw = cache[j].get(e)
                    if pw is None:
                        pw = subs[j] ** e
                        cache[j][e] = pw
                    term = term * pw
            out = out + term
        return out

    def affine_substitute(self, center: Sequence, scale) -> "Poly":
        """g(y) = f(center + scale * y)."""
        subs = [Poly(self.nvars, {(0,) * self.nvars: c}) + Poly.var(self.nvars, j) * scale
                for j, c in enumerate(center)]
        return self.compose(subs)

    def linear_substitute(self, A: Sequence[Sequence]) -> "Poly":
        """g(y) = f(A y) for a square matrix A."""
        d = self.nvars
        subs = [Poly(d, {tuple(1 if t == k else 0 for t in range(d)): A[j][k] for k in range(d)})
                for j in range(d)]
        return self.compose(subs)

    def min_valuation(self, p: int, skip_constant: bool = False) -> int | float:
        zero = (0,) * self.nvars
        return min((vp(c, p) for k, c in self.coeffs.items()
                    if not (skip_constant and k == zero)), default=math.inf)

    def to_record(self) -> dict:
        return {",".join(map(str, k)): str(v) for k, v in sorted(self.coeffs.items())}

    @classmethod
    def from_record(cls, nvars: int, rec: Mapping[str, object]) -> "Poly":
        coeffs = {}
        for key, val in rec.items():
            idx = tuple(int(t) for t in str(key).split(",")) if str(key).strip() else ()
            coeffs[idx] = Fraction(str(val))
        return cls(nvars, coeffs)


def monomials(nvars: int, max_degree: int) -> Iterable[tuple]:
    """All exponent tuples of total degree <= max_degree, graded order."""
    def rec(prefix, left, slots):
        if slots == 1:
            yield prefix + (left,)
            return
        for e in range(left, -1, -1):
            yield from rec(prefix + (e,), left - e, slots - 1)

    for deg in range(max_degree + 1):
        yield from rec((), deg, nvars)
