"""
Finite-precision p-adic numbers, S-adic vectors and p-adic balls.

A p-adic value is stored as ``p^v * unit`` where ``unit`` is known modulo
``p^N``.  Norms are exact rationals; nothing in here touches floats except
``quasinorm_v`` when an irrational root cannot be avoided.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Iterable, Sequence, Union

DEFAULT_PRECISION = 64
INF = "inf"

Rational = Union[int, Fraction]


class PrecisionError(ArithmeticError):
    """Raised when an operation would need digits the inputs do not carry."""


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p < 4:
        return True
    if p % 2 == 0:
        return False
    return all(p % d for d in range(3, math.isqrt(p) + 1, 2))


def _check_prime(p: int) -> None:
    if not isinstance(p, int) or not is_prime(p):
        raise ValueError(f"invalid prime {p!r}")


def vp_int(n: int, p: int) -> int | float:
    """Valuation of an integer; ``math.inf`` for zero."""
    if n == 0:
        return math.inf
    n = abs(n)
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def vp(x: Rational, p: int) -> int | float:
    x = Fraction(x)
    if x == 0:
        return math.inf
    return vp_int(x.numerator, p) - vp_int(x.denominator, p)


def norm_p(x: Rational, p: int) -> Fraction:
    """|x|_p as an exact rational (0 for x = 0)."""
    v = vp(x, p)
    if v == math.inf:
        return Fraction(0)
    return Fraction(p) ** (-v)


def norm_place(x: Rational, place) -> Fraction:
    if place == INF:
        return abs(Fraction(x))
    return norm_p(x, place)


def unit_part(x: Rational, p: int) -> tuple[int | float, Fraction]:
    x = Fraction(x)
    v = vp(x, p)
    if v == math.inf:
        return v, Fraction(0)
    return v, x / Fraction(p) ** v


def mod_rational(x: Rational, m: int) -> int:
    """Residue of a rational with denominator coprime to ``m``."""
    x = Fraction(x)
    return x.numerator * pow(x.denominator, -1, m) % m if m > 1 else 0


@dataclass(frozen=True)
class PAdicNumber:
    """``p^v * unit`` with the unit known modulo ``p^N``.

    ``v = math.inf`` marks a certified zero (then ``unit = 0``).
    """

    p: int
    v: int | float
    unit: int
    N: int

    def __post_init__(self):
        if self.v == math.inf:
            if self.unit != 0:
                raise ValueError("certified zero must have unit 0")
            return
        if self.N < 1:
            raise ValueError("precision must be positive")
        if not (0 < self.unit < self.p ** self.N) or self.unit % self.p == 0:
            raise ValueError(f"unit {self.unit} is not a unit mod {self.p}^{self.N}")

    # -- constructors -------------------------------------------------
    @classmethod
    def zero(cls, p: int) -> "PAdicNumber":
        return cls(p, math.inf, 0, 0)

    @classmethod
    def from_rational(cls, q: Rational, p: int, N: int = DEFAULT_PRECISION) -> "PAdicNumber":
        return padic_from_rational(q, p, N)

    # -- basic properties ---------------------------------------------
    @property
    def is_zero(self) -> bool:
        return self.v == math.inf

    @property
    def abs_precision(self) -> int | float:
        return math.inf if self.is_zero else self.v + self.N

    def norm(self) -> Fraction:
        if self.is_zero:
            return Fraction(0)
        return Fraction(self.p) ** (-self.v)

    def to_fraction(self) -> Fraction:
        """The canonical rational representative ``p^v * unit``."""
        if self.is_zero:
            return Fraction(0)
        return Fraction(self.p) ** self.v * self.unit

    def residue(self, k: int) -> int:
        """Integer representative mod p^k; needs v >= 0 and k <= abs_precision."""
        if k > self.abs_precision:
            raise PrecisionError(f"need {k} digits, have {self.abs_precision}")
        if self.is_zero:
            return 0
        if self.v < 0:
            raise ValueError("value is not p-integral")
        return (self.unit * self.p ** self.v) % self.p ** k

    def digits(self) -> list[int]:
        out, u = [], self.unit
        for _ in range(self.N if not self.is_zero else 0):
            u, d = divmod(u, self.p)
            out.append(d)
        return out

    # -- arithmetic ---------------------------------------------------
    def _coerce(self, other) -> "PAdicNumber":
        if isinstance(other, PAdicNumber):
            if other.p != self.p:
                raise ValueError("primes differ")
            return other
        if isinstance(other, (int, Fraction)):
            q = Fraction(other)
            if q == 0:
                return PAdicNumber.zero(self.p)
            want = self.abs_precision if not self.is_zero else DEFAULT_PRECISION
            if want == math.inf:
                want = DEFAULT_PRECISION
            N = max(1, int(want - vp(q, self.p)), self.N or 1)
            return padic_from_rational(q, self.p, N)
        return NotImplemented

    def __add__(self, other):
        b = self._coerce(other)
        if b is NotImplemented:
            return b
        if self.is_zero:
            return b
        if b.is_zero:
            return self
        p = self.p
        vmin = min(self.v, b.v)
        absprec = min(self.abs_precision, b.abs_precision)
        m = p ** (absprec - vmin)
        s = (self.unit * p ** (self.v - vmin) + b.unit * p ** (b.v - vmin)) % m
        if s == 0:
            raise PrecisionError(
                f"sum cancels below known digits (|.| <= {p}^-{absprec})")
        w = vp_int(s, p)
        v = vmin + w
        N = absprec - v
        return PAdicNumber(p, v, (s // p ** w) % p ** N, N)

    __radd__ = __add__

    def __neg__(self):
        if self.is_zero:
            return self
        return PAdicNumber(self.p, self.v, (-self.unit) % self.p ** self.N, self.N)

    def __sub__(self, other):
        b = self._coerce(other)
        if b is NotImplemented:
            return b
        return self + (-b)

    def __rsub__(self, other):
        b = self._coerce(other)
        if b is NotImplemented:
            return b
        return b + (-self)

    def __mul__(self, other):
        b = self._coerce(other)
        if b is NotImplemented:
            return b
        if self.is_zero or b.is_zero:
            return PAdicNumber.zero(self.p)
        N = min(self.N, b.N)
        return PAdicNumber(self.p, self.v + b.v, self.unit * b.unit % self.p ** N, N)

    __rmul__ = __mul__

    def inverse(self) -> "PAdicNumber":
        if self.is_zero:
            raise ZeroDivisionError("inverse of certified zero")
        return PAdicNumber(self.p, -self.v, pow(self.unit, -1, self.p ** self.N), self.N)

    def __truediv__(self, other):
        b = self._coerce(other)
        if b is NotImplemented:
            return b
        return self * b.inverse()

    def __rtruediv__(self, other):
        b = self._coerce(other)
        if b is NotImplemented:
            return b
        return b * self.inverse()

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        out = padic_from_rational(1, self.p, self.N or DEFAULT_PRECISION)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __repr__(self):
        if self.is_zero:
            return f"PAdic(0, p={self.p})"
        return f"PAdic(p={self.p}, v={self.v}, unit={self.unit}, N={self.N})"

    # -- serialization ------------------------------------------------
    def to_record(self) -> dict:
        return {"p": self.p, "v": None if self.is_zero else self.v,
                "digits": self.digits(), "N": self.N}

    @classmethod
    def from_record(cls, rec: dict) -> "PAdicNumber":
        p = rec["p"]
        if rec["v"] is None:
            return cls.zero(p)
        unit = sum(d * p ** i for i, d in enumerate(rec["digits"]))
        return cls(p, rec["v"], unit, rec["N"])


def padic_from_rational(q: Rational, p: int, N: int = DEFAULT_PRECISION) -> PAdicNumber:
    _check_prime(p)
    if N < 1:
        raise ValueError("precision must be >= 1")
    q = Fraction(q)
    if q == 0:
        return PAdicNumber.zero(p)
    v, u = unit_part(q, p)
    return PAdicNumber(p, v, mod_rational(u, p ** N), N)


def padic_arith(a: PAdicNumber, b: PAdicNumber | None, op: str) -> PAdicNumber:
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    if op == "inv":
        return a.inverse()
    raise ValueError(f"unknown op {op!r}")


def as_padic(x, p: int, N: int = DEFAULT_PRECISION) -> PAdicNumber:
    if isinstance(x, PAdicNumber):
        return x
    return padic_from_rational(x, p, N)


def value_norm(x, place) -> Fraction:
    """Norm of a scalar (rational or PAdicNumber) at ``place``."""
    if isinstance(x, PAdicNumber):
        if place == INF:
            raise TypeError("p-adic value at the archimedean place")
        return x.norm()
    return norm_place(x, place)


def vec_norm(xs: Iterable, place) -> Fraction:
    return max((value_norm(x, place) for x in xs), default=Fraction(0))


@dataclass(frozen=True)
class SAdicVector:
    """Point of Q_S^n: one coordinate vector per place of S."""

    places: tuple
    components: dict

    def __post_init__(self):
        if set(self.components) != set(self.places):
            raise ValueError("components must cover exactly the places of S")
        for pl in self.places:
            if pl != INF:
                _check_prime(pl)

    @property
    def l(self) -> int:
        return len(self.places)

    def place_norm(self, place) -> Fraction:
        return vec_norm(self.components[place], place)

    def norm(self) -> Fraction:
        return sadic_norm(self)


def sadic_norm(x: SAdicVector) -> Fraction:
    return max(x.place_norm(pl) for pl in x.places)


def sadic_norm_int(a: int, places: Sequence) -> Fraction:
    """|a|_S for an integer embedded diagonally."""
    return max(norm_place(a, pl) for pl in places)


def _int_root(x: int, k: int) -> int:
    r = int(round(x ** (1.0 / k))) if x < 2 ** 1000 else int(x ** (1.0 / k))
    for c in (r - 1, r, r + 1):
        if c >= 0 and c ** k == x:
            return c
    return -1


def quasinorm_v(a: Sequence[int], v: Sequence[Rational]) -> Fraction | float:
    """max |a_i|^(1/v_i); exact when every root is rational."""
    v = [Fraction(w) for w in v]
    if len(v) != len(a):
        raise ValueError("weight vector length mismatch")
    if any(w <= 0 for w in v):
        raise ValueError("weights must be positive")
    if sum(v) != len(v):
        raise ValueError("weights must sum to n")
    best: Fraction | float = Fraction(0)
    for ai, w in zip(a, v):
        # |a|^(1/w) = (|a|^den)^(1/num)
        inv = 1 / w
        base = abs(int(ai)) ** inv.numerator
        r = _int_root(base, inv.denominator)
        val = Fraction(r) if r >= 0 else base ** (1.0 / inv.denominator)
        if val > best:
            best = val
    return best


@dataclass(frozen=True)
class PAdicBall:
    """Ball ``center + p^k Z_p^d`` with radius ``p^-k``."""

    p: int
    center: tuple
    k: int

    def __post_init__(self):
        object.__setattr__(self, "center",
                           tuple(Fraction(c) for c in self.center))

    @property
    def d(self) -> int:
        return len(self.center)

    @property
    def radius(self) -> Fraction:
        return Fraction(self.p) ** (-self.k)

    def measure(self) -> Fraction:
        return Fraction(self.p) ** (-self.k * self.d)

    def contains(self, x: Sequence) -> bool:
        return all(vp(Fraction(xi) - c, self.p) >= self.k for xi, c in zip(x, self.center))

    def children(self):
        step = Fraction(self.p) ** self.k
        for r in product(range(self.p), repeat=self.d):
            yield PAdicBall(self.p, tuple(c + ri * step for c, ri in zip(self.center, r)),
                            self.k + 1)

    def relation(self, other: "PAdicBall") -> str:
        """'disjoint', 'inside' (self within other), 'contains' or 'equal'."""
        if self.k >= other.k and other.contains(self.center):
            return "equal" if self.k == other.k else "inside"
        if other.k > self.k and self.contains(other.center):
            return "contains"
        return "disjoint"


def unit_ball(p: int, d: int = 1) -> PAdicBall:
    return PAdicBall(p, (0,) * d, 0)
