"""The congruence lattices attached to a p-adic point, and their successive minima.

For y in Z_p^n and j >= 1 the lattice of (q_0, ..., q_n) in Z^(n+1) with
    |q_0 + q_1 y_1 + ... + q_n y_n|_p <= p^-j   and   p | q_i (i >= 1)
has covolume p^(j+n).  Dropping the divisibility conditions gives a lattice of
covolume p^j that captures the small linear forms exactly; both are built here.

Successive minima are taken with respect to the box K = [-Q, Q]^(n+1), i.e.
lambda_k = (k-th sup-norm minimum) / Q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product
from typing import Sequence

import numpy as np

from .padic import PAdicNumber, PrecisionError, mod_rational, vp


class InvariantError(AssertionError):
    """Two independent computations that must agree did not."""


class BudgetExceeded(RuntimeError):
    pass


def smallness_exponent(p: int, Q, delta, n: int) -> int:
    """Smallest j with p^-j < delta * Q^-(n+1).

    Norms are powers of p, so |L|_p < delta Q^-(n+1) iff |L|_p <= p^-j.
    """
    Q, delta = Fraction(Q), Fraction(delta)
    bound = Q ** (n + 1) / delta          # need p^j > bound
    j, pj = 0, 1
    while pj <= bound:
        j += 1
        pj *= p
    return max(j, 1)


def _residue(y, p: int, k: int) -> int:
    if isinstance(y, PAdicNumber):
        if y.is_zero:
            return 0
        if y.v < 0:
            raise ValueError(f"|y|_p > 1 for {y}")
        if y.abs_precision < k:
            raise PrecisionError(f"need {k} digits of y, have {y.abs_precision}")
        return y.residue(k)
    y = Fraction(y)
    if vp(y, p) < 0:
        raise ValueError(f"|y|_p > 1 for {y}")
    return mod_rational(y, p ** k)


@dataclass(frozen=True)
class GammaLattice:
    """Basis columns and the data needed to test membership directly.

    ``divisible=True``: the lattice with p | q_i, columns (p^j,0,...,0) and
    (q_i, 0, .., -p, .., 0), covolume p^(j+n).
    ``divisible=False``: columns (p^j,0,...) and (-(y_i mod p^j), 0, .., 1, .., 0),
    covolume p^j.
    """

    p: int
    j: int
    y_res: tuple          # y_i mod p^(j+1)
    q: tuple              # q_i (divisible) or y_i mod p^j (full)
    basis: tuple          # columns
    divisible: bool = True

    @property
    def n(self) -> int:
        return len(self.y_res)

    @property
    def dim(self) -> int:
        return self.n + 1

    @property
    def covolume(self) -> int:
        return self.p ** (self.j + (self.n if self.divisible else 0))

    def basis_rows(self) -> list[list[int]]:
        return [[col[r] for col in self.basis] for r in range(self.dim)]

    def to_record(self) -> dict:
        return {"p": self.p, "j": self.j, "divisible": self.divisible,
                "y_residues": list(self.y_res), "q": list(self.q),
                "basis_columns": [list(c) for c in self.basis],
                "covolume": self.covolume}


def build_gamma(y: Sequence, j: int, p: int | None = None,
                divisible: bool = True) -> GammaLattice:
    if p is None:
        p = next(c.p for c in y if isinstance(c, PAdicNumber))
    if j < 1:
        raise ValueError("j must be >= 1")
    n = len(y)
    y_res = tuple(_residue(c, p, j + 1) for c in y)
    pj = p ** j
    cols = [tuple([pj] + [0] * n)]
    if divisible:
        # canonical q_i in [0, p^j) with q_i = p y_i mod p^j
        q = tuple((p * r) % pj for r in y_res)
        for i in range(n):
            col = [0] * (n + 1)
            col[0], col[i + 1] = q[i], -p
            cols.append(tuple(col))
    else:
        q = tuple(r % pj for r in y_res)
        for i in range(n):
            col = [0] * (n + 1)
            col[0], col[i + 1] = -q[i], 1
            cols.append(tuple(col))
    L = GammaLattice(p, j, y_res, q, tuple(cols), divisible)
    det = abs(_det_int(L.basis_rows()))
    if det != L.covolume:
        raise InvariantError(f"basis determinant {det} != {L.covolume}")
    return L


def gamma_for_point(fx: Sequence, p: int, Q, delta, divisible: bool = True) -> GammaLattice:
    """Lattice attached to y = f(x) at scale (Q, delta)."""
    j = smallness_exponent(p, Q, delta, len(fx))
    return build_gamma(fx, j, p, divisible)


def _det_int(rows: list[list[int]]) -> int:
    M = [[Fraction(v) for v in r] for r in rows]
    n, det = len(M), Fraction(1)
    for c in range(n):
        piv = next((i for i in range(c, n) if M[i][c] != 0), None)
        if piv is None:
            return 0
        if piv != c:
            M[c], M[piv] = M[piv], M[c]
            det = -det
        det *= M[c][c]
        for i in range(c + 1, n):
            if M[i][c]:
                fac = M[i][c] / M[c][c]
                M[i] = [u - fac * w for u, w in zip(M[i], M[c])]
    return int(det)


# -- membership -----------------------------------------------------------

def congruence_member(L: GammaLattice, q: Sequence[int]) -> bool:
    """The defining conditions, evaluated from y directly."""
    p, j = L.p, L.j
    if len(q) != L.dim:
        raise ValueError("dimension mismatch")
    if L.divisible and any(qi % p for qi in q[1:]):
        return False
    form = q[0] + sum(qi * yi for qi, yi in zip(q[1:], L.y_res))
    return form % p ** j == 0


def lattice_membership(L: GammaLattice, q: Sequence[int]) -> tuple[bool, tuple | None]:
    """Membership plus the coefficient vector s with basis * s = q.

    Membership comes from the congruences on y; the coefficients come from the
    inverse of the basis matrix.  The two must agree.
    """
    q = tuple(int(v) for v in q)
    member = congruence_member(L, q)
    p, j = L.p, L.j
    if L.divisible:
        tail_ok = all(qi % p == 0 for qi in q[1:])
        num = q[0] * p + sum(qi * mi for qi, mi in zip(L.q, q[1:]))
        ok = tail_ok and num % p ** (j + 1) == 0
        s = (num // p ** (j + 1),) + tuple(-mi // p for mi in q[1:]) if ok else None
    else:
        num = q[0] + sum(qi * mi for qi, mi in zip(L.q, q[1:]))
        ok = num % p ** j == 0
        s = (num // p ** j,) + tuple(q[1:]) if ok else None
    if ok != member:
        raise InvariantError(f"congruence test and basis inverse disagree on {q}")
    if s is not None:
        back = tuple(sum(col[r] * si for col, si in zip(L.basis, s)) for r in range(L.dim))
        if back != q:
            raise InvariantError(f"basis * s != q for {q}")
    return member, s


@dataclass
class BoxAgreement:
    agree: bool
    method: str              # "exhaustive" or "linear-certificate"
    fibers_checked: int
    lattice_points: int      # points counted in the box (exhaustive only)
    mismatches: list = field(default_factory=list)


def box_agreement(L: GammaLattice, B: int, fiber_budget: int = 3_000_000,
                  sample_fibers: int = 100_000, seed: int = 0) -> BoxAgreement:
    """Compare lattice points of [-B, B]^(n+1) obtained two ways.

    Fix the last n coordinates (a fiber).  From the basis, the fiber contains
    the points m_0 = p^j s_0 + sum_i col_i[0] s_i with s_i read off the fiber;
    from the congruences it contains m_0 = -sum m_i y_i mod p^j.  For B >= p^j
    both are full residue classes in [-B, B], so a fiber agrees iff the fiber
    is reachable from both sides and the two residues coincide.

    With at most ``fiber_budget`` reachable fibers every one is compared.
    Otherwise the residue difference, a linear form in the fiber coordinates,
    is checked on the unit fibers (which decides it on every fiber) and on
    ``sample_fibers`` random fibers; the method is reported.
    """
    p, j, n = L.p, L.j, L.n
    pj = p ** j
    if B < pj:
        raise ValueError("box half-width must be at least p^j")
    step = p if L.divisible else 1
    tmax = B // step
    width = 2 * tmax + 1
    y = np.array(L.y_res, dtype=object)
    col0 = [L.basis[i + 1][0] for i in range(n)]       # first row of basis columns
    tail = [L.basis[i + 1][i + 1] for i in range(n)]   # -p or 1

    def residues(t: np.ndarray):
        # t: (k, n) integer fiber coordinates m_i = step * t_i
        m = step * t
        mem = (-(m * np.array([int(v) % pj for v in y], dtype=np.int64)).sum(axis=1)) % pj
        s = m // np.array(tail, dtype=np.int64)
        enum = ((s * np.array([c % pj for c in col0], dtype=np.int64)).sum(axis=1)) % pj
        return mem, enum

    total = width ** n
    mismatches = []
    if total <= fiber_budget:
        grids = np.meshgrid(*[np.arange(-tmax, tmax + 1, dtype=np.int64)] * n, indexing="ij")
        t = np.stack([g.ravel() for g in grids], axis=1)
        mem, enum = residues(t)
        bad = np.nonzero(mem != enum)[0]
        mismatches = [tuple(int(v) for v in t[i] * step) for i in bad[:10]]
        # every residue class has B // p^j or so members; count them for the report
        counts = np.bincount(mem.astype(np.int64), minlength=pj)
        points = sum(int(c) * _count_in_class(r, pj, B) for r, c in enumerate(counts) if c)
        return BoxAgreement(len(bad) == 0, "exhaustive", total, points, mismatches)
    # linear certificate: both residues are Z-linear in t, so agreement on the
    # unit vectors gives agreement everywhere; also spot-check random fibers.
    units = np.eye(n, dtype=np.int64)
    mem, enum = residues(units)
    bad = [tuple(int(v) for v in units[i] * step) for i in np.nonzero(mem != enum)[0]]
    rng = np.random.default_rng([seed, L.j, L.p, n])
    t = rng.integers(-tmax, tmax + 1, size=(sample_fibers, n), dtype=np.int64)
    mem, enum = residues(t)
    bad += [tuple(int(v) for v in t[i] * step) for i in np.nonzero(mem != enum)[0][:10]]
    return BoxAgreement(not bad, "linear-certificate", n + sample_fibers, -1, bad)


def _count_in_class(r: int, m: int, B: int) -> int:
    """#{x in [-B, B] : x = r mod m}."""
    return (B - r) // m - (-B - 1 - r) // m


def enumerate_box(L: GammaLattice, B: int) -> list[tuple]:
    """All lattice points in [-B, B]^(n+1) from the basis (small boxes only)."""
    p, j, n = L.p, L.j, L.n
    pj = p ** j
    step = p if L.divisible else 1
    tmax = B // step
    out = []
    for t in product(range(-tmax, tmax + 1), repeat=n):
        m_tail = [step * v for v in t]
        s = [mi // L.basis[i + 1][i + 1] for i, mi in enumerate(m_tail)]
        base = sum(L.basis[i + 1][0] * si for i, si in enumerate(s))
        lo = -((B + base) // pj)
        for s0 in range(lo - 1, (B - base) // pj + 2):
            m0 = pj * s0 + base
            if -B <= m0 <= B:
                out.append((m0, *m_tail))
    return out


def points_in_box(cols: Sequence[Sequence[int]], H: int, budget: int = 5_000_000) -> list[tuple]:
    """All points of the full-rank lattice spanned by ``cols`` with sup-norm <= H.

    After LLL, v = B c lies in the box only if |c_i| <= H * ||row_i(B^-1)||_1,
    so the coefficient box is scanned and filtered exactly.
    """
    B = lll_reduce([list(c) for c in cols])
    d = len(B)
    M = [[Fraction(B[c][r]) for c in range(d)] for r in range(d)]
    inv_cols = []
    for k in range(d):
        e = [Fraction(int(i == k)) for i in range(d)]
        sol = _solve_square(M, e)
        if sol is None:
            raise ValueError("basis is singular")
        inv_cols.append(sol)
    # inv[i][k] = inv_cols[k][i]
    bounds = [math.floor(H * sum(abs(inv_cols[k][i]) for k in range(d))) for i in range(d)]
    size = math.prod(2 * b + 1 for b in bounds)
    if size > budget:
        raise BudgetExceeded(f"{size} coefficient vectors exceed the budget")
    big = max(abs(a) for col in B for a in col) * max(bounds + [1]) * d
    out = []
    if big < 2 ** 62:
        grids = np.meshgrid(*[np.arange(-b, b + 1, dtype=np.int64) for b in bounds],
                            indexing="ij")
        C = np.stack([g.ravel() for g in grids], axis=1)
        V = C @ np.array(B, dtype=np.int64)
        keep = np.all(np.abs(V) <= H, axis=1)
        out = [tuple(int(a) for a in v) for v in V[keep]]
    else:
        for c in product(*[range(-b, b + 1) for b in bounds]):
            v = tuple(sum(ci * B[i][r] for i, ci in enumerate(c)) for r in range(d))
            if _sup(v) <= H:
                out.append(v)
    return sorted(out)


# -- exact LLL ------------------------------------------------------------

def _dot(u, v):
    return sum(a * b for a, b in zip(u, v))


def _gram_schmidt(B: list[list[int]]):
    d = len(B)
    bstar: list[list[Fraction]] = []
    mu = [[Fraction(0)] * d for _ in range(d)]
    norms: list[Fraction] = []
    for i in range(d):
        v = [Fraction(x) for x in B[i]]
        for k in range(i):
            mu[i][k] = _dot(B[i], bstar[k]) / norms[k] if norms[k] else Fraction(0)
            v = [a - mu[i][k] * b for a, b in zip(v, bstar[k])]
        bstar.append(v)
        norms.append(_dot(v, v))
    return bstar, mu, norms


def lll_reduce(B: Sequence[Sequence[int]], delta: Fraction = Fraction(3, 4),
               fixed: int = 0) -> list[list[int]]:
    """LLL on the vectors ``B`` (a list of basis vectors).

    The first ``fixed`` vectors are kept as they are (and in place); the rest
    are size-reduced against everything before them and LLL-reduced in the
    projection orthogonal to the fixed block.  Exact rational arithmetic.
    """
    B = [list(map(int, b)) for b in B]
    d = len(B)
    if d <= 1:
        return B
    _, mu, norms = _gram_schmidt(B)
    k = max(1, fixed)
    guard = 0
    while k < d:
        guard += 1
        if guard > 100_000:
            raise BudgetExceeded("LLL did not terminate")
        for jj in range(k - 1, -1, -1):
            c = round(mu[k][jj])
            if c:
                B[k] = [a - c * b for a, b in zip(B[k], B[jj])]
                for t in range(jj + 1):
                    mu[k][t] -= c * (mu[jj][t] if t < jj else 1)
        if k - 1 >= fixed and norms[k] < (delta - mu[k][k - 1] ** 2) * norms[k - 1]:
            B[k], B[k - 1] = B[k - 1], B[k]
            _, mu, norms = _gram_schmidt(B)
            k = max(k - 1, fixed if fixed >= 1 else 1)
        else:
            k += 1
    return B


# -- unimodular helpers ---------------------------------------------------

def _egcd(a: int, b: int) -> tuple[int, int, int]:
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        qt, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - qt * x1
        y0, y1 = y1, y0 - qt * y1
    return a, x0, y0


def column_hnf(M: list[list[int]], ncols: int) -> tuple[list[list[int]], int]:
    """Unimodular U (ncols x ncols) with M U = [H | 0]; returns (U, rank).

    The columns of U from ``rank`` on span the integer kernel of M.
    """
    A = [list(r) for r in M]
    U = [[int(i == k) for k in range(ncols)] for i in range(ncols)]

    def combine(c1, c2, x, y, u, v):
        # col c1 <- x*c1 + y*c2 ; col c2 <- u*c1 + v*c2   (x v - y u = 1)
        for mat in (A, U):
            for row in mat:
                a, b = row[c1], row[c2]
                row[c1], row[c2] = x * a + y * b, u * a + v * b

    piv = 0
    for r in range(len(A)):
        if piv >= ncols:
            break
        for c in range(piv + 1, ncols):
            b = A[r][c]
            if b == 0:
                continue
            a = A[r][piv]
            g, x, y = _egcd(a, b)
            combine(piv, c, x, y, -b // g, a // g)
        if A[r][piv] != 0:
            piv += 1
    return U, piv


def _mat_vec_cols(cols: list[list[int]], coeff: list[int]) -> list[int]:
    d = len(cols[0])
    return [sum(cols[k][r] * coeff[k] for k in range(len(cols))) for r in range(d)]


def _solve_coeffs(cols: list[list[int]], v: Sequence[int]) -> list[int]:
    """Integer c with sum c_k cols[k] = v (cols a basis of a full-rank lattice)."""
    d = len(cols)
    A = [[Fraction(cols[k][r]) for k in range(d)] + [Fraction(v[r])] for r in range(d)]
    for c in range(d):
        piv = next(i for i in range(c, d) if A[i][c] != 0)
        A[c], A[piv] = A[piv], A[c]
        for i in range(d):
            if i != c and A[i][c]:
                fac = A[i][c] / A[c][c]
                A[i] = [a - fac * b for a, b in zip(A[i], A[c])]
    sol = [A[i][d] / A[i][i] for i in range(d)]
    if any(s.denominator != 1 for s in sol):
        raise InvariantError("vector is not in the lattice")
    return [int(s) for s in sol]


def flag_basis(cols: list[list[int]], chosen: list[list[int]]) -> tuple[list[list[int]], int]:
    """A basis whose first r vectors span the lattice points of span(chosen)."""
    d = len(cols)
    r = len(chosen)
    if r == 0:
        return cols, 0
    C = [_solve_coeffs(cols, v) for v in chosen]            # r x d
    U1, rank = column_hnf(C, d)
    if rank != r:
        raise InvariantError("chosen vectors are dependent")
    K = [[U1[i][c] for i in range(d)] for c in range(r, d)]  # (d-r) x d, rows = kernel vectors
    U2, rank2 = column_hnf(K, d)
    order = list(range(d - r, d)) + list(range(d - r))
    new = []
    for c in order:
        coeff = [U2[i][c] for i in range(d)]
        new.append(_mat_vec_cols(cols, coeff))
    return new, r


# -- enumeration ----------------------------------------------------------

def _canonical(v: Sequence[int]) -> tuple:
    for a in v:
        if a:
            return tuple(v) if a > 0 else tuple(-x for x in v)
    return tuple(v)


def _sup(v) -> int:
    return max(abs(a) for a in v)


def _int_range(c: Fraction, t: Fraction) -> range:
    """Integers x with (x - c)^2 <= t."""
    if t < 0:
        return range(0)
    rt = math.sqrt(float(t)) if t < 2 ** 1000 else float(math.isqrt(int(t)) + 1)
    lo = math.floor(float(c) - rt) - 1
    hi = math.ceil(float(c) + rt) + 1
    while (lo - c) ** 2 > t and lo <= hi:
        lo += 1
    while (hi - c) ** 2 > t and hi >= lo:
        hi -= 1
    return range(lo, hi + 1)


def _solve_square(M: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction] | None:
    n = len(M)
    A = [row[:] + [b] for row, b in zip(M, rhs)]
    for c in range(n):
        piv = next((i for i in range(c, n) if A[i][c] != 0), None)
        if piv is None:
            return None
        A[c], A[piv] = A[piv], A[c]
        for i in range(n):
            if i != c and A[i][c]:
                fac = A[i][c] / A[c][c]
                A[i] = [a - fac * b for a, b in zip(A[i], A[c])]
    return [A[i][n] / A[i][i] for i in range(n)]


def min_sup_relaxation(u: Sequence[int], free: list[list[int]]) -> tuple[Fraction, list[Fraction]]:
    """Exact min over real t of ||u + sum_k t_k free_k||_inf, with a minimiser.

    A linear program in (t, s) whose feasible set has no lines (the free
    vectors are independent), so the optimum sits at a vertex: m + 1 of the
    2d constraints +-(u + A t)_row <= s hold with equality.  All such choices
    are solved exactly and the best feasible one is returned.
    """
    if not free:
        return Fraction(_sup(u)), []
    d, m = len(u), len(free)
    cons = [(row, sg) for row in range(d) for sg in (1, -1)]
    best: tuple[Fraction, list[Fraction]] | None = None
    for pick in combinations(cons, m + 1):
        M = [[Fraction(sg * free[k][row]) for k in range(m)] + [Fraction(-1)] for row, sg in pick]
        rhs = [Fraction(-sg * u[row]) for row, sg in pick]
        sol = _solve_square(M, rhs)
        if sol is None:
            continue
        t, s_val = sol[:m], sol[m]
        if s_val < 0 or (best is not None and s_val >= best[0]):
            continue
        if all(abs(u[row] + sum(t[k] * free[k][row] for k in range(m))) <= s_val
               for row in range(d)):
            best = (s_val, t)
    if best is None:
        raise InvariantError("relaxation has no vertex optimum")
    return best


def shortest_outside(cols: list[list[int]], r: int, budget: int = 2_000_000,
                     lp_threshold: int = 16) -> tuple[list[int], int]:
    """A minimal sup-norm lattice vector with a nonzero coordinate beyond index r-1.

    Depth-first search over the coefficients x_{d-1}, ..., x_0 of ``cols``;
    only vectors with sup norm <= best - 1 are sought.  Two exact-in-spirit
    cuts are combined per level:

    * Fincke-Pohst: the Euclidean norm of such a vector is at most
      sqrt(d) (best - 1), which bounds x_i around its projected center;
    * when that range holds more than ``lp_threshold`` integers, the search
      walks outward from the minimiser of the linear relaxation.  The relaxed
      optimum g(x_i) (lower coefficients real) is convex in x_i, so a
      direction stops at its first value with g(x_i) > best - 1.

    The relaxation is solved exactly, so the cuts are exact.  Returns
    (vector, nodes).
    """
    d = len(cols)
    _, mu, norms = _gram_schmidt(cols)
    best = None
    for k in range(r, d):
        key = (_sup(cols[k]), _canonical(cols[k]))
        if best is None or key < best:
            best = key
    bound = d * (best[0] - 1) ** 2
    x = [0] * d
    nodes = 0

    def too_big(val: Fraction) -> bool:
        return val > best[0] - 1

    def partial_vec(i: int) -> list[int]:
        return [sum(cols[k][row] * x[k] for k in range(i, d)) for row in range(d)]

    def visit(i: int, xi: int, part: Fraction):
        nonlocal best, bound
        x[i] = xi
        if i == r and r > 0 and not any(x[r:]):
            return
        if i == 0:
            if not any(x[r:]) or not any(x):
                return
            v = partial_vec(0)
            sv = _sup(v)
            if sv < best[0]:
                best = (sv, _canonical(v))
                bound = d * (sv - 1) ** 2
        else:
            rec(i - 1, part)

    def rec(i: int, partial: Fraction):
        nonlocal nodes
        nodes += 1
        if nodes > budget:
            raise BudgetExceeded(f"enumeration exceeded {budget} nodes")
        c = -sum((x[k] * mu[k][i] for k in range(i + 1, d)), Fraction(0))
        rng = _int_range(c, (bound - partial) / norms[i])
        if len(rng) <= lp_threshold:
            for xi in sorted(rng, key=lambda v: (abs(v - c), v)):
                part = partial + (xi - c) ** 2 * norms[i]
                if part <= bound:
                    visit(i, xi, part)
            x[i] = 0
            return
        u = partial_vec(i + 1)
        val, t = min_sup_relaxation(u, cols[:i + 1])
        if too_big(val):
            return
        start = min(max(round(t[-1]), rng.start), rng.stop - 1)

        def g(xi: int) -> Fraction:
            ux = [a + xi * b for a, b in zip(u, cols[i])]
            return min_sup_relaxation(ux, cols[:i])[0]

        if not too_big(g(start)):
            part = partial + (start - c) ** 2 * norms[i]
            if part <= bound:
                visit(i, start, part)
        for step in (1, -1):
            xi = start + step
            while xi in rng:
                if too_big(g(xi)):
                    break
                part = partial + (xi - c) ** 2 * norms[i]
                if part <= bound:
                    visit(i, xi, part)
                xi += step
        x[i] = 0

    if best[0] > 1:
        rec(d - 1, Fraction(0))
    return list(best[1]), nodes


@dataclass
class MinimaResult:
    Q: Fraction
    norms: list            # sup norms of the witnesses (integers)
    witnesses: list
    partial: bool = False
    nodes: int = 0

    @property
    def lambdas(self) -> list[Fraction]:
        return [Fraction(s) / self.Q for s in self.norms]

    def to_record(self) -> dict:
        return {"Q": str(self.Q), "lambdas": [str(v) for v in self.lambdas],
                "witnesses": [list(w) for w in self.witnesses],
                "partial": self.partial, "nodes": self.nodes}

    def rows(self) -> list[list]:
        return [[k + 1, str(lam), *w] for k, (lam, w) in enumerate(zip(self.lambdas, self.witnesses))]


def successive_minima(L: GammaLattice | Sequence[Sequence[int]], Q, use_lll: bool = True,
                      budget: int = 2_000_000) -> MinimaResult:
    """Successive minima of a lattice w.r.t. [-Q, Q]^d.

    Greedy: the k-th witness is a shortest vector outside the span of the
    previous ones, found by enumeration over a basis adapted to that span.
    """
    Q = Fraction(Q)
    if Q <= 0:
        raise ValueError("Q must be positive")
    cols = [list(c) for c in (L.basis if isinstance(L, GammaLattice) else L)]
    d = len(cols)
    if use_lll:
        cols = lll_reduce(cols)
    chosen: list[list[int]] = []
    total_nodes = 0
    partial = False
    for _ in range(d):
        fb, r = flag_basis(cols, chosen)
        if use_lll and r:
            head = lll_reduce(fb[:r])
            fb = lll_reduce(head + fb[r:], fixed=r)
        try:
            v, nodes = shortest_outside(fb, r, budget - total_nodes)
        except BudgetExceeded:
            partial = True
            break
        total_nodes += nodes
        chosen.append(v)
    return MinimaResult(Q, [_sup(v) for v in chosen], chosen, partial, total_nodes)


def successive_minima_bruteforce(L: GammaLattice, Q, radius: int) -> MinimaResult:
    """Oracle: scan [-radius, radius]^d with the congruence test and pick greedily."""
    d = L.dim
    rng = np.arange(-radius, radius + 1, dtype=np.int64)
    grids = np.meshgrid(*[rng] * d, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    p, pj = L.p, L.p ** L.j
    ok = np.ones(len(pts), dtype=bool)
    if L.divisible:
        ok &= np.all(pts[:, 1:] % p == 0, axis=1)
    form = pts[:, 0] + (pts[:, 1:] * np.array(L.y_res, dtype=np.int64)).sum(axis=1)
    ok &= form % pj == 0
    ok &= np.any(pts != 0, axis=1)
    vecs = [tuple(int(a) for a in v) for v in pts[ok]]
    vecs = sorted({_canonical(v) for v in vecs}, key=lambda v: (_sup(v), v))
    chosen: list = []
    for v in vecs:
        if _rank_int(chosen + [list(v)]) > len(chosen):
            chosen.append(list(v))
            if len(chosen) == d:
                break
    return MinimaResult(Fraction(Q), [_sup(v) for v in chosen], chosen,
                        partial=len(chosen) < d)


def _rank_int(vs: list[list[int]]) -> int:
    rows = [[Fraction(a) for a in v] for v in vs]
    rank = 0
    ncols = len(rows[0]) if rows else 0
    for c in range(ncols):
        piv = next((i for i in range(rank, len(rows)) if rows[i][c] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        for i in range(rank + 1, len(rows)):
            if rows[i][c]:
                fac = rows[i][c] / rows[rank][c]
                rows[i] = [a - fac * b for a, b in zip(rows[i], rows[rank])]
        rank += 1
    return rank


def first_minimum(L: GammaLattice | Sequence[Sequence[int]],
                  budget: int = 2_000_000) -> list[int]:
    """A nonzero lattice vector of minimal sup norm."""
    cols = [list(c) for c in (L.basis if isinstance(L, GammaLattice) else L)]
    v, _ = shortest_outside(lll_reduce(cols), 0, budget)
    return v


def first_minimum_exceeds_one(L: GammaLattice, Q) -> bool:
    """lambda_1 > 1, i.e. no nonzero lattice point in [-Q, Q]^d."""
    return _sup(first_minimum(L)) > Fraction(Q)


# -- Minkowski audit ------------------------------------------------------

@dataclass
class MinkowskiAudit:
    covolume: int
    box_volume: Fraction
    first_min_bound: bool        # lambda_1^d Vol(K) <= 2^d covol
    product_upper: bool          # lambda_1...lambda_d Vol(K) <= 2^d covol
    product_lower: bool          # 2^d covol / d! <= lambda_1...lambda_d Vol(K)
    product_value: Fraction
    slack_upper: Fraction        # 2^d covol - product * Vol(K)
    last_min_bound: bool | None  # lambda_d <= p^(n+2)/delta, when delta applies
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.first_min_bound and self.product_upper and self.product_lower and \
            self.last_min_bound is not False

    def to_record(self) -> dict:
        return {"covolume": self.covolume, "box_volume": str(self.box_volume),
                "first_min_bound": self.first_min_bound,
                "product_upper": self.product_upper, "product_lower": self.product_lower,
                "product": str(self.product_value), "slack_upper": str(self.slack_upper),
                "last_min_bound": self.last_min_bound, "notes": self.notes}


def minkowski_audit(L: GammaLattice, res: MinimaResult, delta=None) -> MinkowskiAudit:
    d = L.dim
    if res.partial or len(res.norms) != d:
        raise ValueError("minkowski_audit needs all successive minima")
    lam = res.lambdas
    vol = (2 * res.Q) ** d
    cov = L.covolume
    prod_ = math.prod(lam, start=Fraction(1))
    notes = []
    last = None
    if delta is not None:
        delta = Fraction(delta)
        bound = Fraction(L.p) ** (L.n + 2) / delta
        if cov <= res.Q ** d * bound and lam[0] > 1:
            last = lam[-1] <= bound
        else:
            notes.append("last-minimum bound not applicable (covolume too large or lambda_1 <= 1)")
    return MinkowskiAudit(cov, vol, lam[0] ** d * vol <= 2 ** d * cov,
                          prod_ * vol <= 2 ** d * cov,
                          Fraction(2 ** d, math.factorial(d)) * cov <= prod_ * vol,
                          prod_, 2 ** d * cov - prod_ * vol, last, notes)
