"""Strong approximation, Hensel lifting and the resonant-function construction.

Given x outside Phi^f(Q, delta), the successive minima of the congruence
lattice at x give n+1 independent integer forms F_j that are p-adically
small at x.  A rational combination sum eta_j F_j solves a linear system
that pins down (F + Theta)(x) and its first partial; rounding each eta_j
to a p-integral-away-from-p rational r_j (strong approximation) keeps the
p-adic estimates and makes the coefficients integers.  A Newton step then
finds a zero of F + Theta within rho(Q) of x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .approx import phi_membership
from .lattice import (InvariantError, gamma_for_point, minkowski_audit,
                      successive_minima, _solve_square)
from .maps import AnalyticMap
from .measure import sample_point, wilson_interval
from .padic import PAdicBall, PAdicNumber, PrecisionError, mod_rational, norm_p, vp
from .poly import Poly


class PipelineFailure(RuntimeError):
    """A stage of the resonant construction failed; ``stage`` names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


# -- strong approximation -------------------------------------------------

def _power_exponent(eps_p: Fraction, p: int) -> int:
    """e with eps_p = p^-e."""
    eps_p = Fraction(eps_p)
    e = -vp(eps_p, p)
    if Fraction(p) ** (-e) != eps_p:
        raise ValueError(f"eps_p = {eps_p} is not a power of {p}")
    return e


def strong_approx(xi_inf, xi_p, eps_inf, eps_p, p: int, strict: bool = False) -> Fraction:
    """A rational r = c / p^k with |r - xi_inf| <= eps_inf, |r - xi_p|_p <= eps_p.

    Such r has |r|_q <= 1 at every prime q != p.  The residue class of xi_p
    modulo p^e (eps_p = p^-e) is a progression of step p^e among the c/p^k;
    start from the canonical representative and shift by whole steps into the
    real window.  ``strict`` asks for |r - xi_inf| < eps_inf.
    """
    xi_inf, eps_inf = Fraction(xi_inf), Fraction(eps_inf)
    e = _power_exponent(eps_p, p)
    if eps_inf < Fraction(1, 2) * Fraction(eps_p) ** -1 * p:
        raise ValueError("need eps_inf >= p / (2 eps_p)")
    if isinstance(xi_p, PAdicNumber):
        if xi_p.is_zero:
            xq, v = Fraction(0), math.inf
        else:
            if xi_p.abs_precision < e:
                raise PrecisionError(f"xi_p known to p^{xi_p.abs_precision}, need p^{e}")
            xq, v = xi_p.to_fraction(), xi_p.v
    else:
        xq = Fraction(xi_p)
        v = vp(xq, p)
    k = max(0, -e, 0 if v == math.inf else -int(v))
    mod = p ** (e + k)                     # c is fixed mod p^(e+k)
    c0 = mod_rational(xq * p ** k, mod)
    step = Fraction(mod, p ** k)           # = p^e
    r = Fraction(c0, p ** k)

    def inside(val):
        d = abs(val - xi_inf)
        return d < eps_inf if strict else d <= eps_inf

    if not inside(r):
        shift = round((xi_inf - r) / step)
        r = r + shift * step
    if not inside(r):
        raise InvariantError("shifted representative left the real window")
    return r


def check_strong_approx(r, xi_inf, xi_p, eps_inf, eps_p, p: int, strict: bool = False) -> dict:
    """The three inequalities, evaluated independently of the construction."""
    r = Fraction(r)
    xq = xi_p.to_fraction() if isinstance(xi_p, PAdicNumber) else Fraction(xi_p)
    d = abs(r - Fraction(xi_inf))
    den = r.denominator
    while den % p == 0:
        den //= p
    return {"real": d < eps_inf if strict else d <= eps_inf,
            "p_adic": norm_p(r - xq, p) <= Fraction(eps_p),
            "other_primes": den == 1}


# -- Hensel lifting -------------------------------------------------------

@dataclass
class HenselResult:
    p: int
    N: int                     # g(root) = 0 mod p^N
    root: int                  # residue mod p^N
    steps: list                # v_p(g(xi_k)) before each step, capped at N
    s: int                     # v_p(g'(0))
    v0: int | float            # v_p(g(0))

    @property
    def norm(self) -> Fraction:
        """|root|_p as far as the residue determines it (0 if root = 0 mod p^N)."""
        if self.root == 0:
            return Fraction(0)
        return Fraction(self.p) ** (-vp(self.root, self.p))

    def as_padic(self) -> PAdicNumber:
        if self.root == 0:
            return PAdicNumber.zero(self.p)
        return PAdicNumber.from_rational(self.root, self.p, self.N - vp(self.root, self.p))

    def to_record(self) -> dict:
        return {"p": self.p, "N": self.N, "root_residue": self.root, "steps": self.steps,
                "s": self.s, "v_g0": str(self.v0)}


def _int_coeffs(g: Sequence[Fraction], p: int, M: int) -> list[int]:
    out = []
    for c in g:
        c = Fraction(c)
        if vp(c, p) < 0:
            raise ValueError("Hensel lifting needs p-integral coefficients")
        out.append(mod_rational(c, M))
    return out


def _eval_mod(cs: list[int], x: int, M: int) -> int:
    acc = 0
    for c in reversed(cs):
        acc = (acc * x + c) % M
    return acc


def hensel_root(g, p: int, N: int = 40) -> HenselResult:
    """Newton's method for a root of g near 0 in Z_p.

    ``g`` is a univariate Poly or a low-to-high coefficient list.  Requires
    |g(0)|_p < |g'(0)|_p^2.  Returns the root modulo p^N with g(root) = 0 mod
    p^N and the valuation of g at each iterate.
    """
    if isinstance(g, Poly):
        if g.nvars != 1:
            raise ValueError("hensel_root needs a one-variable polynomial")
        deg = max(g.degree(), 0)
        coeffs = [g.coeffs.get((i,), Fraction(0)) for i in range(deg + 1)]
    else:
        coeffs = [Fraction(c) for c in g]
    if len(coeffs) < 2:
        raise ValueError("constant polynomial has no Hensel root")
    g0, d0 = coeffs[0], coeffs[1]
    v0 = vp(g0, p)
    s = vp(d0, p)
    if s == math.inf or not v0 > 2 * s:
        raise ValueError("Hensel condition |g(0)| < |g'(0)|^2 fails")
    s = int(s)
    M = p ** (N + 2 * s + 1)
    cs = _int_coeffs(coeffs, p, M)
    ds = [(i * c) % M for i, c in enumerate(cs)][1:]
    x = 0
    steps = []
    for _ in range(4 * N + 8):
        gv = _eval_mod(cs, x, M)
        vg = vp(gv, p) if gv else math.inf
        steps.append(min(vg, N + 2 * s + 1))
        if vg >= N:
            break
        dv = _eval_mod(ds, x, M)
        if vp(dv, p) != s:
            raise InvariantError("derivative valuation changed during Newton iteration")
        ps = p ** s
        unit = (dv // ps) % M
        inv = pow(unit, -1, M)
        x = (x - (gv // ps) * inv) % M
    else:
        raise PrecisionError("Newton iteration did not reach the working precision")
    root = x % p ** N
    if _eval_mod(_int_coeffs(coeffs, p, p ** N), root, p ** N) != 0:
        raise InvariantError("root residual is not zero mod p^N")
    return HenselResult(p, N, root, steps, s, v0)


def hensel_gain_ok(res: HenselResult) -> bool:
    """Valuations never drop and v_{k+1} >= 2 v_k - 2s until the cap N."""
    cap = res.N
    vs = res.steps
    for a, b in zip(vs, vs[1:]):
        if a >= cap:
            break
        if not b >= min(2 * a - 2 * res.s, cap):
            return False
        if b < a:
            return False
    return True


# -- configuration --------------------------------------------------------

@dataclass(frozen=True)
class UbiquityConfig:
    p: int
    n: int
    Q: Fraction
    delta: Fraction
    m: int = 1
    w: Fraction = Fraction(1, 2)
    N: int = 0                   # Hensel working precision; 0 = automatic
    q_doublings: int = 4         # retries with Q doubled
    phi_method: str = "both"
    ball: PAdicBall | None = None

    def __post_init__(self):
        for name in ("Q", "delta", "w"):
            object.__setattr__(self, name, Fraction(getattr(self, name)))
        if not 0 < self.delta < 1:
            raise ValueError("need 0 < delta < 1")
        if not 0 < self.w < 1:
            raise ValueError("need 0 < w < 1")
        if self.Q <= 1:
            raise ValueError("need Q > 1")
        if self.m != 1:
            raise ValueError("only curves (m = 1) are supported")

    @property
    def slope_threshold(self) -> Fraction:
        return 1 - Fraction(2, self.p)

    @property
    def kappa0(self) -> Fraction:
        return self.delta * Fraction(self.p) ** (-(self.n + 2)) / (3 * self.p * (self.n + 1))

    @property
    def kappa1(self) -> Fraction:
        return Fraction(self.p, self.p - 1) * self.delta

    def rho(self, Q) -> Fraction:
        return self.kappa1 * Fraction(Q) ** (-(self.n + 1))

    @property
    def common_dimension(self) -> int:
        return self.m - 1

    def rho_ratio(self) -> Fraction:
        """rho(2^(t+1)) / rho(2^t), independent of t."""
        return Fraction(1, 2 ** (self.n + 1))

    def working_precision(self, Q) -> int:
        if self.N:
            return self.N
        bound = Fraction(Q) ** (self.n + 1) / self.delta
        return 2 * (self.n + 2) + math.ceil(math.log(float(bound), self.p)) + 1

    def with_Q(self, Q) -> "UbiquityConfig":
        return UbiquityConfig(self.p, self.n, Fraction(Q), self.delta, self.m, self.w,
                              self.N, self.q_doublings, self.phi_method, self.ball)

    def to_record(self) -> dict:
        return {"p": self.p, "n": self.n, "m": self.m, "Q": str(self.Q),
                "delta": str(self.delta), "w": str(self.w),
                "slope_threshold": str(self.slope_threshold),
                "kappa0": str(self.kappa0), "kappa1": str(self.kappa1),
                "rho_Q": str(self.rho(self.Q)), "common_dimension": self.common_dimension}


# -- resonant construction ------------------------------------------------

@dataclass
class ResonantCandidate:
    coefficients: tuple          # (a_0, ..., a_n)
    Q: Fraction
    j: int
    basis_vectors: list          # the a_j from the successive minima
    eta: list
    r: list
    pivot: int                   # coordinate with |a_{j, pivot}| > Q for some j
    beta: Fraction
    value_norm: Fraction         # |(F + Theta)(x)|_p
    slope_norm: Fraction         # |d_1 (F + Theta)(x)|_p
    height: int                  # max |a_i|
    root: HenselResult
    distance: Fraction           # |x - x_xi0|_p (upper bound if the root is 0 mod p^N)
    certificates: dict = field(default_factory=dict)
    attempts: int = 1

    @property
    def ok(self) -> bool:
        return all(self.certificates.values())

    def to_record(self) -> dict:
        return {"coefficients": list(self.coefficients), "Q": str(self.Q), "j": self.j,
                "basis_vectors": [list(v) for v in self.basis_vectors],
                "eta": [str(e) for e in self.eta], "r": [str(v) for v in self.r],
                "pivot": self.pivot, "beta": str(self.beta),
                "value_norm": str(self.value_norm), "slope_norm": str(self.slope_norm),
                "height": self.height, "root": self.root.to_record(),
                "distance": str(self.distance), "certificates": self.certificates,
                "attempts": self.attempts}


def _coords(x) -> tuple:
    xs = tuple(x) if isinstance(x, (list, tuple)) else (x,)
    return tuple(Fraction(v) for v in xs)


def _theta_poly(theta, m: int) -> Poly:
    if theta is None:
        return Poly(m)
    if isinstance(theta, AnalyticMap):
        return theta.scalar()
    return theta


def _form(a: Sequence, f: AnalyticMap) -> Poly:
    out = Poly.const(f.m, a[0])
    for ai, fi in zip(a[1:], f.components):
        if ai:
            out = out + fi * ai
    return out


def _construct_once(x: tuple, cfg: UbiquityConfig, f: AnalyticMap, theta: Poly) -> ResonantCandidate:
    p, n, Q, delta = cfg.p, cfg.n, cfg.Q, cfg.delta
    if phi_membership(x, Q, delta, f, cfg.phi_method).member:
        raise PipelineFailure("precondition", "x lies in Phi^f(Q, delta)")
    y = [fi(*x) for fi in f.components]
    L = gamma_for_point(y, p, Q, delta, divisible=True)
    mins = successive_minima(L, Q)
    if mins.partial:
        raise PipelineFailure("minima", "successive minima not resolved within budget")
    audit = minkowski_audit(L, mins, delta)
    if audit.last_min_bound is False:
        raise PipelineFailure("minima", "lambda_(n+1) exceeds p^(n+2)/delta")
    vecs = [list(v) for v in mins.witnesses]
    small = Fraction(delta) * Q ** (-(n + 1))
    for v in vecs:
        if not norm_p(sum(Fraction(a) * yi for a, yi in zip(v[1:], y)) + v[0], p) < small:
            raise InvariantError("minima witness is not p-adically small at x")
        if any(a % p for a in v[1:]):
            raise InvariantError("minima witness violates p | a_i")
        if not max(abs(a) for a in v) > Q:
            raise PipelineFailure("minima", "lambda_1 <= 1 although x is outside Phi")
    # linear system in eta_0..eta_n
    d1 = [fi.diff(0) for fi in f.components]
    F = [_form(v, f) for v in vecs]
    rows = [[Fj(*x) for Fj in F],
            [Fj.diff(0)(*x) for Fj in F]]
    for i in range(2, n + 1):
        rows.append([Fraction(v[i]) for v in vecs])
    rhs = [-theta(*x), 1 - theta.diff(0)(*x)] + [Fraction(0)] * (n - 1)
    if f.components[0] != Poly.var(f.m, 0):
        raise PipelineFailure("precondition", "the construction needs f_1(x) = x_1")
    eta = _solve_square([list(r) for r in rows], rhs)
    if eta is None:
        raise InvariantError("linear system is singular although det(a_ji) != 0")
    # pivot coordinate and sign-split targets
    pivot = next(i for i in range(n + 1) if any(abs(v[i]) > Q for v in vecs))
    r = []
    for v, e in zip(vecs, eta):
        if v[pivot] >= 0:
            r.append(strong_approx(2 * p, e, p, 1, p))
        else:
            r.append(strong_approx(-2 * p, e, p, 1, p, strict=True))
    a = [sum(rj * v[i] for rj, v in zip(r, vecs)) for i in range(n + 1)]
    integral = all(Fraction(ai).denominator == 1 for ai in a)
    a = [int(ai) if Fraction(ai).denominator == 1 else ai for ai in a]
    Fp = _form(a, f) + theta
    val = norm_p(Fp(*x), p)
    slope = norm_p(Fp.diff(0)(*x), p)
    height = max(abs(Fraction(ai)) for ai in a)
    abound = 3 * p * (n + 1) * Q * Fraction(p) ** (n + 2) / delta
    beta = cfg.kappa0 * height
    beta_lo = Fraction(1, 3 * p * (n + 1)) * Fraction(p) ** (-(n + 1)) * delta * Q
    certs = {
        "integrality": integral,
        "value": val <= small,
        "slope": 1 - Fraction(1, p) <= slope <= 1,
        "height_upper": height <= abound,
        "height_lower": height > p * Q,
        "beta_window": beta_lo < beta <= Q,
    }
    if not integral:
        raise PipelineFailure("integrality", f"non-integral coefficients {a}")
    # Newton step along the first coordinate
    shift = [Poly(1, {(0,): xi}) for xi in x]
    shift[0] = shift[0] + Poly(1, {(1,): 1})
    g = Fp.compose(shift)
    N = cfg.working_precision(Q)
    try:
        root = hensel_root(g, p, N)
    except ValueError as exc:
        raise PipelineFailure("hensel", str(exc))
    dist = root.norm if root.root else Fraction(p) ** (-N)
    certs["distance"] = dist <= cfg.rho(Q)
    if cfg.ball is not None:
        certs["zero_in_ball"] = cfg.ball.contains((x[0] + root.root,) + x[1:]) \
            if root.root else cfg.ball.contains(x)
    return ResonantCandidate(tuple(a), Q, L.j, vecs, eta, r, pivot, beta, val, slope,
                             int(height), root, dist, certs)


def resonant_construct(x, cfg: UbiquityConfig, f: AnalyticMap, theta=None,
                       retry: bool = True) -> ResonantCandidate:
    """Build the resonant candidate at x, doubling Q when the ball check fails.

    A PipelineFailure names the failing stage; the precondition x outside
    Phi^f(Q, delta) is checked at each Q tried.
    """
    x = _coords(x)
    if len(x) != f.m:
        raise ValueError("point dimension does not match the map")
    th = _theta_poly(theta, f.m)
    attempts = 0
    Q = cfg.Q
    last = None
    for _ in range(cfg.q_doublings + 1 if retry else 1):
        attempts += 1
        cand = _construct_once(x, cfg.with_Q(Q), f, th)
        cand.attempts = attempts
        last = cand
        if cand.certificates.get("zero_in_ball", True) and cand.certificates["beta_window"]:
            return cand
        Q *= 2
    return last


# -- neighbourhoods and covering ------------------------------------------

def delta_neighborhood(x, zeros: Sequence, r, p: int) -> str:
    """'member' if some known zero is closer than r, else 'not certified'.

    Zeros are HenselResults (shifts of the first coordinate of ``x``'s
    centre point, given as (base point, result)) or rational points.
    """
    x = _coords(x)
    r = Fraction(r)
    for z in zeros:
        if isinstance(z, tuple) and len(z) == 2 and isinstance(z[1], HenselResult):
            base, res = _coords(z[0]), z[1]
            pt0 = base[0] + res.root
            diff = [x[0] - pt0] + [a - b for a, b in zip(x[1:], base[1:])]
            # the zero is known mod p^N in its first coordinate
            ds = []
            for i, dv in enumerate(diff):
                nv = norm_p(dv, p)
                if i == 0 and nv <= Fraction(p) ** (-res.N):
                    nv = Fraction(p) ** (-res.N)
                ds.append(nv)
            dist = max(ds)
        else:
            dist = max(norm_p(a - Fraction(b), p) for a, b in zip(x, _coords(z)))
        if dist < r:
            return "member"
    return "not certified"


@dataclass
class CoveringReport:
    t: int
    Q: int
    samples: int
    successes: int
    phi_members: int
    failures: dict
    frequency: float
    sigma: float
    floor: float
    wilson: tuple

    def row(self) -> list:
        return [self.t, self.frequency, self.floor, self.sigma]

    def to_record(self) -> dict:
        return {"t": self.t, "Q": self.Q, "samples": self.samples,
                "successes": self.successes, "phi_members": self.phi_members,
                "failures": self.failures, "frequency": self.frequency,
                "sigma": self.sigma, "floor": self.floor, "wilson": list(self.wilson)}


def covering_check(ball: PAdicBall, t: int, cfg: UbiquityConfig, f: AnalyticMap, theta=None,
                   samples: int = 1000, seed: int = 0, digits: int = 30) -> CoveringReport:
    """Fraction of sampled x in the ball covered by some Delta(R_F, rho(2^t)).

    x counts as covered when the construction at Q = 2^t (no retries)
    returns a candidate passing every certificate; the floor is one minus
    the observed frequency of Phi^f(Q, delta).
    """
    Q = 2 ** t
    c = cfg.with_Q(Q)
    ok = phi = 0
    failures: dict = {}
    for i in range(samples):
        x = sample_point(ball, seed, i, digits)
        try:
            cand = resonant_construct(x, c, f, theta, retry=False)
        except PipelineFailure as exc:
            if exc.stage == "precondition":
                phi += 1
            else:
                failures[exc.stage] = failures.get(exc.stage, 0) + 1
            continue
        if cand.ok and delta_neighborhood(x, [(x, cand.root)], c.rho(Q), c.p) == "member":
            ok += 1
        else:
            bad = ",".join(k for k, v in cand.certificates.items() if not v) or "distance"
            failures[bad] = failures.get(bad, 0) + 1
    freq = ok / samples
    sigma = math.sqrt(freq * (1 - freq) / samples)
    return CoveringReport(t, Q, samples, ok, phi, failures, freq, sigma,
                          1 - phi / samples, wilson_interval(ok, samples, 3.0))
