"""Experiment runners: one function per config kind, each returning a Report."""

from __future__ import annotations

import math
import random
from fractions import Fraction

import mpmath

from .approx import (INF, ApproxFunction, IndeterminateComparison, PowerLogPsi, TransferenceParams,
                     borel_cantelli_sum, phi_membership, series_audit, transference_gammas,
                     window_witness)
from .config import ExperimentConfig, build_ball, build_places, parse_power
from .lattice import (BudgetExceeded, box_agreement, build_gamma, minkowski_audit,
                      smallness_exponent, successive_minima)
from .maps import AnalyticMap, polynomial_map, veronese
from .measure import good_certify, product_good_check, sample_point
from .poly import Poly
from .report import Report, Table, covering_table, minima_table
from .ubiquity import (PipelineFailure, UbiquityConfig, covering_check, delta_neighborhood,
                       resonant_construct)


def build_map(rec: dict, p: int, domain_rec) -> AnalyticMap:
    if rec["type"] == "veronese":
        return veronese(int(rec["n"]), p, build_ball(domain_rec, p, 1))
    m = int(rec.get("m", 1))
    return polynomial_map(p, rec["components"], m, build_ball(domain_rec, p, m),
                          name=rec.get("name", "map"))


def build_theta(rec: dict, m: int = 1) -> Poly | None:
    return Poly.from_record(m, rec) if rec else None


def build_constant(v):
    """Fraction, or a 50-digit mpf for a rational power "b^(e)"."""
    pw = parse_power(v)
    if pw is None:
        return Fraction(str(v))
    with mpmath.workdps(50):
        return mpmath.power(mpmath.mpf(pw[0].numerator) / pw[0].denominator,
                            mpmath.mpf(pw[1].numerator) / pw[1].denominator)


def build_psi(rec: dict) -> PowerLogPsi:
    return PowerLogPsi(Fraction(str(rec.get("c", 1))), Fraction(str(rec["e"])),
                       int(rec.get("L", 0)), int(rec.get("shift", 1)))


# -- dichotomy ----------------------------------------------------------------

def fit_loglog_slope(ts, hits, samples) -> tuple[float, float]:
    """Weighted least-squares slope of log(frequency) against log(t).

    Windows without hits are skipped; the weight of a window is the inverse
    binomial variance of log(frequency), f / ((1 - f) / samples) to first order.
    Returns (slope, standard error).
    """
    xs, ys, ws = [], [], []
    for t, h in zip(ts, hits):
        if h <= 0 or t <= 0:
            continue
        f = h / samples
        var = (1 - f) / (samples * f) if f < 1 else 1.0 / samples
        xs.append(math.log(t))
        ys.append(math.log(f))
        ws.append(1.0 / var)
    if len(xs) < 3:
        return math.nan, math.nan
    W = sum(ws)
    mx = sum(w * x for w, x in zip(ws, xs)) / W
    my = sum(w * y for w, y in zip(ws, ys)) / W
    sxx = sum(w * (x - mx) ** 2 for w, x in zip(ws, xs))
    sxy = sum(w * (x - mx) * (y - my) for w, x, y in zip(ws, xs, ys))
    return sxy / sxx, math.sqrt(1.0 / sxx)


def dichotomy_frequencies(p: int, n: int, domain, psi: PowerLogPsi, samples: int, t_max: int,
                          seed: int, digits: int) -> list[int]:
    """hits[t-1] = number of sampled points with a witness of height in [2^t, 2^(t+1))."""
    Psi = ApproxFunction("psi", psi, places=(p,))
    hits = [0] * t_max
    for i in range(samples):
        x = sample_point(domain, seed, i, digits)[0]
        y = [x ** k for k in range(1, n + 1)]
        for t in range(1, t_max + 1):
            if window_witness(y, p, Psi, t) is not None:
                hits[t - 1] += 1
    return hits


def run_dichotomy(cfg: ExperimentConfig) -> Report:
    P = cfg.params
    p, n = P["p"], P["n"]
    domain = build_ball(P["domain"], p, 1)
    rep = Report(cfg.kind, cfg.resolved())
    for rec in P["psis"]:
        psi = build_psi(rec)
        hits = dichotomy_frequencies(p, n, domain, psi, P["samples"], P["t_max"],
                                     cfg.seed, P["digits"])
        ts = list(range(1, P["t_max"] + 1))
        t = Table(["t", "window_lo", "window_hi", "hits", "samples", "frequency", "sigma"])
        N = P["samples"]
        for tt, h in zip(ts, hits):
            f = h / N
            t.add(tt, 2 ** tt, 2 ** (tt + 1) - 1, h, N, f, math.sqrt(f * (1 - f) / N))
        slope, se = fit_loglog_slope(ts, hits, N)
        rep.tables[rec["name"]] = t
        rep.summary[rec["name"]] = {
            "psi": psi.to_record(), "slope": slope, "slope_sigma": se,
            "summable_within_3sigma": bool(slope + 3 * se < -1) if se == se else None}
    return rep


# -- good-certify -------------------------------------------------------------

def run_good_certify(cfg: ExperimentConfig) -> Report:
    P = cfg.params
    p, d = P["p"], P["d"]
    f = Poly.from_record(d, P["f"])
    ball = build_ball(P["ball"], p, d)
    C, alpha = build_constant(P["C"]), Fraction(str(P["alpha"]))
    rep = Report(cfg.kind, cfg.resolved())
    t = Table(["ball_center", "ball_k", "eps", "measure_lower", "measure_upper",
               "sup_lower", "sup_upper", "rhs_low", "rhs_high", "verdict"])
    if P["product"] and d > 1:
        prod = product_good_check(f, ball, C, alpha, P["eps_exponents"], P["fibers"],
                                  P["ball_depth"])
        reports = prod.slice_reports + [prod.product_report]
        rep.summary["verdict"] = prod.verdict
        rep.summary["product"] = prod.product_report.to_record()
        rep.summary["slices"] = [r.verdict for r in prod.slice_reports]
    else:
        g = good_certify(f, ball, C, alpha, P["eps_exponents"], P["ball_depth"])
        reports = [g]
        rep.summary["verdict"] = g.verdict
        rep.summary["report"] = g.to_record()
    for g in reports:
        for c in g.checks:
            t.add(list(c.ball.center), c.ball.k, c.eps, c.measure.lower, c.measure.upper,
                  c.sup.lower, c.sup.upper, c.rhs_low, c.rhs_high, c.verdict)
    rep.tables["checks"] = t
    if rep.summary["verdict"] == "inconclusive":
        rep.partial = True
        rep.notes.append("some checks were inconclusive at the depth cap")
    return rep


# -- lattice-audit ------------------------------------------------------------

def random_instance(rng: random.Random, primes, n_max: int, j_max: int) -> tuple:
    p = rng.choice(list(primes))
    n = rng.randint(1, n_max)
    j = rng.randint(1, j_max)
    y = [rng.randrange(p ** (j + 2)) for _ in range(n)]
    return p, n, j, y


def run_lattice_audit(cfg: ExperimentConfig) -> Report:
    P = cfg.params
    rng = random.Random(cfg.seed)
    delta = Fraction(str(P["delta"]))
    rep = Report(cfg.kind, cfg.resolved())
    inst = Table(["instance", "p", "n", "j", "y", "covolume", "det_ok", "box_agree", "box_method"])
    mins = Table(["instance", "Q", "j_Q", "k", "lambda", "witness"])
    audit = Table(["instance", "Q", "product_upper", "first_min_bound", "phi_member",
                   "lambda1_gt_1"])
    bad = 0
    for i in range(P["instances"]):
        p, n, j, y = random_instance(rng, P["primes"], P["n_max"], P["j_max"])
        L = build_gamma(y, j, p, divisible=True)
        det_ok = abs(_det_int(L.basis)) == p ** (j + n)
        box = box_agreement(L, p ** (j + 1), seed=cfg.seed + i)
        inst.add(i, p, n, j, y, L.covolume, det_ok, box.agree, box.method)
        bad += (not det_ok) + (not box.agree)
        for Q in P["Q"]:
            jq = smallness_exponent(p, Q, delta, n)
            LQ = build_gamma(y, jq, p, divisible=True)
            try:
                res = successive_minima(LQ, Q)
            except BudgetExceeded:
                rep.partial = True
                rep.notes.append(f"instance {i}, Q={Q}: minima budget exceeded")
                continue
            for row in minima_table(res).rows:
                mins.add(i, Q, jq, *row)
            au = minkowski_audit(LQ, res)
            member = phi_membership(y, Q, delta, _identity_map(p, n), "both").member
            gt1 = res.lambdas[0] > 1
            audit.add(i, Q, au.product_upper, au.first_min_bound, member, gt1)
            bad += (not au.product_upper) + (member is False and not gt1)
    rep.tables.update(instances=inst, minima=mins, audit=audit)
    rep.summary["failures"] = bad
    return rep


def _identity_map(p: int, n: int) -> AnalyticMap:
    """f(x) = x on Z_p^n, so that Phi membership reads y directly."""
    comps = tuple(Poly.var(n, i) for i in range(n))
    return AnalyticMap(p, comps, build_ball(None, p, n), name="identity")


def _det_int(cols) -> int:
    M = [[Fraction(c[r]) for c in cols] for r in range(len(cols))]
    det = Fraction(1)
    d = len(M)
    for k in range(d):
        piv = next((r for r in range(k, d) if M[r][k] != 0), None)
        if piv is None:
            return 0
        if piv != k:
            M[k], M[piv] = M[piv], M[k]
            det = -det
        det *= M[k][k]
        for r in range(k + 1, d):
            fac = M[r][k] / M[k][k]
            if fac:
                M[r] = [a - fac * b for a, b in zip(M[r], M[k])]
    return int(det)


# -- ubiquity-run and covering ------------------------------------------------

def run_ubiquity(cfg: ExperimentConfig) -> Report:
    P = cfg.params
    p = P["p"]
    f = build_map(P["map"], p, P["domain"])
    theta = build_theta(P["theta"])
    delta = Fraction(str(P["delta"]))
    rep = Report(cfg.kind, cfg.resolved())
    t = Table(["index", "x", "Q", "Q_used", "status", "coefficients", "height", "value_norm",
               "slope_norm", "distance", "rho", "failed"])
    counts = {"certified": 0, "phi_member": 0, "failed": 0}
    for i in range(P["samples"]):
        Q = P["Q"][i % len(P["Q"])]
        x = sample_point(f.domain, cfg.seed, i, P["digits"])
        ucfg = UbiquityConfig(p, f.n, Q, delta, phi_method=P["phi_method"], ball=f.domain)
        try:
            c = resonant_construct(x, ucfg, f, theta)
        except PipelineFailure as exc:
            status = "phi-member" if exc.stage == "precondition" else f"failed:{exc.stage}"
            counts["phi_member" if exc.stage == "precondition" else "failed"] += 1
            t.add(i, list(x), Q, None, status, None, None, None, None, None, None, exc.stage)
            continue
        rho = ucfg.rho(c.Q)
        near = delta_neighborhood(x, [(x, c.root)], rho, p) == "member"
        failed = [k for k, v in c.certificates.items() if not v] + ([] if near else ["neighbourhood"])
        status = "certified" if not failed else "failed"
        counts["certified" if not failed else "failed"] += 1
        t.add(i, list(x), Q, c.Q, status, list(c.coefficients), c.height, c.value_norm,
              c.slope_norm, c.distance, rho, ",".join(failed))
    rep.tables["candidates"] = t
    rep.summary.update(counts)
    return rep


def run_covering(cfg: ExperimentConfig) -> Report:
    P = cfg.params
    p = P["p"]
    f = build_map(P["map"], p, P["domain"])
    theta = build_theta(P["theta"])
    ucfg = UbiquityConfig(p, f.n, 2, Fraction(str(P["delta"])), phi_method=P["phi_method"],
                          ball=f.domain)
    reports = [covering_check(f.domain, t, ucfg, f, theta, P["samples"], cfg.seed, P["digits"])
               for t in P["t_values"]]
    rep = Report(cfg.kind, cfg.resolved())
    rep.tables["covering"] = covering_table(reports)
    rep.summary["reports"] = [r.to_record() for r in reports]
    rep.summary["rho_ratio"] = ucfg.rho_ratio()
    return rep


# -- series-audit -------------------------------------------------------------

def legal_grid(n: int, l: int, grid: int) -> list[tuple[Fraction, Fraction]]:
    """(eps, delta) with eps strictly inside (0, 1/(4(n+1)l^2)) and delta strictly inside (0, eps/2)."""
    top = Fraction(1, 4 * (n + 1) * l * l)
    out = []
    for a in range(1, grid + 1):
        eps = top * a / (grid + 1)
        for b in range(1, grid + 1):
            out.append((eps, eps / 2 * b / (grid + 1)))
    return out


def run_series_audit(cfg: ExperimentConfig) -> Report:
    P = cfg.params
    places = build_places(P["places"])
    l = len(places)
    rep = Report(cfg.kind, cfg.resolved())
    t = Table(["n", "alpha1", "eps", "delta", "gamma1", "gamma2", "case", "partial", "total",
               "tail_lower", "tail_upper", "bracket_ok"])
    bad = 0
    tuples = 0
    for n in P["n_values"]:
        for a1 in P["alpha1_values"]:
            alpha1 = Fraction(str(a1))
            for eps, delta in legal_grid(n, l, P["grid"]):
                tuples += 1
                g1, g2 = transference_gammas(eps, delta, l, n, alpha1)
                params = TransferenceParams(eps, delta, n, (0,) * n, places, alpha1)
                for nu in places:
                    s = series_audit(params, nu, P["horizon"])
                    t.add(n, alpha1, eps, delta, g1, g2, s.case, s.partial, s.total,
                          s.tail_lower, s.tail_upper, s.bracket_ok)
                    bad += (not s.bracket_ok) + (s.gamma <= 0)
    bc = Table(["name", "exponent", "log_power", "classification", "partial_sum", "tail_lower",
                "tail_upper"])
    inf_place = P["bc_infinite_place"]
    for rec in P["psis"]:
        res = borel_cantelli_sum(build_psi(rec), P["bc_n"], inf_place, P["bc_horizon"])
        bc.add(rec["name"], res.exponent, res.log_power, res.classification,
               float(res.partial_sums[-1][1]), res.tail_lower, res.tail_upper)
    rep.tables.update(series=t, borel_cantelli=bc)
    rep.summary.update(tuples=tuples, failures=bad)
    return rep


RUNNERS = {
    "dichotomy": run_dichotomy,
    "good-certify": run_good_certify,
    "lattice-audit": run_lattice_audit,
    "ubiquity-run": run_ubiquity,
    "series-audit": run_series_audit,
    "covering": run_covering,
}


def run(cfg: ExperimentConfig) -> Report:
    try:
        return RUNNERS[cfg.kind](cfg)
    except IndeterminateComparison as exc:
        rep = Report(cfg.kind, cfg.resolved(), partial=True)
        rep.notes.append(f"indeterminate comparison: {exc}")
        return rep
