"""Experiment configs: YAML loading, key=value overrides, schema validation.

A config is one YAML mapping.  Common keys:

    kind:    dichotomy | good-certify | lattice-audit | ubiquity-run | series-audit | covering
    seed:    integer (default 0)
    output:  {dir: <path>, name: <stem>}   (dir defaults to $SDIOPH_OUT, then "out")
    params:  kind-specific mapping, see SCHEMAS below

Maps, balls and polynomials are written as
    map:    {type: veronese, n: 2}  or  {type: polynomial, m: 1, components: [{"1": 1}, ...]}
    domain: {center: [1], k: 1}          (the ball center + p^k Z_p^m)
    poly:   {"3": 3, "1": 9}             (multi-index "i,j,..." -> rational coefficient)
Rationals may be given as strings such as "1/3"; the good-certify constant C
also accepts a rational power "b^(e)", evaluated to 50 digits.
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable

import yaml

from .padic import INF, PAdicBall, is_prime

KINDS = ("dichotomy", "good-certify", "lattice-audit", "ubiquity-run", "series-audit", "covering")
OUT_ENV = "SDIOPH_OUT"


class ConfigError(ValueError):
    def __init__(self, errors: list[dict]):
        super().__init__("; ".join(f"{e['field']}: {e['error']}" for e in errors))
        self.errors = errors


# -- field checkers: return an error string or None -------------------------

def _rational(v):
    try:
        return Fraction(str(v))
    except (ValueError, ZeroDivisionError):
        return None


def positive_int(v):
    return None if isinstance(v, int) and not isinstance(v, bool) and v > 0 \
        else "expected a positive integer"


def nonneg_int(v):
    return None if isinstance(v, int) and not isinstance(v, bool) and v >= 0 \
        else "expected a nonnegative integer"


def int_range(lo, hi):
    def check(v):
        ok = isinstance(v, int) and not isinstance(v, bool) and lo <= v <= hi
        return None if ok else f"expected an integer in [{lo}, {hi}]"
    return check


def prime(v):
    return None if isinstance(v, int) and not isinstance(v, bool) and v > 1 and is_prime(v) \
        else "expected a prime"


def positive_rational(v):
    q = _rational(v)
    return None if q is not None and q > 0 else "expected a positive rational"


def parse_power(v):
    """(base, exponent) for "b^(e)" or "b^e" strings, else None."""
    if not isinstance(v, str) or "^" not in v:
        return None
    base, exp = v.split("^", 1)
    b, e = _rational(base.strip()), _rational(exp.strip().strip("()"))
    return None if b is None or e is None else (b, e)


def positive_real(v):
    """A positive rational or a rational power such as "3^(8/3)"."""
    pw = parse_power(v)
    if pw is not None:
        return None if pw[0] > 0 else "power base must be positive"
    return positive_rational(v)


def unit_interval(v):
    q = _rational(v)
    return None if q is not None and 0 < q < 1 else "expected a rational in (0, 1)"


def alpha_range(v):
    q = _rational(v)
    return None if q is not None and 0 < q <= 1 else "expected a rational in (0, 1]"


def boolean(v):
    return None if isinstance(v, bool) else "expected true or false"


def int_list(lo=None, hi=None):
    def check(v):
        if not isinstance(v, list) or not v:
            return "expected a nonempty list of integers"
        for x in v:
            if not isinstance(x, int) or isinstance(x, bool):
                return "expected a nonempty list of integers"
            if (lo is not None and x < lo) or (hi is not None and x > hi):
                return f"entries must lie in [{lo}, {hi}]"
        return None
    return check


def prime_list(v):
    if not isinstance(v, list) or not v or any(prime(x) for x in v):
        return "expected a nonempty list of primes"
    return None


def rational_list(v):
    if not isinstance(v, list) or not v or any(_rational(x) is None for x in v):
        return "expected a nonempty list of rationals"
    return None


def poly_record(v):
    if not isinstance(v, dict):
        return "expected a mapping multi-index -> coefficient"
    for k, c in v.items():
        try:
            [int(t) for t in str(k).split(",")]
        except ValueError:
            return f"bad multi-index {k!r}"
        if _rational(c) is None:
            return f"bad coefficient {c!r}"
    return None


def ball_record(v):
    if not isinstance(v, dict) or "center" not in v or "k" not in v:
        return "expected {center: [...], k: int}"
    if not isinstance(v["center"], list) or any(_rational(c) is None for c in v["center"]):
        return "center must be a list of rationals"
    return nonneg_int(v["k"])


def map_record(v):
    if not isinstance(v, dict) or v.get("type") not in ("veronese", "polynomial"):
        return "expected {type: veronese | polynomial, ...}"
    if v["type"] == "veronese":
        return positive_int(v.get("n")) and "veronese map needs n >= 1"
    comps = v.get("components")
    if not isinstance(comps, list) or not comps:
        return "polynomial map needs a nonempty components list"
    for c in comps:
        err = poly_record(c)
        if err:
            return err
    return positive_int(v.get("m", 1))


def psi_list(v):
    if not isinstance(v, list) or not v:
        return "expected a nonempty list of {name, c, e, L}"
    for item in v:
        if not isinstance(item, dict) or "name" not in item:
            return "each psi needs a name"
        if positive_rational(item.get("c", 1)) or positive_rational(item.get("e")):
            return f"psi {item.get('name')!r}: c and e must be positive rationals"
        if nonneg_int(item.get("L", 0)):
            return f"psi {item.get('name')!r}: L must be a nonnegative integer"
    return None


def one_of(*choices):
    def check(v):
        return None if v in choices else f"expected one of {list(choices)}"
    return check


REQUIRED = object()

# kind -> {param: (checker, default)}
SCHEMAS: dict[str, dict[str, tuple[Callable, Any]]] = {
    "dichotomy": {
        "p": (prime, REQUIRED),
        "n": (positive_int, REQUIRED),
        "domain": (ball_record, {"center": [0], "k": 0}),
        "psis": (psi_list, REQUIRED),
        "samples": (positive_int, 1000),
        "t_max": (positive_int, 8),
        "digits": (positive_int, 40),
    },
    "good-certify": {
        "p": (prime, REQUIRED),
        "f": (poly_record, REQUIRED),
        "d": (positive_int, 1),
        "C": (positive_real, REQUIRED),
        "alpha": (alpha_range, REQUIRED),
        "eps_exponents": (int_list(1, 40), list(range(1, 11))),
        "ball": (ball_record, None),
        "ball_depth": (nonneg_int, 1),
        "product": (boolean, False),
        "fibers": (positive_int, 3),
    },
    "lattice-audit": {
        "primes": (prime_list, [2, 3, 5]),
        "n_max": (int_range(1, 3), 3),
        "j_max": (int_range(1, 8), 5),
        "instances": (positive_int, 200),
        "Q": (int_list(1, 2 ** 12), [1, 2, 4, 8]),
        "delta": (unit_interval, "1/2"),
    },
    "ubiquity-run": {
        "p": (prime, REQUIRED),
        "map": (map_record, REQUIRED),
        "domain": (ball_record, None),
        "theta": (poly_record, {}),
        "delta": (unit_interval, "1/3"),
        "Q": (int_list(2, 2 ** 12), [4, 16, 64, 256, 1024]),
        "samples": (positive_int, 100),
        "digits": (positive_int, 30),
        "phi_method": (one_of("both", "lattice", "exhaustive"), "both"),
    },
    "series-audit": {
        "n_values": (int_list(1, 6), [1, 2, 3]),
        "places": (lambda v: _places_error(v), ["inf", 3]),
        "grid": (positive_int, 10),
        "alpha1_values": (rational_list, [1]),
        "horizon": (positive_int, 200),
        "psis": (psi_list, [{"name": "p-series", "e": 3},
                            {"name": "harmonic", "e": 2},
                            {"name": "log-refined", "e": 2, "L": 2}]),
        "bc_n": (positive_int, 1),
        "bc_infinite_place": (boolean, False),
        "bc_horizon": (positive_int, 4096),
    },
    "covering": {
        "p": (prime, REQUIRED),
        "map": (map_record, REQUIRED),
        "domain": (ball_record, None),
        "theta": (poly_record, {}),
        "delta": (unit_interval, "1/3"),
        "t_values": (int_list(1, 12), [2, 4, 6]),
        "samples": (positive_int, 200),
        "digits": (positive_int, 30),
        "phi_method": (one_of("both", "lattice", "exhaustive"), "both"),
    },
}


def _places_error(v):
    if not isinstance(v, list) or not v:
        return "expected a nonempty list of places ('inf' or primes)"
    for x in v:
        if x != "inf" and prime(x):
            return f"bad place {x!r}"
    if len(set(map(str, v))) != len(v):
        return "places must be distinct"
    return None


@dataclass
class ExperimentConfig:
    kind: str
    params: dict
    seed: int = 0
    output_dir: str = "out"
    output_name: str = ""
    raw: dict = field(default_factory=dict)     # the resolved config as plain data

    def resolved(self) -> dict:
        return copy.deepcopy(self.raw)


def _parse_override(text: str):
    if "=" not in text:
        raise ConfigError([{"field": text, "error": "override must be key=value"}])
    key, val = text.split("=", 1)
    return key.strip().split("."), yaml.safe_load(val) if val.strip() else None


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply dotted key=value overrides; the value is parsed as YAML."""
    data = copy.deepcopy(data)
    for text in overrides:
        path, val = _parse_override(text)
        cur = data
        for part in path[:-1]:
            if not isinstance(cur.get(part), dict):
                cur[part] = {}
            cur = cur[part]
        cur[path[-1]] = val
    return data


def validate(data) -> list[dict]:
    """All schema errors of a config mapping (an empty list means valid)."""
    errors: list[dict] = []
    if not isinstance(data, dict) or not data:
        return [{"field": "<root>", "error": "config must be a nonempty mapping"}]
    kind = data.get("kind")
    if kind not in KINDS:
        errors.append({"field": "kind", "error": f"expected one of {list(KINDS)}"})
    seed = data.get("seed", 0)
    if nonneg_int(seed):
        errors.append({"field": "seed", "error": "expected a nonnegative integer"})
    out = data.get("output", {})
    if not isinstance(out, dict):
        errors.append({"field": "output", "error": "expected {dir, name}"})
    params = data.get("params", {})
    if not isinstance(params, dict):
        errors.append({"field": "params", "error": "expected a mapping"})
        return errors
    known = {"kind", "seed", "output", "params"}
    for key in data:
        if key not in known:
            errors.append({"field": key, "error": "unknown top-level key"})
    if kind not in KINDS:
        return errors
    schema = SCHEMAS[kind]
    for key in params:
        if key not in schema:
            errors.append({"field": f"params.{key}", "error": "unknown parameter"})
    for key, (check, default) in schema.items():
        if key not in params:
            if default is REQUIRED:
                errors.append({"field": f"params.{key}", "error": "required"})
            continue
        err = check(params[key])
        if err:
            errors.append({"field": f"params.{key}", "error": err})
    if not errors:
        errors += _cross_checks(kind, _with_defaults(kind, params))
    return errors


def _with_defaults(kind: str, params: dict) -> dict:
    out = {}
    for key, (_, default) in SCHEMAS[kind].items():
        out[key] = copy.deepcopy(params[key]) if key in params else copy.deepcopy(default)
    return out


def _cross_checks(kind: str, P: dict) -> list[dict]:
    """Module preconditions that involve several parameters."""
    errs = []
    if kind in ("ubiquity-run", "covering"):
        mp = P["map"]
        m = 1 if mp["type"] == "veronese" else mp.get("m", 1)
        if m != 1:
            errs.append({"field": "params.map", "error": "the resonant pipeline needs m = 1"})
        dom = P["domain"]
        if dom is not None and len(dom["center"]) != m:
            errs.append({"field": "params.domain", "error": "center length must equal m"})
    if kind == "dichotomy":
        if len(P["domain"]["center"]) != 1:
            errs.append({"field": "params.domain", "error": "the Veronese curve has m = 1"})
        if P["t_max"] > 12:
            errs.append({"field": "params.t_max", "error": "windows beyond 2^12 are out of reach"})
    if kind == "good-certify":
        ball = P["ball"]
        if ball is not None and len(ball["center"]) != P["d"]:
            errs.append({"field": "params.ball", "error": "center length must equal d"})
        for key in P["f"]:
            if len(str(key).split(",")) != P["d"]:
                errs.append({"field": "params.f", "error": f"multi-index {key!r} needs {P['d']} entries"})
                break
    return errs


def load(path: str, overrides: list[str] | None = None) -> ExperimentConfig:
    """Read, override and validate a config; ConfigError lists every problem."""
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError([{"field": "<file>", "error": str(exc)}]) from exc
    except yaml.YAMLError as exc:
        raise ConfigError([{"field": "<file>", "error": f"YAML parse error: {exc}"}]) from exc
    return from_dict(data if data is not None else {}, overrides or [])


def from_dict(data: dict, overrides: list[str] | None = None) -> ExperimentConfig:
    if overrides:
        if not isinstance(data, dict):
            data = {}
        data = apply_overrides(data, overrides)
    errors = validate(data)
    if errors:
        raise ConfigError(errors)
    kind = data["kind"]
    params = _with_defaults(kind, data.get("params", {}))
    out = data.get("output", {}) or {}
    out_dir = out.get("dir") or os.environ.get(OUT_ENV) or "out"
    name = out.get("name") or kind
    raw = {"kind": kind, "seed": data.get("seed", 0),
           "output": {"dir": out_dir, "name": name}, "params": params}
    return ExperimentConfig(kind, params, data.get("seed", 0), out_dir, name, raw)


# -- builders used by the runners -------------------------------------------

def build_ball(rec, p: int, m: int = 1) -> PAdicBall:
    if rec is None:
        return PAdicBall(p, (0,) * m, 0)
    return PAdicBall(p, tuple(Fraction(str(c)) for c in rec["center"]), int(rec["k"]))


def build_places(rec) -> tuple:
    return tuple(INF if str(x) == "inf" else int(x) for x in rec)
