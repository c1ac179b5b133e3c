"""Command line: run <config> [key=value ...] | validate <config> | version."""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .config import ConfigError, load
from .experiments import run
from .lattice import BudgetExceeded, InvariantError
from .report import emit

EXIT_OK, EXIT_VALIDATION, EXIT_PARTIAL, EXIT_INVARIANT = 0, 2, 3, 4


def _errors_json(errors: list[dict]) -> str:
    return json.dumps({"errors": errors}, indent=2)


def write_report(rep, out_dir: str, name: str) -> list[str]:
    """Write <name>.json and one <name>[_<table>].csv per table; return the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    path = os.path.join(out_dir, f"{name}.json")
    with open(path, "wb") as fh:
        fh.write(emit(rep, "json"))
    paths.append(path)
    for tname in rep.tables:
        stem = name if len(rep.tables) == 1 else f"{name}_{tname}"
        path = os.path.join(out_dir, f"{stem}.csv")
        with open(path, "wb") as fh:
            fh.write(emit(rep, "csv", tname))
        paths.append(path)
    return paths


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="sdioph", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("overrides", nargs="*", help="key=value overrides (dotted keys)")
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")
    v.add_argument("overrides", nargs="*")
    sub.add_parser("version", help="print the library version")
    args = ap.parse_args(argv)

    if args.cmd == "version":
        print(__version__)
        return EXIT_OK
    try:
        cfg = load(args.config, args.overrides)
    except ConfigError as exc:
        print(_errors_json(exc.errors), file=sys.stderr)
        return EXIT_VALIDATION
    if args.cmd == "validate":
        print(json.dumps({"valid": True, "config": cfg.resolved()}, indent=2))
        return EXIT_OK
    try:
        rep = run(cfg)
    except InvariantError as exc:
        print(json.dumps({"invariant_breach": str(exc)}), file=sys.stderr)
        return EXIT_INVARIANT
    except BudgetExceeded as exc:
        print(json.dumps({"budget_exceeded": str(exc)}), file=sys.stderr)
        return EXIT_PARTIAL
    for path in write_report(rep, cfg.output_dir, cfg.output_name):
        print(path)
    return EXIT_PARTIAL if rep.partial else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
