"""Run every experiment config under configs/ and print one line per run.

    python3 scripts/run_all.py [--out DIR] [--only KIND ...] [--quick]

``--quick`` shrinks sample and instance counts for a smoke run.  The exit
code is the largest exit code of the individual runs.
"""

import argparse
import glob
import os
import sys
import time

import yaml

from sdioph.cli import main as cli_main

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

QUICK = {
    "dichotomy": ["params.samples=50", "params.t_max=4"],
    "lattice-audit": ["params.instances=20"],
    "ubiquity-run": ["params.samples=20"],
    "covering": ["params.samples=10", "params.t_values=[2,4]"],
    "series-audit": ["params.grid=3", "params.horizon=50"],
}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=os.path.join(ROOT, "out"))
    ap.add_argument("--only", nargs="*", help="experiment kinds to run")
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args(argv)
    worst = 0
    for path in sorted(glob.glob(os.path.join(ROOT, "configs", "*.yaml"))):
        with open(path) as fh:
            kind = (yaml.safe_load(fh) or {}).get("kind")
        if args.only and kind not in args.only:
            continue
        overrides = [f"output.dir={args.out}"] + (QUICK.get(kind, []) if args.quick else [])
        t0 = time.time()
        code = cli_main(["run", path, *overrides])
        print(f"{os.path.basename(path):24s} {kind:14s} exit {code}  {time.time() - t0:6.1f}s",
              file=sys.stderr)
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
