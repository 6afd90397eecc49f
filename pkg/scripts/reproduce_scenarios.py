"""Lambda sweeps and no-admission-control baselines for both bundled scenarios.

Writes one sub-directory per run under --out (same files as the CLI) and
prints a one-line summary per scenario.

    python scripts/reproduce_scenarios.py --out runs --workers 4
    python scripts/reproduce_scenarios.py --out runs --steps 50000   # quick look
"""

import argparse
import os

from qadmit.cli import main as cli

SCENARIOS = {
    "tandem": "0,2,4,6,8,10,12",
    "acyclic": "0,1,2,3,4,5,6,7,8,9,10",
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs")
    ap.add_argument("--steps", type=int)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--only", choices=sorted(SCENARIOS))
    args = ap.parse_args(argv)

    extra = ["--steps", str(args.steps)] if args.steps else []
    for name, grid in SCENARIOS.items():
        if args.only and name != args.only:
            continue
        print(f"== {name}")
        rc = cli(["sweep", "--config", name, "--lambdas", grid, "--workers", str(args.workers),
                  "--out", os.path.join(args.out, f"{name}_sweep"), *extra])
        rc = rc or cli(["baseline", "--config", name, "--out", os.path.join(args.out, f"{name}_noac"), *extra])
        if rc:
            return rc
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
