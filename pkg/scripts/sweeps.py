"""Sum-rate versus P, sum-rate versus L, and complexity versus L (N=2, M=6).

    python3 scripts/sweeps.py --trials 1000 --outdir results
"""

import argparse
import sys
from pathlib import Path

from relaynet.cli import cli_main

SWEEPS = {
    "sumrate_vs_p": ["--l", "6", "--p-dbm", "0,5,10,15"],
    "sumrate_vs_l": ["--l", "2,4,6,8,10,12", "--p-dbm", "10"],
    "iters_vs_l": ["--l", "2,4,6,8,10,12", "--p-dbm", "10"],
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", default="1000")
    ap.add_argument("--seed", default="0")
    ap.add_argument("--outdir", type=Path, default=Path("."))
    ap.add_argument("--only", choices=sorted(SWEEPS))
    args = ap.parse_args()
    args.outdir.mkdir(parents=True, exist_ok=True)
    for mode, extra in SWEEPS.items():
        if args.only and mode != args.only:
            continue
        rc = cli_main(["--mode", mode, "--n", "2", "--m", "6", "--trials", args.trials,
                       "--seed", args.seed, "--out", str(args.outdir / f"{mode}.csv"), *extra])
        if rc:
            return rc
    return 0


if __name__ == "__main__":
    sys.exit(main())
