"""Command-line entry point: ``relaynet --mode table1 --trials 1000 --out t1.csv``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .experiments import MODES, make_spec, parse_config_file, run, run_single


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="relaynet", description=__doc__)
    ap.add_argument("--mode", choices=MODES)
    ap.add_argument("--n", type=_ints, help="users, comma-separated sweep")
    ap.add_argument("--m", type=_ints, help="relays per stage")
    ap.add_argument("--l", type=_ints, help="hops")
    ap.add_argument("--w", type=_ints, help="window / block sizes (table1)")
    ap.add_argument("--p-dbm", dest="p_dbm", type=_floats, help="transmit power in dBm")
    ap.add_argument("--snr-db", dest="snr_db", type=float, help="P / noise for table1 (fading only)")
    ap.add_argument("--trials", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--distance-unit", dest="distance_unit", choices=("km", "m"))
    ap.add_argument("--e-th", dest="e_th", type=float)
    ap.add_argument("--threads", type=int, help="worker processes (default: RELAYNET_THREADS or cpu count)")
    ap.add_argument("--config", type=Path, help="key = value file; command-line flags override it")
    ap.add_argument("--out", help="CSV output path (required except in single mode)")
    return ap


def cli_main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    settings = {}
    try:
        if args.config is not None:
            settings.update(parse_config_file(args.config.read_text()))
        for k, v in vars(args).items():
            if k != "config" and v is not None:
                settings[k] = v
        spec = make_spec(settings)
    except (OSError, ValueError, TypeError) as exc:
        print(f"relaynet: error: {exc}", file=sys.stderr)
        return 2
    if spec.mode == "single":
        result = run_single(spec)
        print(result.summary())
        return 0
    if spec.out is None:
        print(f"relaynet: error: --out is required for mode {spec.mode}", file=sys.stderr)
        return 2
    try:
        text = run(spec)
        Path(spec.out).write_text(text)
    except (OSError, ValueError) as exc:
        print(f"relaynet: error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {spec.out}")
    return 0


def main():
    sys.exit(cli_main())
