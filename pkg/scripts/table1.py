"""Sum-rate gain over hop-by-hop selection for every (M, L) cell, two users.

    python3 scripts/table1.py --trials 10000 --out results/table1.csv
"""

import argparse
import sys

from relaynet.cli import cli_main

# reference gains (%) per (M, L): window w2, window w4, block w2, block w4, ad-hoc, max-min
REFERENCE = {
    (2, 2): (11.767, None, 11.767, None, 11.767, 2.410),
    (2, 4): (16.303, 28.058, 11.694, 28.058, 10.010, 6.442),
    (2, 6): (14.724, 34.013, 8.549, None, 7.578, 7.383),
    (2, 8): (12.408, 37.516, 6.773, 23.073, 7.139, 7.026),
    (2, 10): (8.140, 36.764, 3.599, None, 5.919, 5.877),
    (2, 12): (4.981, 36.540, 1.784, 13.949, 4.732, 5.043),
    (3, 2): (30.163, None, 30.163, None, 30.163, 13.942),
    (3, 4): (28.459, 52.483, 24.806, 52.483, 21.303, 30.744),
    (3, 6): (28.098, 53.833, 23.716, None, 19.015, 45.387),
    (3, 8): (25.217, 52.207, 19.926, 48.881, 17.338, 52.996),
    (3, 10): (22.010, 48.363, 17.262, None, 15.686, 58.645),
    (3, 12): (18.897, 47.343, 14.863, 42.048, 14.203, 65.579),
    (4, 2): (40.283, None, 40.283, None, 40.283, 22.234),
    (4, 4): (37.763, 68.725, 33.768, 68.725, 29.983, 49.917),
    (4, 6): (33.862, 63.154, 30.075, None, 25.896, 59.840),
    (4, 8): (32.566, 62.072, 26.411, 59.602, 23.585, 68.946),
    (4, 10): (29.260, 59.554, 23.866, None, 22.135, 75.536),
    (4, 12): (26.786, 57.770, 21.395, 51.908, 20.963, 81.644),
}
COLUMNS = ("window_w2", "window_w4", "block_w2", "block_w4", "adhoc", "maxmin")


def compare(path):
    import csv
    with open(path) as fh:
        rows = list(csv.DictReader(ln for ln in fh if not ln.startswith("#")))
    print(f"{'cell':>10} " + " ".join(f"{c:>17}" for c in COLUMNS))
    for row in rows:
        key = (int(row["m"]), int(row["l"]))
        ref = REFERENCE.get(key)
        cells = []
        for c, r in zip(COLUMNS, ref or (None,) * 6):
            v = row[f"{c}_gain_pct"]
            cells.append(f"{float(v):7.2f} ({r:7.3f})" if v and r is not None else f"{'-':>17}")
        print(f"M={key[0]},L={key[1]:<3} " + " ".join(cells))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", default="10000")
    ap.add_argument("--seed", default="7")
    ap.add_argument("--m", default="2,3,4")
    ap.add_argument("--l", default="2,4,6,8,10,12")
    ap.add_argument("--out", default="table1.csv")
    args = ap.parse_args()
    rc = cli_main(["--mode", "table1", "--n", "2", "--m", args.m, "--l", args.l, "--w", "2,4",
                   "--snr-db", "10", "--trials", args.trials, "--seed", args.seed, "--out", args.out])
    if rc == 0:
        compare(args.out)
    return rc


if __name__ == "__main__":
    sys.exit(main())
