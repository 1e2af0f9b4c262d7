"""Acceptance criteria, one test and one printed PASS/FAIL line each.

Run alone with ``pytest -s tests/test_acceptance.py``; the lines are also
repeated in the terminal summary of any pytest run that includes this file.
"""

import itertools
import warnings

import numpy as np
import pytest

from relaynet.experiments import (ExperimentSpec, csv_body, gain_percent, map_trials, mean_se, n_workers,
                                  reference_trial, run, table1_selectors, table1_trial)
from relaynet.joint import joint_optimize
from relaynet.network import NetworkConfig, RelayAssignment, dbm_to_watts, generate_channels, sinr_matrix
from relaynet.power import ScaSettings, bound_coefficients, grid_power_oracle, sca_power_control
from relaynet.selection import max_min_value, select_max_min
from relaynet.twouser import theorem2_power_solver, verify_lemma1

RESULTS = {}


def report(k, ok, detail):
    line = f"CRITERION {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[k] = line
    print(line)
    assert ok, line


def pathloss(n, m, l, p_dbm=10.0, seed=0):
    return NetworkConfig(n, m, l, p_max=dbm_to_watts(p_dbm), rng_seed=seed)


# 1 -----------------------------------------------------------------------------

TABLE1_CELLS = [  # (M, L, strategy label, reference gain %)
    (2, 2, "window_w2", 11.767),
    (3, 4, "window_w4", 52.483),
    (4, 12, "maxmin", 81.644),
    (2, 12, "maxmin", 5.043),
]


def test_c01_table1_spot_cells():
    spec = ExperimentSpec(mode="table1", trials=10_000, seed=7, snr_db=10.0)
    parts, ok = [], True
    for m, l, label, target in TABLE1_CELLS:
        cfg = spec.config(2, m, l)
        sel = [s for s in table1_selectors([2, 4]) if s.label == label]
        res = map_trials(table1_trial, (cfg, sel), spec.trials, n_workers(spec))
        g, se = gain_percent([r[label] for r in res], [r["hop"] for r in res])
        hit = abs(g - target) <= 3.0
        ok &= hit
        parts.append(f"M{m}L{l} {label} {g:.2f}+-{se:.2f} vs {target}{'' if hit else ' (off)'}")
    report(1, ok, "; ".join(parts) + " (tol 3pp)")


# 2 -----------------------------------------------------------------------------

def test_c02_structural_identities():
    spec = ExperimentSpec(mode="table1")
    bad = n = 0
    for m in (2, 3, 4):
        for l in (2, 4):
            cfg = spec.config(2, m, l)
            sels = [s for s in table1_selectors([2, 4]) if s.applicable(cfg)]
            for d in range(500):
                r = table1_trial(cfg, sels, d)
                same = (r["adhoc"] == r["block_w2"] == r["window_w2"]) if l == 2 else (r["block_w4"] == r["window_w4"])
                bad += not same
                n += 1
    report(2, bad == 0, f"{n - bad}/{n} draws bit-identical (L=2: adhoc=block2=window2; L=4: block4=window4)")


# 3 -----------------------------------------------------------------------------

def test_c03_lower_bound_grid():
    z = np.logspace(-4, 4, 100)
    zz, aa = np.meshgrid(z, z, indexing="ij")  # (z, anchor), 10^4 points
    c = bound_coefficients(aa.ravel())
    lower = c.value(zz.ravel())
    exact = np.log1p(zz.ravel())
    viol = int(np.sum(lower > exact * (1 + 1e-12) + 1e-300))
    tight = bound_coefficients(z).value(z)
    tight_err = float(np.max(np.abs(tight - np.log1p(z)) / np.log1p(z)))
    report(3, viol == 0 and tight_err <= 1e-12,
           f"{viol} violations on {zz.size} (z, anchor) points; max rel gap at z=anchor {tight_err:.1e}")


# 4 -----------------------------------------------------------------------------

def test_c04_sca_monotone():
    cfg = pathloss(2, 4, 4)
    worst_sca, worst_joint = np.inf, np.inf
    for d in range(500):
        ch = generate_channels(cfg, d)
        sca = sca_power_control(cfg, ch, select_max_min(cfg, ch))
        worst_sca = min(worst_sca, float(np.min(np.diff(sca.trace), initial=0.0)))
        t = np.array(joint_optimize(cfg, ch).trace)
        if len(t) > 1:
            worst_joint = min(worst_joint, float(np.min((t[1:] - t[:-1]) / t[1:])))
    ok = worst_sca >= -1e-9 and worst_joint > 1e-3
    report(4, ok, f"500 instances; min SCA step {worst_sca:.2e} (>= -1e-9); "
                  f"min accepted relative gain {worst_joint:.2e} (> 1e-3)")


# 5 -----------------------------------------------------------------------------

def exhaustive_maxmin(cfg, ch, p):
    perms = list(itertools.permutations(range(cfg.m_relays), cfg.n_users))
    return max(float(sinr_matrix(cfg, ch, RelayAssignment(list(c)), p).min())
               for c in itertools.product(perms, repeat=cfg.l_hops - 1))


def test_c05_maxmin_oracle():
    shapes = [(n, m, l) for n in (1, 2) for m in range(n, 5) for l in (2, 3, 4)]
    mismatches = 0
    for k in range(200):
        n, m, l = shapes[k % len(shapes)]
        cfg = pathloss(n, m, l, seed=k) if k % 2 else NetworkConfig(n, m, l, p_max=1.0, noise_variance=0.1,
                                                                       path_loss_exponent=0.0, rng_seed=k)
        ch = generate_channels(cfg, k)
        p = cfg.full_power()
        mismatches += max_min_value(cfg, ch, select_max_min(cfg, ch, p), p) != exhaustive_maxmin(cfg, ch, p)
    report(5, mismatches == 0, f"{200 - mismatches}/200 instances match the exhaustive bottleneck value exactly")


# 6 and 7 ---------------------------------------------------------------------

_GRID_CACHE = {}


def grid_instances():
    if not _GRID_CACHE:
        cfg = pathloss(2, 3, 2)
        for d in range(200):
            ch = generate_channels(cfg, d)
            a = select_max_min(cfg, ch)
            _GRID_CACHE[d] = (cfg, ch, a, grid_power_oracle(cfg, ch, a, points=50))
    return _GRID_CACHE


def test_c06_power_oracle():
    sca_fail, t2_fail, worst = 0, 0, 0.0
    for cfg, ch, a, grid in grid_instances().values():
        sca = sca_power_control(cfg, ch, a)
        gap = grid.report.sum_rate - sca.report.sum_rate
        if gap > max(1e-2, grid.resolution_error):
            sca_fail += 1
            worst = max(worst, gap)
        t2 = theorem2_power_solver(cfg, ch, a)
        t2_fail += t2.report.sum_rate < (grid.report.sum_rate - grid.resolution_error
                                         - 1e-9 * abs(grid.report.sum_rate))  # ulp-level ties
    report(6, sca_fail == 0 and t2_fail == 0,
           f"SCA within max(1e-2, resolution) of grid on {200 - sca_fail}/200 (worst shortfall {worst:.3f} bits); "
           f"analytic two-user solver >= grid - resolution on {200 - t2_fail}/200")


def test_c07_lemma1():
    fails = sum(not verify_lemma1(cfg, ch, a, grid.powers, atol=1e-2)
                for cfg, ch, a, grid in grid_instances().values())
    report(7, fails == 0, f"equal-SINR match within 1e-2 bits for {200 - fails}/200 grid optima")


# 8 -----------------------------------------------------------------------------

def slope_stats(values_by_p, ps):
    """Mean and SE of the per-trial least-squares slope (bits per dB)."""
    x = np.asarray(ps) - np.mean(ps)
    y = np.asarray(values_by_p)  # (P, trials)
    slopes = (x[:, None] * y).sum(axis=0) / (x ** 2).sum()
    return mean_se(slopes)


def test_c08_trends():
    ps = [0.0, 5.0, 10.0, 15.0]
    spec = ExperimentSpec(mode="sumrate_vs_p", trials=1000)
    settings = ScaSettings()
    data = {}
    for p in ps:
        cfg = spec.config(2, 6, 6, p)
        res = map_trials(reference_trial, (cfg, settings), spec.trials, n_workers(spec))
        data[p] = {k: np.array([r[k] for r in res]) for k in ("joint", "greedy", "random")}
    at10 = {k: mean_se(v) for k, v in data[10.0].items()}
    (mj, sj), (mg, sg), (mr, sr) = at10["joint"], at10["greedy"], at10["random"]
    order = mj - sj > mg + sg and mg - sg > mr + sr
    joint_means = [float(data[p]["joint"].mean()) for p in ps]
    rising = all(b > a for a, b in zip(joint_means, joint_means[1:]))
    flat = {}
    for k in ("greedy", "random"):
        m, se = slope_stats([data[p][k] for p in ps], ps)
        flat[k] = (float(m), float(se), abs(m) <= max(1.96 * se, 1e-9))
    ok = order and rising and all(f[2] for f in flat.values())
    report(8, ok, f"P=10dBm joint {mj:.2f}+-{sj:.2f} > greedy {mg:.3f}+-{sg:.3f} > random {mr:.3f}+-{sr:.3f}; "
                  f"joint vs P {[round(v, 2) for v in joint_means]}; "
                  + "; ".join(f"{k} slope {m:.2e}+-{se:.1e} bits/dB" for k, (m, se, _) in flat.items()))


# 9 -----------------------------------------------------------------------------

def r_squared(x, y):
    r = np.corrcoef(x, y)[0, 1]
    return float(r * r) if np.isfinite(r) else 0.0


def test_c09_iterations_linear_in_l():
    ls = [2, 4, 6, 8, 10, 12]
    spec = ExperimentSpec(mode="iters_vs_l", trials=200)
    settings = ScaSettings()
    iters, steps = [], []
    for l in ls:
        cfg = spec.config(2, 6, l, 10.0)
        res = map_trials(reference_trial, (cfg, settings), spec.trials, n_workers(spec))
        iters.append(float(np.mean([r["joint_iters"] for r in res])))
        steps.append(float(np.mean([r["joint_iters"] + r["joint_solver_steps"] for r in res])))
    r2 = r_squared(ls, iters)
    report(9, r2 >= 0.9, f"outer+SCA iterations vs L {[round(v, 2) for v in iters]}, R^2 {r2:.3f} (need 0.9); "
                         f"with inner solver steps {[round(v, 1) for v in steps]}, R^2 {r_squared(ls, steps):.3f}")


# 10 ----------------------------------------------------------------------------

def test_c10_determinism():
    specs = [
        ExperimentSpec(mode="table1", m=[2, 3], l=[2, 4], trials=50, seed=11),
        ExperimentSpec(mode="sumrate_vs_p", m=[4], l=[3], p_dbm=[0.0, 10.0], trials=20, seed=11),
        ExperimentSpec(mode="iters_vs_l", m=[4], l=[2, 4], trials=20, seed=11),
    ]
    same = 0
    for spec in specs:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            same += csv_body(run(spec)) == csv_body(run(spec))
    report(10, same == len(specs), f"{same}/{len(specs)} experiment re-runs gave identical CSV bodies")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main(["-s", "-q", __file__]))
