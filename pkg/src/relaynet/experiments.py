"""Monte Carlo experiments: Table 1 gains and the sum-rate / complexity sweeps.

Every trial is a pure function of ``(seed, draw_index)``; trials are farmed
out to worker processes and gathered back in draw order, so results do not
depend on the worker count.
"""

from __future__ import annotations

import csv
import io
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Callable

import numpy as np

from .joint import joint_optimize
from .network import (NetworkConfig, db_to_linear, dbm_to_watts, draw_rng, evaluate,
                      generate_channels, noise_variance_ktb)
from .power import ScaSettings, sinr_matching
from .selection import SelectionContext, Selector, select_greedy_reference, select_random_reference

MODES = ("table1", "sumrate_vs_p", "sumrate_vs_l", "timing_vs_l", "iters_vs_l", "single")
RANDOM_STREAM = 1


@dataclass
class ExperimentSpec:
    mode: str = "single"
    n: list = field(default_factory=lambda: [2])
    m: list = field(default_factory=lambda: [6])
    l: list = field(default_factory=lambda: [6])
    w: list = field(default_factory=lambda: [2, 4])
    p_dbm: list = field(default_factory=lambda: [10.0])
    trials: int = 100
    seed: int = 0
    fading_only: bool = False
    snr_db: float = 10.0
    total_distance_km: float = 2.0
    path_loss_exponent: float = 3.6
    distance_unit: str = "km"
    temperature_k: float = 290.0
    bandwidth_hz: float = 200e3
    e_th: float = 1e-3
    threads: int = 0
    out: str | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; choose from {MODES}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.distance_unit not in ("km", "m"):
            raise ValueError("distance_unit must be 'km' or 'm'")
        for n in self.n:
            for m in self.m:
                if n < 1 or m < n:
                    raise ValueError(f"need 1 <= n <= m, got n={n}, m={m}")
        if any(l < 2 for l in self.l):
            raise ValueError("every l must be >= 2")
        if any(w < 2 for w in self.w):
            raise ValueError("every w must be >= 2")
        if self.mode == "table1":
            self.fading_only = True  # Table 1 is specified at a fixed average SNR

    def config(self, n: int, m: int, l: int, p_dbm: float | None = None) -> NetworkConfig:
        if self.fading_only:
            # unit-mean fading, P / noise fixed by the average received SNR
            return NetworkConfig(n, m, l, p_max=1.0, noise_variance=1.0 / db_to_linear(self.snr_db),
                                 path_loss_exponent=0.0, rng_seed=self.seed)
        scale = 1000.0 if self.distance_unit == "m" else 1.0
        return NetworkConfig(
            n, m, l,
            p_max=dbm_to_watts(self.p_dbm[0] if p_dbm is None else p_dbm),
            noise_variance=noise_variance_ktb(self.temperature_k, self.bandwidth_hz),
            total_distance_km=self.total_distance_km * scale,
            path_loss_exponent=self.path_loss_exponent,
            rng_seed=self.seed,
        )

    def resolved(self) -> dict:
        d = asdict(self)
        d.pop("threads")
        return d


def n_workers(spec: ExperimentSpec) -> int:
    if spec.threads > 0:
        return spec.threads
    env = os.environ.get("RELAYNET_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, os.cpu_count() or 1))


def _run_chunk(fn, args, draws):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return [fn(*args, d) for d in draws]


def map_trials(fn: Callable, args: tuple, trials: int, workers: int) -> list:
    """``[fn(*args, d) for d in range(trials)]``, possibly in parallel."""
    if workers <= 1 or trials < 2 * workers:
        return _run_chunk(fn, args, range(trials))
    chunks = np.array_split(np.arange(trials), workers * 4)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(_run_chunk, [fn] * len(chunks), [args] * len(chunks),
                         [c.tolist() for c in chunks])
        return [r for part in parts for r in part]


def mean_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    se = float(x.std(ddof=1) / np.sqrt(len(x))) if len(x) > 1 else 0.0
    return float(x.mean()), se


def gain_percent(strategy, baseline) -> tuple[float, float]:
    """Paired gain 100 * (mean(s) - mean(b)) / mean(b) and its delta-method SE."""
    s, b = np.asarray(strategy, float), np.asarray(baseline, float)
    g = s.mean() / b.mean() - 1.0
    se = (s - (1.0 + g) * b).std(ddof=1) / np.sqrt(len(s)) / b.mean() if len(s) > 1 else 0.0
    return 100.0 * g, 100.0 * se


# --- Table 1 -----------------------------------------------------------------

def table1_selectors(ws) -> list[Selector]:
    return ([Selector("window", w) for w in ws] + [Selector("block", w) for w in ws]
            + [Selector("adhoc"), Selector("maxmin")])


def table1_trial(cfg: NetworkConfig, selectors: list, draw: int) -> dict:
    ch = generate_channels(cfg, draw)
    p = cfg.full_power()
    ctx = SelectionContext(cfg, ch, p)
    out = {"hop": evaluate(cfg, ch, Selector("hop")(cfg, ctx, p), p).sum_rate}
    for s in selectors:
        out[s.label] = evaluate(cfg, ch, s(cfg, ctx, p), p).sum_rate
    return out


def run_table1(spec: ExperimentSpec) -> tuple[list, list]:
    selectors = table1_selectors(spec.w)
    labels = [s.label for s in selectors]
    columns = ["n", "m", "l"] + [f"{lab}_gain_pct" for lab in labels] + ["hop_mean", "hop_se"]
    columns += [f"{lab}_{k}" for lab in labels for k in ("mean", "se", "gain_se")]
    rows = []
    for n in spec.n:
        for m in spec.m:
            for l in spec.l:
                cfg = spec.config(n, m, l)
                active = [s for s in selectors if s.applicable(cfg)]
                res = map_trials(table1_trial, (cfg, active), spec.trials, n_workers(spec))
                hop = [r["hop"] for r in res]
                row = {"n": n, "m": m, "l": l}
                row["hop_mean"], row["hop_se"] = mean_se(hop)
                for s in selectors:
                    lab = s.label
                    if s not in active:
                        for k in ("gain_pct", "mean", "se", "gain_se"):
                            row[f"{lab}_{k}"] = None
                        continue
                    vals = [r[lab] for r in res]
                    row[f"{lab}_mean"], row[f"{lab}_se"] = mean_se(vals)
                    row[f"{lab}_gain_pct"], row[f"{lab}_gain_se"] = gain_percent(vals, hop)
                rows.append(row)
    return columns, rows


# --- Sum-rate and complexity sweeps -----------------------------------------

def reference_trial(cfg: NetworkConfig, settings: ScaSettings, draw: int) -> dict:
    """Joint optimization against greedy / random selection with SINR matching."""
    ch = generate_channels(cfg, draw)
    joint = joint_optimize(cfg, ch, settings)
    t0 = time.perf_counter()
    greedy = sinr_matching(cfg, ch, select_greedy_reference(cfg, ch), settings)
    t1 = time.perf_counter()
    rnd = sinr_matching(cfg, ch, select_random_reference(cfg, draw_rng(cfg.rng_seed, draw, RANDOM_STREAM)),
                        settings)
    t2 = time.perf_counter()
    return {
        "joint": joint.report.sum_rate,
        "greedy": greedy.report.sum_rate,
        "random": rnd.report.sum_rate,
        "joint_iters": joint.total_iters,
        "joint_outer": joint.outer_iters,
        "joint_inner": joint.inner_iters_total,
        "joint_solver_steps": joint.inner_steps_total,
        "joint_time": joint.wall_time,
        "greedy_time": t1 - t0,
        "random_time": t2 - t1,
    }


RATE_KEYS = ("joint", "greedy", "random")
TIME_KEYS = ("joint_time", "greedy_time", "random_time")


def _sweep(spec: ExperimentSpec, points, keys) -> tuple[list, list]:
    settings = ScaSettings(e_th=spec.e_th)
    columns = ["n", "m", "l", "p_dbm"] + [f"{k}_{s}" for k in keys for s in ("mean", "se")]
    rows = []
    for n, m, l, p in points:
        cfg = spec.config(n, m, l, p)
        res = map_trials(reference_trial, (cfg, settings), spec.trials, n_workers(spec))
        row = {"n": n, "m": m, "l": l, "p_dbm": p}
        for k in keys:
            row[f"{k}_mean"], row[f"{k}_se"] = mean_se([r[k] for r in res])
        rows.append(row)
    return columns, rows


def _points(spec):
    return [(n, m, l, p) for n in spec.n for m in spec.m for l in spec.l for p in spec.p_dbm]


def run_sumrate_vs_p(spec: ExperimentSpec):
    return _sweep(spec, _points(spec), RATE_KEYS)


def run_sumrate_vs_l(spec: ExperimentSpec):
    return _sweep(spec, _points(spec), RATE_KEYS)


def run_complexity(spec: ExperimentSpec):
    keys = ("joint_iters", "joint_outer", "joint_inner", "joint_solver_steps") + TIME_KEYS
    return _sweep(spec, _points(spec), keys)


def run_single(spec: ExperimentSpec, draw: int = 0):
    cfg = spec.config(spec.n[0], spec.m[0], spec.l[0], spec.p_dbm[0])
    return joint_optimize(cfg, generate_channels(cfg, draw), ScaSettings(e_th=spec.e_th))


RUNNERS = {
    "table1": run_table1,
    "sumrate_vs_p": run_sumrate_vs_p,
    "sumrate_vs_l": run_sumrate_vs_l,
    "timing_vs_l": run_complexity,
    "iters_vs_l": run_complexity,
}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def to_csv(spec: ExperimentSpec, columns: list, rows: list) -> str:
    """CSV text with a ``#`` header recording the resolved spec."""
    buf = io.StringIO()
    for k, v in spec.resolved().items():
        if k != "out":
            buf.write(f"# {k} = {_fmt(v) if not isinstance(v, list) else ','.join(map(str, v))}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def csv_body(text: str, drop_timing: bool = True) -> str:
    """Data rows of :func:`to_csv` output, optionally without timing columns."""
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    table = list(csv.reader(lines))
    if not table:
        return ""
    keep = [i for i, c in enumerate(table[0]) if not (drop_timing and "time" in c)]
    return "\n".join(",".join(r[i] for i in keep) for r in table)


def run(spec: ExperimentSpec) -> str:
    columns, rows = RUNNERS[spec.mode](spec)
    return to_csv(spec, columns, rows)


def parse_config_file(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed config line: {raw!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _coerce(name: str, value):
    kinds = {f.name: f for f in fields(ExperimentSpec)}
    if name not in kinds:
        raise ValueError(f"unknown setting {name!r}")
    if not isinstance(value, str):
        return value
    if name in ("n", "m", "l", "w"):
        return [int(x) for x in value.split(",") if x.strip()]
    if name == "p_dbm":
        return [float(x) for x in value.split(",") if x.strip()]
    if name in ("trials", "seed", "threads"):
        return int(value)
    if name == "fading_only":
        if value.lower() not in ("1", "0", "true", "false", "yes", "no"):
            raise ValueError(f"bad boolean {value!r}")
        return value.lower() in ("1", "true", "yes")
    if name in ("mode", "out", "distance_unit"):
        return value
    return float(value)


def make_spec(settings: dict) -> ExperimentSpec:
    return ExperimentSpec(**{k: _coerce(k, v) for k, v in settings.items()})
