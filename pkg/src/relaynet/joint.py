"""Joint relay selection and power control.

Alternates max-min relay selection (at the current powers) with successive
convex approximation power control, accepting a new sum-rate only when it
beats the best so far by more than ``e_th`` relative.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .network import RateReport, RelayAssignment, evaluate
from .power import ScaSettings, sca_power_control
from .selection import select_max_min


@dataclass
class JointResult:
    assignment: RelayAssignment
    powers: np.ndarray
    report: RateReport
    outer_iters: int
    inner_iters_total: int
    wall_time: float
    trace: list = field(default_factory=list)  # accepted sum-rates
    sca_traces: list = field(default_factory=list)  # exact sum-rate per SCA step, per outer iteration
    capped: bool = False
    inner_steps_total: int = 0  # inner convex-solver iterations

    @property
    def total_iters(self) -> int:
        return self.outer_iters + self.inner_iters_total

    def summary(self) -> str:
        relays = "; ".join(",".join(str(int(r)) for r in row) for row in self.assignment.relays)
        return (f"sum_rate={self.report.sum_rate:.6f} bits/use  outer={self.outer_iters} "
                f"inner={self.inner_iters_total}  time={self.wall_time:.3f}s\n"
                f"relays (stage rows)={relays}\n"
                f"powers W (stage rows)={np.array2string(self.powers, precision=4)}\n"
                f"per_user_rate={np.array2string(self.report.per_user_rate, precision=4)}")


def _improves(new: float, best: float, e_th: float) -> bool:
    return new > 0 and (new - best) / new > e_th


def joint_optimize(cfg, channels, settings: ScaSettings = ScaSettings()) -> JointResult:
    start = time.perf_counter()
    e_th = settings.e_th
    best_rate = 0.0
    best_assign = None
    best_powers = cfg.full_power()
    powers = best_powers
    trace, sca_traces = [], []
    inner_total = steps = 0
    capped = True
    n = 0
    for n in range(1, settings.max_outer_iters + 1):
        candidate = select_max_min(cfg, channels, powers)
        rate = evaluate(cfg, channels, candidate, powers).sum_rate
        if best_assign is None or _improves(rate, best_rate, e_th):
            best_assign, best_powers = candidate, powers
            if _improves(rate, best_rate, e_th):
                best_rate = rate
                trace.append(rate)
        sca = sca_power_control(cfg, channels, best_assign, powers, settings, stop="q", warn=False)
        steps += sca.inner_steps
        inner_total += sca.iterations
        sca_traces.append(sca.trace)
        powers = sca.powers
        rate = sca.report.sum_rate
        if _improves(rate, best_rate, e_th):
            best_rate, best_powers = rate, powers
            trace.append(rate)
        else:
            capped = False
            break
    report = evaluate(cfg, channels, best_assign, best_powers)
    return JointResult(best_assign, best_powers, report, n, inner_total,
                       time.perf_counter() - start, trace, sca_traces, capped, steps)
