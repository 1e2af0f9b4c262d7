"""Power control for a fixed relay assignment.

The sum-rate ``sum_i log2(1 + min_l sinr[i, l])`` is maximized by successive
convex approximation: each user's ``log(1 + z)`` is replaced by the tight
lower bound ``a * log(z) + b`` at the current SINR, which in log-power
variables ``q = log(p)`` gives a concave problem (affine minus log-sum-exp
per hop). SINR matching and a brute-force grid oracle are provided as
references.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .network import NetworkConfig, RateReport, evaluate, report_from_sinr, sinr_matrix


@dataclass(frozen=True)
class BoundCoefficients:
    a: np.ndarray
    b: np.ndarray

    def value(self, z) -> np.ndarray:
        """Lower bound on ``log(1 + z)`` (natural log)."""
        return self.a * np.log(z) + self.b


def bound_coefficients(anchor_sinr) -> BoundCoefficients:
    z = np.atleast_1d(np.asarray(anchor_sinr, dtype=float))
    if np.any(~(z > 0)):
        raise ValueError("anchor SINRs must be positive")
    a = z / (1.0 + z)
    b = np.log1p(z) - a * np.log(z)
    return BoundCoefficients(a, b)


@dataclass(frozen=True)
class ScaSettings:
    e_th: float = 1e-3
    max_outer_iters: int = 100
    max_inner_iters: int = 500
    power_floor_ratio: float = 1e-12
    inner_solver: str = "slsqp"  # or "supergradient"
    inner_tol: float = 1e-10
    step0: float = 1.0  # supergradient step = step0 / sqrt(k + 1)

    def __post_init__(self):
        if not 0 < self.e_th < 1:
            raise ValueError("e_th must lie in (0, 1)")
        if not 0 < self.power_floor_ratio < 1:
            raise ValueError("power floor must be below p_max")
        if self.inner_solver not in ("slsqp", "supergradient"):
            raise ValueError(f"unknown inner solver {self.inner_solver!r}")

    def power_floor(self, cfg: NetworkConfig, max_gain: float | None = None) -> float:
        """``p_max * power_floor_ratio``, lowered if needed so that a node at the
        floor interferes at most 1e-6 of the noise power."""
        floor = cfg.p_max * self.power_floor_ratio
        if max_gain is not None and max_gain > 0:
            floor = min(floor, 1e-6 * cfg.noise_variance / max_gain)
        return floor


def assignment_gains(cfg, channels, assign) -> np.ndarray:
    """Gain matrices of the chosen links, shape (L, N, N), ``[l, j, i]`` = tx of
    user ``j`` to rx of user ``i`` in hop ``l``."""
    nodes = assign.nodes
    return np.stack([channels[l][np.ix_(nodes[l], nodes[l + 1])] for l in range(cfg.l_hops)])


class LogSinrModel:
    """``f[i, l](q) = q[l, i] + log G_ii - log(noise + sum_{j != i} e^q[l, j] G_ji)``,
    the log-SINR of user ``i`` on hop ``l`` as a function of log-powers."""

    def __init__(self, gains: np.ndarray, noise: float):
        self.gains = gains
        self.noise = noise
        self.L, self.N, _ = gains.shape
        self.own = np.log(np.einsum("lii->li", gains))  # (L, N)
        self.cross = gains * (1.0 - np.eye(self.N))  # (L, N, N), zero diagonal

    def interference(self, q) -> np.ndarray:
        return self.noise + np.einsum("lj,lji->li", np.exp(q), self.cross)  # (L, N)

    def values(self, q) -> np.ndarray:
        """Log-SINRs, shape (L, N)."""
        return q + self.own - np.log(self.interference(q))

    def grads(self, q) -> np.ndarray:
        """``out[l, i, k]`` = d f[i, l] / d q[l, k]."""
        w = np.exp(q)[:, :, None] * self.cross  # [l, k, i]
        out = -np.transpose(w, (0, 2, 1)) / self.interference(q)[:, :, None]
        idx = np.arange(self.N)
        out[:, idx, idx] = 1.0
        return out


@dataclass
class InnerResult:
    q: np.ndarray
    t: np.ndarray
    objective: float
    iterations: int
    converged: bool


def _surrogate(model, coeffs, q) -> tuple[float, np.ndarray]:
    t = model.values(q).min(axis=0)
    return float(np.sum(coeffs.a * t + coeffs.b)), t


def solve_inner_concave(cfg, channels, assign, coeffs: BoundCoefficients,
                        settings: ScaSettings = ScaSettings(), q0=None,
                        model: LogSinrModel | None = None) -> InnerResult:
    """Maximize ``sum_i a_i * t_i + b_i`` with ``t_i = min_l f[i, l](q)`` over the
    box ``log(floor) <= q <= log(p_max)``. The result is never worse than ``q0``."""
    if model is None:
        model = LogSinrModel(assignment_gains(cfg, channels, assign), cfg.noise_variance)
    lo, hi = np.log(settings.power_floor(cfg, model.gains.max())), np.log(cfg.p_max)
    if q0 is None:
        q0 = np.full((model.L, model.N), hi)
    q0 = np.clip(np.asarray(q0, dtype=float), lo, hi)
    if settings.inner_solver == "slsqp":
        res = _inner_slsqp(model, coeffs, q0, lo, hi, settings)
    else:
        res = _inner_supergradient(model, coeffs, q0, lo, hi, settings)
    start_obj, start_t = _surrogate(model, coeffs, q0)
    if res.objective < start_obj:
        return InnerResult(q0, start_t, start_obj, res.iterations, res.converged)
    return res


def _inner_slsqp(model, coeffs, q0, lo, hi, settings) -> InnerResult:
    L, N = model.L, model.N
    nq = L * N
    a = coeffs.a
    # constraint k = l * N + i : f[i, l](q) - t_i >= 0
    t_sel = np.zeros((nq, N))
    t_sel[np.arange(nq), np.tile(np.arange(N), L)] = 1.0

    def fun(x):
        return -float(a @ x[nq:]), np.concatenate([np.zeros(nq), -a])

    def cons(x):
        return model.values(x[:nq].reshape(L, N)).ravel() - t_sel @ x[nq:]

    def cons_jac(x):
        g = model.grads(x[:nq].reshape(L, N))  # (L, N, N)
        jq = np.zeros((L, N, L, N))
        jq[np.arange(L), :, np.arange(L), :] = g
        return np.hstack([jq.reshape(nq, nq), -t_sel])

    t0 = model.values(q0).min(axis=0)
    x0 = np.concatenate([q0.ravel(), t0])
    bounds = [(lo, hi)] * nq + [(None, None)] * N
    with warnings.catch_warnings():
        # SLSQP clips its own line-search steps to the box and says so
        warnings.simplefilter("ignore", RuntimeWarning)
        sol = minimize(fun, x0, jac=True, method="SLSQP", bounds=bounds,
                       constraints=[{"type": "ineq", "fun": cons, "jac": cons_jac}],
                       options={"maxiter": settings.max_inner_iters, "ftol": settings.inner_tol})
    q = np.clip(sol.x[:nq].reshape(L, N), lo, hi)
    obj, t = _surrogate(model, coeffs, q)
    return InnerResult(q, t, obj, int(sol.nit), bool(sol.success))


def _inner_supergradient(model, coeffs, q0, lo, hi, settings) -> InnerResult:
    q = q0.copy()
    best_q, best = q0.copy(), _surrogate(model, coeffs, q0)[0]
    stall = 0
    for k in range(settings.max_inner_iters):
        f = model.values(q)  # (L, N)
        active = np.argmin(f, axis=0)  # smallest active hop per user
        g = np.zeros_like(q)
        grads = model.grads(q)
        for i in range(model.N):
            g[active[i]] += coeffs.a[i] * grads[active[i], i]
        norm = np.linalg.norm(g)
        if norm == 0:
            break
        q = np.clip(q + settings.step0 / np.sqrt(k + 1.0) * g / norm, lo, hi)
        obj = _surrogate(model, coeffs, q)[0]
        if obj > best + settings.inner_tol * max(1.0, abs(best)):
            best_q, best, stall = q.copy(), obj, 0
        else:
            stall += 1
            if stall >= 50:
                break
    obj, t = _surrogate(model, coeffs, best_q)
    return InnerResult(best_q, t, obj, k + 1, stall >= 50)


@dataclass
class ScaResult:
    powers: np.ndarray
    report: RateReport
    trace: list = field(default_factory=list)  # exact sum-rate after each outer step
    iterations: int = 0
    converged: bool = False
    inner_steps: int = 0  # inner solver iterations summed over outer steps

    def __iter__(self):
        return iter((self.powers, self.report))


def sca_power_control(cfg, channels, assign, initial_powers=None,
                      settings: ScaSettings = ScaSettings(), stop: str = "rate",
                      warn: bool = True) -> ScaResult:
    """Successive convex approximation from ``initial_powers`` (default full power).

    ``stop="rate"`` ends when the relative sum-rate gain drops below ``e_th``;
    ``stop="q"`` ends when ``|Q(m) - Q(m-1)| / |Q(m)| < e_th``.
    """
    if stop not in ("rate", "q"):
        raise ValueError("stop must be 'rate' or 'q'")
    model = LogSinrModel(assignment_gains(cfg, channels, assign), cfg.noise_variance)
    floor = settings.power_floor(cfg, model.gains.max())
    p = cfg.full_power() if initial_powers is None else cfg.check_powers(initial_powers)
    if np.any(p < floor):
        if warn:
            warnings.warn("initial powers below the floor were raised to it", RuntimeWarning)
        p = np.maximum(p, floor)
    q = np.log(p)
    report = evaluate(cfg, channels, assign, p)
    trace = [report.sum_rate]
    converged = False
    m = steps = 0
    for m in range(1, settings.max_outer_iters + 1):
        anchors = np.maximum(report.effective_sinr, np.finfo(float).tiny)
        inner = solve_inner_concave(cfg, channels, assign, bound_coefficients(anchors),
                                    settings, q0=q, model=model)
        steps += inner.iterations
        new_p = np.exp(inner.q)
        new_report = evaluate(cfg, channels, assign, new_p)
        dq = np.linalg.norm(inner.q - q) / max(np.linalg.norm(inner.q), 1e-300)
        gain = new_report.sum_rate - report.sum_rate
        if gain < 0:
            # the tight bound makes this impossible up to rounding; keep the old iterate
            converged = True
            break
        q, p, report = inner.q, new_p, new_report
        trace.append(report.sum_rate)
        rel = gain / report.sum_rate if report.sum_rate > 0 else 0.0
        if (stop == "q" and dq < settings.e_th) or (stop == "rate" and rel < settings.e_th):
            converged = True
            break
    p, report = snap_to_zero(cfg, channels, assign, p, report, floor, settings.e_th)
    return ScaResult(p, report, trace, m, converged, steps)


def snap_to_zero(cfg, channels, assign, powers, report, floor, e_th):
    """Set powers below ``2 * floor`` to exactly 0 unless that costs more than
    ``e_th`` relative sum-rate."""
    small = powers < 2 * floor
    if not small.any():
        return powers, report
    snapped = np.where(small, 0.0, powers)
    new = evaluate(cfg, channels, assign, snapped)
    if new.sum_rate >= report.sum_rate * (1 - e_th):
        return snapped, new
    return powers, report


@dataclass
class MatchingResult:
    powers: np.ndarray
    report: RateReport
    iterations: int
    converged: bool


def sinr_matching(cfg, channels, assign, settings: ScaSettings = ScaSettings(),
                  tol: float = 1e-12, max_iters: int | None = None, patience: int = 3) -> MatchingResult:
    """Per user, equalize the SINR of every hop of its path at the highest level
    reachable with ``p_max``, iterating because users interfere with each other.

    Iteration stops when the powers stop moving, when the bottleneck SINRs
    change by less than ``tol`` (relative) for ``patience`` steps, or after
    ``max_iters`` steps (default ``settings.max_inner_iters``). On
    interference-limited paths the fixed points form a continuum along the
    singular boundary of the bottleneck hop and the iterate drifts slowly
    along it, so the cap can bind there. The final iterate is replaced by the
    smallest powers meeting its bottleneck SINRs on every hop when that is
    numerically clean; those are componentwise no larger and give exactly
    equal per-hop SINRs.
    """
    G = assignment_gains(cfg, channels, assign)  # [l, j, i]
    own = np.einsum("lii->li", G)
    cross = G * (1.0 - np.eye(cfg.n_users))
    noise = cfg.noise_variance

    if max_iters is None:
        max_iters = settings.max_inner_iters

    def step(p):
        interf = noise + np.einsum("lj,lji->li", p, cross)  # (L, N)
        target = (cfg.p_max * own / interf).min(axis=0)
        return np.minimum(target * interf / own, cfg.p_max), p * own / interf

    p = cfg.full_power()
    damping = 1.0
    signs = []
    prev_rate = prev_eff = None
    calm = 0
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        new_p, sinr = step(p)
        eff = sinr.min(axis=0)
        new_p = damping * new_p + (1 - damping) * p
        change = np.max(np.abs(new_p - p)) / cfg.p_max
        p = new_p
        if prev_eff is not None and np.all(np.abs(eff - prev_eff) <= tol * eff):
            calm += 1
        else:
            calm = 0
        prev_eff = eff
        if change < tol or calm >= patience:
            converged = True
            break
        rate = float(np.log2(1.0 + eff).sum())
        if prev_rate is not None and rate != prev_rate:
            signs.append(rate > prev_rate)
            if len(signs) >= 4 and all(signs[-k] != signs[-k - 1] for k in range(1, 4)):
                damping = 0.5
        prev_rate = rate
    report = evaluate(cfg, channels, assign, p)
    # near the singular boundary the exact targets can overshoot p_max by
    # rounding, so back them off slightly when needed
    for backoff in (0.0, 1e-12, 1e-10, 1e-8):
        equal = powers_for_targets(cfg, channels, assign, report.effective_sinr * (1.0 - backoff))
        if np.all(np.isfinite(equal)) and np.all(equal >= 0) and np.all(equal <= cfg.p_max * (1 + 1e-12)):
            equal = np.minimum(equal, cfg.p_max)
            eq_report = evaluate(cfg, channels, assign, equal)
            if eq_report.sum_rate >= report.sum_rate * (1 - 1e-7):
                p, report = equal, eq_report
            break
    return MatchingResult(p, report, it, converged)


def powers_for_targets(cfg, channels, assign, targets) -> np.ndarray:
    """Smallest powers giving every hop of user ``i`` exactly SINR ``targets[i]``.

    Solves one linear system per hop; entries may fall outside ``[0, p_max]``
    (or be NaN) when the targets are not achievable.
    """
    G = assignment_gains(cfg, channels, assign)
    g = np.asarray(targets, dtype=float)
    out = np.empty((cfg.l_hops, cfg.n_users))
    for l in range(cfg.l_hops):
        A = -g[:, None] * G[l].T
        A[np.diag_indices_from(A)] = np.diagonal(G[l])
        try:
            out[l] = np.linalg.solve(A, cfg.noise_variance * g)
        except np.linalg.LinAlgError:
            out[l] = np.nan
    out[:, g == 0] = 0.0
    return out


@dataclass
class GridResult:
    powers: np.ndarray
    report: RateReport
    resolution_error: float
    n_evaluated: int

    def __iter__(self):
        return iter((self.powers, self.report))


# fixed ratio between consecutive grid points, so coarser grids nest in finer ones
GRID_RATIO = 10.0 ** (-1.0 / 16.0)


def power_grid(p_max: float, points: int) -> np.ndarray:
    """``{0}`` plus ``points - 1`` geometric values ``p_max * GRID_RATIO**k``."""
    if points < 2:
        raise ValueError("need at least two grid points")
    return np.concatenate([[0.0], p_max * GRID_RATIO ** np.arange(points - 2, -1, -1)])


def _best_on_product_grid(cfg, G, axes, chunk: int = 1 << 22):
    """Exhaustive max of the sum-rate over a per-variable grid; sinr of each hop
    depends only on that hop's transmit powers, so hops are tabulated separately."""
    L, N = cfg.l_hops, cfg.n_users
    offdiag = 1.0 - np.eye(N)
    combos, tables = [], []
    for l in range(L):
        c = np.array(list(itertools.product(*axes[l])), dtype=float)  # (K, N)
        recv = c[:, :, None] * G[l][None]  # [k, j, i]
        signal = np.einsum("kii->ki", recv)
        interf = np.einsum("kji,ji->ki", recv, offdiag)
        combos.append(c)
        tables.append(signal / (cfg.noise_variance + interf))
    rest = tables[1:]
    rest_size = int(np.prod([len(t) for t in rest])) if rest else 1
    step = max(1, chunk // max(rest_size * N, 1))
    best_val, best_idx = -np.inf, None
    for start in range(0, len(tables[0]), step):
        acc = tables[0][start:start + step]
        for t in rest:
            acc = np.minimum(acc[..., None, :], t)
        obj = np.log2(1.0 + acc).sum(axis=-1)
        k = int(np.argmax(obj))
        if obj.flat[k] > best_val:
            best_val = float(obj.flat[k])
            idx = np.unravel_index(k, obj.shape)
            best_idx = (idx[0] + start,) + tuple(idx[1:])
    powers = np.array([combos[l][best_idx[l]] for l in range(L)])
    n_eval = len(tables[0]) * rest_size
    return powers, best_val, n_eval


def grid_power_oracle(cfg, channels, assign, points: int = 50, budget: int = 50_000_000,
                      refine_points: int = 11) -> GridResult:
    """Brute-force power control over ``power_grid(p_max, points)`` per variable.

    ``resolution_error`` is the sum-rate gained by a finer local grid spanning
    one grid step around the optimum; it estimates how far the coarse optimum
    sits below the continuous one.
    """
    n_vars = cfg.l_hops * cfg.n_users
    if points ** n_vars > budget:
        raise ValueError(f"{points}^{n_vars} grid points exceed budget {budget}")
    G = assignment_gains(cfg, channels, assign)
    # descending, so ties resolve toward the larger power
    grid = power_grid(cfg.p_max, points)[::-1]
    axes = [[grid] * cfg.n_users for _ in range(cfg.l_hops)]
    powers, best, n_eval = _best_on_product_grid(cfg, G, axes)
    smallest = grid[-2]
    u = GRID_RATIO ** np.linspace(-1.0, 1.0, refine_points)
    local = []
    for l in range(cfg.l_hops):
        row = []
        for i in range(cfg.n_users):
            center = powers[l, i] if powers[l, i] > 0 else smallest
            row.append(np.unique(np.concatenate([[0.0, powers[l, i]], np.minimum(center * u, cfg.p_max)]))[::-1])
        local.append(row)
    _, refined, _ = _best_on_product_grid(cfg, G, local)
    report = evaluate(cfg, channels, assign, powers)
    return GridResult(powers, report, max(refined - report.sum_rate, 0.0), n_eval)
