"""Analytic power control for two users.

An equal-SINR solution is parametrized by the two per-user SINRs
``(g1, g2)``: given them, the powers of every hop follow from a 2x2 linear
system. Pinning a power to ``p_max`` gives a bilinear equation in
``(g1, g2)``; pinning it to 0 silences that user (``g = 0``). Two pins
therefore fix ``(g1, g2)`` via one quadratic, and enumerating the
``0 / p_max`` pins over all pairs of transmitters yields every candidate
of the binary-plus-SINR-matching form.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .network import evaluate
from .power import assignment_gains, powers_for_targets


@dataclass(frozen=True)
class BinaryPattern:
    """``pinned`` maps ``(stage, user)`` to 0.0 or p_max."""

    pinned: tuple

    def __post_init__(self):
        if len(self.pinned) < 2:
            raise ValueError("a pattern pins at least two powers")
        keys = [k for k, _ in self.pinned]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate pinned position")


@dataclass
class EqualSinrSolution:
    powers: np.ndarray | None
    per_user_sinr: np.ndarray | None
    feasible: bool
    sum_rate: float = -np.inf


INFEASIBLE = EqualSinrSolution(None, None, False)


def _hop_powers(G, noise, g1, g2):
    """Powers of each hop giving SINRs (g1, g2); G[l, j, i] tx j -> rx i."""
    a11, a22 = G[:, 0, 0], G[:, 1, 1]
    c21, c12 = G[:, 1, 0], G[:, 0, 1]  # user 2 -> user 1 rx, user 1 -> user 2 rx
    det = a11 * a22 - g1 * g2 * c12 * c21
    p1 = g1 * noise * (a22 + g2 * c21) / det
    p2 = g2 * noise * (a11 + g1 * c12) / det
    return np.stack([p1, p2], axis=1), det


def _pin_equation(G, noise, stage, user, v):
    """Coefficients (c0, c1, c2, c3) of c0 + c1 g1 + c2 g2 + c3 g1 g2 = 0 for
    ``p[stage, user] = v``."""
    a11, a22 = G[stage, 0, 0], G[stage, 1, 1]
    c21, c12 = G[stage, 1, 0], G[stage, 0, 1]
    if user == 0:
        return np.array([-v * a11 * a22, noise * a22, 0.0, noise * c21 + v * c12 * c21])
    return np.array([-v * a11 * a22, 0.0, noise * a11, noise * c12 + v * c12 * c21])


def _solve_bilinear_pair(e1, e2):
    """Non-negative solutions (g1, g2) of two bilinear equations."""
    # write each as A_k(g2) g1 + B_k(g2) = 0 and eliminate g1
    c0a, c1a, c2a, c3a = e1
    c0b, c1b, c2b, c3b = e2
    quad = np.array([
        c3a * c2b - c3b * c2a,
        c1a * c2b + c3a * c0b - c1b * c2a - c3b * c0a,
        c1a * c0b - c1b * c0a,
    ])
    scale = np.max(np.abs(quad))
    if scale == 0:
        return []
    roots = np.roots(quad / scale)
    out = []
    for x in roots:
        if abs(x.imag) > 1e-9 * max(1.0, abs(x.real)) or x.real < 0:
            continue
        g2 = float(x.real)
        A = (c1a + c3a * g2, c1b + c3b * g2)
        B = (c0a + c2a * g2, c0b + c2b * g2)
        k = 0 if abs(A[0]) >= abs(A[1]) else 1
        if A[k] == 0:
            continue
        g1 = -B[k] / A[k]
        if g1 >= 0:
            out.append((g1, g2))
    return out


def solve_equal_sinr_chain(cfg, channels, assign, pattern: BinaryPattern,
                           rtol: float = 1e-9) -> EqualSinrSolution:
    """Powers with every hop of user ``i`` at the same SINR, honoring the pins.

    When several roots exist the feasible one with the best sum-rate is kept.
    A user pinned to zero anywhere is silenced on its whole path; if no
    ``p_max`` pin then fixes the other user's level, that user is SINR matched
    at its highest reachable level.
    """
    if cfg.n_users != 2:
        raise ValueError("the analytic solver handles two users only")
    G = assignment_gains(cfg, channels, assign)
    noise = cfg.noise_variance
    pins = [(s, i, float(v)) for (s, i), v in pattern.pinned]
    for s, i, v in pins:
        if not (0 <= s < cfg.l_hops and i in (0, 1)) or v not in (0.0, float(cfg.p_max)):
            raise ValueError(f"bad pin {(s, i, v)}")
    silenced = {i for s, i, v in pins if v == 0.0}
    full_pins = [(s, i, v) for s, i, v in pins if v != 0.0]

    candidates = []
    if silenced == {0, 1}:
        candidates = [(0.0, 0.0)]
    elif silenced:
        (k,) = silenced
        o = 1 - k
        if any(i == k for _, i, _ in full_pins):
            return INFEASIBLE
        levels = [cfg.p_max * G[s, o, o] / noise for s, i, _ in full_pins]
        if not levels:
            levels = [float(np.min(cfg.p_max * G[:, o, o] / noise))]
        g = [0.0, 0.0]
        g[o] = levels[0]
        candidates = [tuple(g)]
    else:
        eqs = [_pin_equation(G, noise, s, i, v) for s, i, v in full_pins]
        candidates = _solve_bilinear_pair(eqs[0], eqs[1])

    best = INFEASIBLE
    for g1, g2 in candidates:
        p, det = _hop_powers(G, noise, g1, g2)
        if np.any(det <= 0) or not np.all(np.isfinite(p)):
            continue
        if np.any(p < -rtol * cfg.p_max) or np.any(p > cfg.p_max * (1 + rtol)):
            continue
        p = np.clip(p, 0.0, cfg.p_max)
        if any(abs(p[s, i] - v) > rtol * cfg.p_max for s, i, v in pins):
            continue
        rate = evaluate(cfg, channels, assign, p).sum_rate
        if rate > best.sum_rate:
            best = EqualSinrSolution(p, np.array([g1, g2]), True, rate)
    return best


def binary_patterns(cfg):
    """All patterns pinning exactly two of the 2L powers to 0 or p_max."""
    positions = [(s, i) for s in range(cfg.l_hops) for i in range(2)]
    values = (0.0, float(cfg.p_max))
    for pair in itertools.combinations(positions, 2):
        for v in itertools.product(values, repeat=2):
            yield BinaryPattern(tuple(zip(pair, v)))


@dataclass
class Theorem2Result:
    powers: np.ndarray
    report: object
    pattern: BinaryPattern
    n_patterns: int
    n_feasible: int

    def __iter__(self):
        return iter((self.powers, self.report))


def theorem2_power_solver(cfg, channels, assign) -> Theorem2Result:
    """Best equal-SINR candidate over all two-pin binary patterns."""
    best, best_pattern = None, None
    n = n_ok = 0
    for pattern in binary_patterns(cfg):
        n += 1
        sol = solve_equal_sinr_chain(cfg, channels, assign, pattern)
        if not sol.feasible:
            continue
        n_ok += 1
        if best is None or sol.sum_rate > best.sum_rate:
            best, best_pattern = sol, pattern
    report = evaluate(cfg, channels, assign, best.powers)
    return Theorem2Result(best.powers, report, best_pattern, n, n_ok)


def verify_lemma1(cfg, channels, assign, powers_opt, rtol: float = 1e-6, atol: float = 0.0,
                  optimum: float | None = None) -> bool:
    """True iff powers with equal per-hop SINRs reach the sum-rate of ``powers_opt``.

    The equal-SINR point is built from the effective SINRs of ``powers_opt``:
    each hop gets the smallest powers meeting those targets exactly, which
    never exceed ``powers_opt`` when the targets are met there. Any feasible
    vector therefore passes; pass ``optimum`` (a known optimal sum-rate) to
    also require the match to reach it, which rejects suboptimal inputs.
    """
    ref = evaluate(cfg, channels, assign, powers_opt)
    p = powers_for_targets(cfg, channels, assign, ref.effective_sinr)
    if not np.all(np.isfinite(p)) or np.any(p < -1e-9 * cfg.p_max) or np.any(p > cfg.p_max * (1 + 1e-9)):
        return False
    p = np.clip(p, 0.0, cfg.p_max)
    rep = evaluate(cfg, channels, assign, p)
    spread_ok = np.allclose(rep.sinr, rep.effective_sinr[:, None], rtol=1e-6, atol=0.0)
    target = ref.sum_rate if optimum is None else max(ref.sum_rate, optimum)
    return bool(spread_ok and abs(rep.sum_rate - target) <= max(atol, rtol * abs(target)))
