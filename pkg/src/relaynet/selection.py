"""Relay selection strategies.

Every selector works on *stage states*: the ordered tuple of nodes used by
users ``0..N-1`` at one stage. Stage 0 and stage ``L`` have a single state
(the sources / destinations); relay stages have one state per ordered
``N``-subset of the ``M`` relays, enumerated in lexicographic order so that
``argmax`` over state indices breaks ties toward the lexicographically
smallest relay vector.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .network import ChannelRealization, NetworkConfig, RelayAssignment, evaluate

STRATEGIES = ("hop", "adhoc", "block", "window", "maxmin", "greedy", "random", "exhaustive")


@lru_cache(maxsize=None)
def _perms(m: int, n: int) -> np.ndarray:
    p = np.array(list(itertools.permutations(range(m), n)), dtype=np.intp)
    p.setflags(write=False)
    return p


def stage_states(cfg: NetworkConfig, stage: int) -> np.ndarray:
    if stage in (0, cfg.l_hops):
        return np.arange(cfg.n_users, dtype=np.intp)[None, :]
    return _perms(cfg.m_relays, cfg.n_users)


def hop_table(cfg: NetworkConfig, channels: ChannelRealization, powers, hop: int) -> np.ndarray:
    """SINR of each user on ``hop`` for every (tx state, rx state) pair.

    Shape ``(S_hop, S_hop+1, N)``.
    """
    tx = stage_states(cfg, hop)
    rx = stage_states(cfg, hop + 1)
    g = channels[hop][tx[:, None, :, None], rx[None, :, None, :]]  # [a, b, j, i]
    recv = np.asarray(powers, dtype=float)[hop][:, None] * g
    signal = np.einsum("abii->abi", recv)
    interference = np.einsum("abji,ji->abi", recv, 1.0 - np.eye(cfg.n_users))
    return signal / (cfg.noise_variance + interference)


class SelectionContext:
    """Lazily built per-hop SINR tables for one (cfg, channels, powers)."""

    def __init__(self, cfg: NetworkConfig, channels: ChannelRealization, powers=None):
        self.cfg = cfg
        self.channels = channels
        self.powers = cfg.full_power() if powers is None else cfg.check_powers(powers)
        self._tables = {}

    def table(self, hop: int) -> np.ndarray:
        if hop not in self._tables:
            self._tables[hop] = hop_table(self.cfg, self.channels, self.powers, hop)
        return self._tables[hop]

    def n_states(self, stage: int) -> int:
        return len(stage_states(self.cfg, stage))

    def optimize_window(self, start_stage: int, start_state: int, end_stage: int) -> list[int]:
        """Jointly choose the states of stages ``start_stage+1..end_stage``.

        Maximizes ``sum_i log2(1 + min_h sinr[i, h])`` over the hops inside the
        window, with the start state fixed. Returns the chosen state indices.
        """
        acc = self.table(start_stage)[start_state]
        for hop in range(start_stage + 1, end_stage):
            acc = np.minimum(acc[..., None, :], self.table(hop))
        objective = np.log2(1.0 + acc).sum(axis=-1)
        flat = int(np.argmax(objective))
        return [int(k) for k in np.unravel_index(flat, objective.shape)]

    def to_assignment(self, states: list[int]) -> RelayAssignment:
        """``states`` holds one state index per stage ``0..L``."""
        cfg = self.cfg
        relays = [stage_states(cfg, s)[states[s]] for s in range(1, cfg.l_hops)]
        return RelayAssignment(np.array(relays, dtype=np.intp).reshape(cfg.l_hops - 1, cfg.n_users))


def _context(cfg, channels, powers) -> SelectionContext:
    if isinstance(channels, SelectionContext):
        return channels
    return SelectionContext(cfg, channels, powers)


def _check_window(w: int):
    if w < 2:
        raise ValueError("window/block size must be at least 2")


def select_hop_by_hop(cfg, channels, powers=None) -> RelayAssignment:
    ctx = _context(cfg, channels, powers)
    states = [0]
    for stage in range(1, cfg.l_hops):
        states += ctx.optimize_window(stage - 1, states[-1], stage)
    return ctx.to_assignment(states + [0])


def select_ad_hoc(cfg, channels, powers=None) -> RelayAssignment:
    ctx = _context(cfg, channels, powers)
    L = cfg.l_hops
    states = [0]
    for stage in range(1, L - 1):
        states += ctx.optimize_window(stage - 1, states[-1], stage)
    states += ctx.optimize_window(L - 2, states[-1], L)
    return ctx.to_assignment(states)


def select_block_by_block(cfg, channels, powers=None, w: int = 2) -> RelayAssignment:
    _check_window(w)
    L = cfg.l_hops
    if L % w:
        raise ValueError(f"block size {w} does not divide {L} hops")
    ctx = _context(cfg, channels, powers)
    states = [0]
    for start in range(0, L, w):
        states += ctx.optimize_window(start, states[-1], start + w)
    return ctx.to_assignment(states)


def select_sliding_window(cfg, channels, powers=None, w: int = 2) -> RelayAssignment:
    _check_window(w)
    L = cfg.l_hops
    if w > L:
        raise ValueError(f"window {w} larger than {L} hops")
    ctx = _context(cfg, channels, powers)
    states = [0]
    for start in range(0, L - w):
        states.append(ctx.optimize_window(start, states[-1], start + w)[0])
    states += ctx.optimize_window(L - w, states[-1], L)
    return ctx.to_assignment(states)


def bottleneck_path(edges: list[np.ndarray]) -> tuple[float, list[int]]:
    """Max-min path through a layered graph (bottleneck Viterbi recursion).

    ``edges[h][a, b]`` is the value of moving from state ``a`` of layer ``h``
    to state ``b`` of layer ``h + 1``; layer 0 and the last layer must have a
    single state. Each state keeps its best bottleneck so far and the
    lowest-index predecessor attaining it. Returns the optimal bottleneck
    value and one optimal state sequence (one index per layer). Time is
    linear in the number of layers.
    """
    best = np.array([np.inf])
    preds = []
    for e in edges:
        cand = np.minimum(best[:, None], e)
        preds.append(np.argmax(cand, axis=0))
        best = cand.max(axis=0)
    path = [0]
    for p in reversed(preds):
        path.append(int(p[path[-1]]))
    path.reverse()
    return float(best[0]), path


def select_max_min(cfg, channels, powers=None) -> RelayAssignment:
    ctx = _context(cfg, channels, powers)
    edges = [ctx.table(h).min(axis=-1) for h in range(cfg.l_hops)]
    _, states = bottleneck_path(edges)
    return ctx.to_assignment(states)


def max_min_value(cfg, channels, assign: RelayAssignment, powers=None) -> float:
    p = cfg.full_power() if powers is None else powers
    return float(evaluate(cfg, channels, assign, p).sinr.min())


def select_greedy_reference(cfg, channels, powers=None) -> RelayAssignment:
    """Users in index order each take their best interference-free bottleneck
    path through the relays still free at every stage."""
    if isinstance(channels, SelectionContext):
        channels = channels.channels
    p = cfg.full_power() if powers is None else cfg.check_powers(powers)
    L, N = cfg.l_hops, cfg.n_users
    free = [None] + [list(range(cfg.m_relays)) for _ in range(1, L)] + [None]
    relays = np.empty((L - 1, N), dtype=np.intp)
    for i in range(N):
        layers = [[i]] + free[1:L] + [[i]]
        edges = [
            p[h, i] * channels[h][np.ix_(layers[h], layers[h + 1])] / cfg.noise_variance
            for h in range(L)
        ]
        _, path = bottleneck_path(edges)
        for s in range(1, L):
            relays[s - 1, i] = free[s].pop(path[s])
    return RelayAssignment(relays)


def select_random_reference(cfg, rng: np.random.Generator) -> RelayAssignment:
    relays = [rng.permutation(cfg.m_relays)[: cfg.n_users] for _ in range(cfg.l_hops - 1)]
    return RelayAssignment(np.array(relays, dtype=np.intp).reshape(cfg.l_hops - 1, cfg.n_users))


def n_assignments(cfg: NetworkConfig) -> int:
    """Number of feasible assignment sequences, prod_i (M - i)^(L - 1)."""
    per_stage = math.perm(cfg.m_relays, cfg.n_users)
    return per_stage ** (cfg.l_hops - 1)


def select_exhaustive_sumrate(cfg, channels, powers=None, budget: int = 2_000_000) -> RelayAssignment:
    if n_assignments(cfg) > budget:
        raise ValueError(f"{n_assignments(cfg)} assignments exceed the enumeration budget {budget}")
    ctx = _context(cfg, channels, powers)
    return ctx.to_assignment([0] + ctx.optimize_window(0, 0, cfg.l_hops))


@dataclass(frozen=True)
class Selector:
    """A named strategy; ``w`` is used by the block and window strategies."""

    name: str
    w: int | None = None

    @property
    def label(self) -> str:
        return f"{self.name}_w{self.w}" if self.w is not None else self.name

    def applicable(self, cfg: NetworkConfig) -> bool:
        if self.name == "block":
            return cfg.l_hops % self.w == 0
        if self.name == "window":
            return self.w <= cfg.l_hops
        return True

    def __call__(self, cfg, channels, powers=None, rng=None) -> RelayAssignment:
        if self.name == "random":
            return select_random_reference(cfg, rng)
        fn = {
            "hop": select_hop_by_hop,
            "adhoc": select_ad_hoc,
            "maxmin": select_max_min,
            "greedy": select_greedy_reference,
            "exhaustive": select_exhaustive_sumrate,
        }.get(self.name)
        if fn is not None:
            return fn(cfg, channels, powers)
        if self.name == "block":
            return select_block_by_block(cfg, channels, powers, self.w)
        if self.name == "window":
            return select_sliding_window(cfg, channels, powers, self.w)
        raise ValueError(f"unknown strategy {self.name!r}; choose from {STRATEGIES}")
