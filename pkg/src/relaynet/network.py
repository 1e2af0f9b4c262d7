"""Network model: configuration, channel draws and SINR / rate evaluation.

Indexing is 0-based throughout. A network with ``L`` hops has stages
``0..L``: stage 0 holds the ``N`` sources, stage ``L`` the ``N``
destinations and stages ``1..L-1`` the ``M`` relays each. Hop ``l``
(``0 <= l < L``) carries stage ``l`` to stage ``l + 1``, so the transmit
power used in hop ``l`` is ``powers[l, i]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BOLTZMANN = 1.380649e-23  # J/K


def noise_variance_ktb(temperature_k: float = 290.0, bandwidth_hz: float = 200e3) -> float:
    """Thermal noise power k*T*B in watts."""
    if temperature_k <= 0 or bandwidth_hz <= 0:
        raise ValueError("temperature and bandwidth must be positive")
    return BOLTZMANN * temperature_k * bandwidth_hz


def dbm_to_watts(p_dbm: float) -> float:
    return 10.0 ** (p_dbm / 10.0) * 1e-3


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


@dataclass(frozen=True)
class NetworkConfig:
    """Static dimensions and physical constants of one network.

    ``p_max`` and ``noise_variance`` are in watts. Path loss is
    ``d ** -path_loss_exponent`` with ``d`` the per-hop distance in km;
    an exponent of 0 disables it (fading-only mode).
    """

    n_users: int
    m_relays: int
    l_hops: int
    p_max: float = 1e-2
    noise_variance: float = field(default_factory=noise_variance_ktb)
    total_distance_km: float = 2.0
    path_loss_exponent: float = 3.6
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_users < 1 or self.m_relays < 1:
            raise ValueError("n_users and m_relays must be positive")
        if self.l_hops < 2:
            raise ValueError("l_hops must be at least 2")
        if self.m_relays < self.n_users:
            raise ValueError("need m_relays >= n_users")
        if not self.p_max > 0 or not self.noise_variance > 0:
            raise ValueError("p_max and noise_variance must be positive")
        if not self.total_distance_km > 0 or self.path_loss_exponent < 0:
            raise ValueError("invalid distance or path loss exponent")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must be a 64-bit unsigned integer")

    @property
    def hop_distance_km(self) -> float:
        return self.total_distance_km / self.l_hops

    @property
    def path_gain(self) -> float:
        return self.hop_distance_km ** (-self.path_loss_exponent)

    def stage_size(self, stage: int) -> int:
        if stage in (0, self.l_hops):
            return self.n_users
        return self.m_relays

    def full_power(self) -> np.ndarray:
        return np.full((self.l_hops, self.n_users), float(self.p_max))

    def check_powers(self, powers) -> np.ndarray:
        p = np.asarray(powers, dtype=float)
        if p.shape != (self.l_hops, self.n_users):
            raise ValueError(f"powers must have shape {(self.l_hops, self.n_users)}, got {p.shape}")
        if np.any(p < 0) or np.any(p > self.p_max * (1 + 1e-12)):
            raise ValueError("powers must lie in [0, p_max]")
        return p


@dataclass(frozen=True)
class ChannelRealization:
    """Squared channel gains for one draw.

    ``gains[l][u, v]`` is |h|^2 from node ``u`` of stage ``l`` to node ``v``
    of stage ``l + 1``.
    """

    gains: tuple

    def __post_init__(self):
        for g in self.gains:
            if g.ndim != 2 or not np.all(np.isfinite(g)) or np.any(g < 0):
                raise ValueError("gains must be finite, non-negative 2-D arrays")
            g.setflags(write=False)

    @property
    def l_hops(self) -> int:
        return len(self.gains)

    def __getitem__(self, hop: int) -> np.ndarray:
        return self.gains[hop]

    @classmethod
    def from_arrays(cls, arrays) -> "ChannelRealization":
        return cls(tuple(np.array(a, dtype=float) for a in arrays))


def draw_rng(seed: int, draw_index: int, stream: int = 0) -> np.random.Generator:
    """Independent generator keyed by (seed, draw_index, stream)."""
    return np.random.default_rng([stream, draw_index, seed])


def generate_channels(cfg: NetworkConfig, draw_index: int) -> ChannelRealization:
    rng = draw_rng(cfg.rng_seed, draw_index)
    pl = cfg.path_gain
    gains = []
    for hop in range(cfg.l_hops):
        shape = (cfg.stage_size(hop), cfg.stage_size(hop + 1))
        # |h|^2 of unit-variance Rayleigh fading is Exp(1)
        gains.append(rng.standard_exponential(shape) * pl)
    return ChannelRealization(tuple(gains))


@dataclass(frozen=True)
class RelayAssignment:
    """Chosen relay per (relay stage, user); ``relays[s - 1, i]`` is the relay of
    user ``i`` at stage ``s``."""

    relays: np.ndarray

    def __post_init__(self):
        r = np.array(self.relays, dtype=np.intp)
        if r.ndim != 2:
            raise ValueError("relays must be a 2-D array (stage, user)")
        for row in r:
            if len(set(row.tolist())) != len(row):
                raise ValueError(f"relays within a stage must be distinct: {row}")
        r.setflags(write=False)
        object.__setattr__(self, "relays", r)

    @property
    def n_users(self) -> int:
        return self.relays.shape[1]

    @property
    def nodes(self) -> np.ndarray:
        """Node index of every user at every stage, shape (L + 1, N)."""
        users = np.arange(self.n_users)
        return np.vstack([users, self.relays, users])

    def validate(self, cfg: NetworkConfig) -> "RelayAssignment":
        if self.relays.shape != (cfg.l_hops - 1, cfg.n_users):
            raise ValueError("assignment shape does not match config")
        if np.any(self.relays < 0) or np.any(self.relays >= cfg.m_relays):
            raise ValueError("relay index out of range")
        return self

    def key(self) -> tuple:
        return tuple(self.relays.ravel().tolist())

    def __eq__(self, other):
        return isinstance(other, RelayAssignment) and np.array_equal(self.relays, other.relays)

    def __hash__(self):
        return hash((self.relays.shape, self.key()))


@dataclass(frozen=True)
class RateReport:
    sinr: np.ndarray  # (N, L)
    effective_sinr: np.ndarray
    per_user_rate: np.ndarray
    sum_rate: float


def _offdiag(n: int) -> np.ndarray:
    return 1.0 - np.eye(n)


def hop_sinr(noise: float, gains: np.ndarray, tx_nodes, rx_nodes, tx_powers) -> np.ndarray:
    """SINR of every user on one hop, treating the other users as interference."""
    g = gains[np.ix_(tx_nodes, rx_nodes)]  # g[j, i]: tx of user j -> rx of user i
    rx = np.asarray(tx_powers, dtype=float)[:, None] * g
    signal = np.diagonal(rx)
    interference = (rx * _offdiag(len(signal))).sum(axis=0)
    return signal / (noise + interference)


def sinr_matrix(cfg: NetworkConfig, channels: ChannelRealization, assign: RelayAssignment,
                powers) -> np.ndarray:
    nodes = assign.nodes
    p = np.asarray(powers, dtype=float)
    out = np.empty((cfg.n_users, cfg.l_hops))
    for l in range(cfg.l_hops):
        out[:, l] = hop_sinr(cfg.noise_variance, channels[l], nodes[l], nodes[l + 1], p[l])
    return out


def compute_sinr(cfg, channels, assign, powers, user: int, hop: int) -> float:
    if not 0 <= user < cfg.n_users or not 0 <= hop < cfg.l_hops:
        raise IndexError("user or hop index out of range")
    return float(sinr_matrix(cfg, channels, assign, powers)[user, hop])


def report_from_sinr(sinr: np.ndarray) -> RateReport:
    eff = sinr.min(axis=1)
    rates = np.log2(1.0 + eff)
    return RateReport(sinr=sinr, effective_sinr=eff, per_user_rate=rates, sum_rate=float(rates.sum()))


def evaluate(cfg: NetworkConfig, channels: ChannelRealization, assign: RelayAssignment,
             powers) -> RateReport:
    return report_from_sinr(sinr_matrix(cfg, channels, assign, powers))


def sum_rate(cfg, channels, assign, powers) -> float:
    return evaluate(cfg, channels, assign, powers).sum_rate
