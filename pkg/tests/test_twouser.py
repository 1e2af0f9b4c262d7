import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from instances import fading_cfg, identity_assignment, pathloss_cfg
from relaynet.network import ChannelRealization, NetworkConfig, RelayAssignment, evaluate, generate_channels
from relaynet.power import grid_power_oracle, sinr_matching
from relaynet.selection import select_max_min
from relaynet.twouser import (BinaryPattern, binary_patterns, solve_equal_sinr_chain, theorem2_power_solver,
                              verify_lemma1)


def instance(draw, l=2, pathloss=True):
    cfg = pathloss_cfg(n=2, m=3, l=l) if pathloss else fading_cfg(n=2, m=3, l=l)
    ch = generate_channels(cfg, draw)
    return cfg, ch, select_max_min(cfg, ch)


def symmetric():
    """Own gains 2 then 1, cross gains 0.25, noise 0.5, p_max 1."""
    cfg = NetworkConfig(2, 2, 2, p_max=1.0, noise_variance=0.5, path_loss_exponent=0.0)
    ch = ChannelRealization.from_arrays([[[2.0, 0.25], [0.25, 2.0]], [[1.0, 0.25], [0.25, 1.0]]])
    return cfg, ch, RelayAssignment([[0, 1]])


class TestPattern:
    def test_needs_two_pins(self):
        with pytest.raises(ValueError):
            BinaryPattern((((0, 0), 1.0),))

    def test_no_duplicates(self):
        with pytest.raises(ValueError):
            BinaryPattern((((0, 0), 1.0), ((0, 0), 0.0)))

    @pytest.mark.parametrize("l", [2, 3, 4])
    def test_count(self, l):
        cfg = fading_cfg(l=l)
        assert len(list(binary_patterns(cfg))) == math.comb(2 * l, 2) * 4


class TestChain:
    def test_symmetric_hand_algebra(self):
        # relays at p_max give gamma = 1 / (0.5 + 0.25); sources then need
        # s * 2 / (0.5 + 0.25 s) = 4/3, i.e. s = 0.4
        cfg, ch, a = symmetric()
        sol = solve_equal_sinr_chain(cfg, ch, a, BinaryPattern((((1, 0), 1.0), ((1, 1), 1.0))))
        assert sol.feasible
        assert np.allclose(sol.per_user_sinr, 4 / 3, rtol=1e-12)
        assert np.allclose(sol.powers, [[0.4, 0.4], [1.0, 1.0]], rtol=1e-12)

    @pytest.mark.parametrize("draw", range(5))
    def test_silenced_user_is_snr_matched(self, draw):
        cfg, ch, a = instance(draw)
        sol = solve_equal_sinr_chain(cfg, ch, a, BinaryPattern((((0, 1), 0.0), ((1, 1), 0.0))))
        assert sol.feasible and np.all(sol.powers[:, 1] == 0)
        # single-user SNR matching of user 0 alone
        g = np.array([ch[l][a.nodes[l, 0], a.nodes[l + 1, 0]] for l in range(2)])
        level = cfg.p_max * g.min() / cfg.noise_variance
        assert sol.per_user_sinr[0] == pytest.approx(level, rel=1e-12)
        assert np.allclose(sol.powers[:, 0], level * cfg.noise_variance / g, rtol=1e-12)

    def test_bad_pin(self):
        cfg, ch, a = symmetric()
        with pytest.raises(ValueError):
            solve_equal_sinr_chain(cfg, ch, a, BinaryPattern((((0, 0), 0.5), ((1, 1), 1.0))))
        with pytest.raises(ValueError):
            solve_equal_sinr_chain(fading_cfg(n=1), ch, a, BinaryPattern((((0, 0), 1.0), ((1, 0), 1.0))))

    @given(draw=st.integers(0, 100_000), l=st.integers(2, 4), pathloss=st.booleans())
    def test_equalities_hold(self, draw, l, pathloss):
        cfg, ch, a = instance(draw, l, pathloss)
        for pattern in binary_patterns(cfg):
            sol = solve_equal_sinr_chain(cfg, ch, a, pattern)
            if not sol.feasible:
                continue
            assert np.all(sol.powers >= 0) and np.all(sol.powers <= cfg.p_max)
            for (s, i), v in pattern.pinned:
                assert sol.powers[s, i] == pytest.approx(v, abs=1e-9 * cfg.p_max)
            s = evaluate(cfg, ch, a, sol.powers).sinr
            live = s[:, 0] > 0
            assert np.allclose(s[live], s[live][:, :1], rtol=1e-8, atol=0)


class TestTheorem2:
    def test_symmetric_optimum(self):
        cfg, ch, a = symmetric()
        res = theorem2_power_solver(cfg, ch, a)
        assert res.report.sum_rate == pytest.approx(2 * math.log2(1 + 4 / 3), rel=1e-12)
        assert res.n_patterns == 24

    @pytest.mark.parametrize("draw", range(20))
    def test_at_least_grid(self, draw):
        cfg, ch, a = instance(draw)
        grid = grid_power_oracle(cfg, ch, a)
        res = theorem2_power_solver(cfg, ch, a)
        assert res.report.sum_rate >= grid.report.sum_rate - grid.resolution_error - 1e-12

    def test_overwhelming_interference_silences_one(self):
        cfg = NetworkConfig(2, 2, 2, p_max=1.0, noise_variance=0.01, path_loss_exponent=0.0)
        ch = ChannelRealization.from_arrays([[[1.0, 50.0], [40.0, 0.8]], [[0.9, 60.0], [45.0, 1.1]]])
        a = identity_assignment(cfg)
        res = theorem2_power_solver(cfg, ch, a)
        silent = [i for i in range(2) if np.all(res.powers[:, i] == 0)]
        assert len(silent) == 1
        other = 1 - silent[0]
        assert np.allclose(res.report.sinr[other], res.report.sinr[other, 0])
        grid = grid_power_oracle(cfg, ch, a)
        assert res.report.sum_rate >= grid.report.sum_rate - grid.resolution_error

    def test_swap_invariance(self):
        cfg = fading_cfg(n=2, m=2, l=3)
        rng = np.random.default_rng(3)
        arrays = []
        for _ in range(3):
            own, cross = rng.exponential(size=2)
            arrays.append([[own, cross], [cross, own]])
        ch = ChannelRealization.from_arrays(arrays)
        a = identity_assignment(cfg)
        swapped = ChannelRealization.from_arrays([np.asarray(g)[::-1, ::-1] for g in arrays])
        assert (theorem2_power_solver(cfg, ch, a).report.sum_rate
                == pytest.approx(theorem2_power_solver(cfg, swapped, a).report.sum_rate, rel=1e-12))


class TestLemma1:
    def test_single_user(self):
        cfg = pathloss_cfg(n=1, m=2, l=3)
        ch = generate_channels(cfg, 0)
        a = identity_assignment(cfg)
        assert verify_lemma1(cfg, ch, a, cfg.full_power())
        assert verify_lemma1(cfg, ch, a, sinr_matching(cfg, ch, a).powers)

    @pytest.mark.parametrize("draw", range(10))
    def test_grid_optimum_passes(self, draw):
        cfg, ch, a = instance(draw)
        grid = grid_power_oracle(cfg, ch, a)
        assert verify_lemma1(cfg, ch, a, grid.powers, atol=1e-2)

    def test_suboptimal_fails_against_optimum(self):
        cfg, ch, a = symmetric()
        best = theorem2_power_solver(cfg, ch, a)
        bad = np.array([[0.1, 0.4], [1.0, 1.0]])
        assert evaluate(cfg, ch, a, bad).sum_rate < best.report.sum_rate - 0.1
        assert not verify_lemma1(cfg, ch, a, bad, optimum=best.report.sum_rate)
        assert verify_lemma1(cfg, ch, a, best.powers, optimum=best.report.sum_rate)
