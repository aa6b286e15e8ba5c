import numpy as np
import pytest

from aoii_harq import (
    ChannelModel,
    RviConfig,
    SourceModel,
    extract_thresholds,
    g_for_threshold,
    g_wait,
    optimal_threshold,
    rvi_solve,
)

CFG = RviConfig(delta_max=200, r_cap=32)


@pytest.fixture(scope="module")
def fast_source():
    return SourceModel(0.9, 0.1)


@pytest.fixture(scope="module")
def fast_channel():
    return ChannelModel(p_e=0.3, c=1.0)


@pytest.fixture(scope="module")
def fast_solution(fast_source, fast_channel):
    from aoii_harq import PenaltySpec

    return rvi_solve(2.0, fast_source, fast_channel, PenaltySpec.linear(), CFG)


class TestRviSolve:
    def test_converges_with_anchor_zero(self, fast_solution):
        assert fast_solution.converged
        assert fast_solution.values[0, 0] == 0.0
        assert not fast_solution.greedy_transmit[0, 0]

    def test_waiting_regime_all_wait(self, linear_penalty):
        source = SourceModel.from_states(0.01, 32)
        sol = rvi_solve(0.0, source, ChannelModel(p_e=0.5, c=0.5), linear_penalty, CFG)
        assert sol.converged
        assert not sol.greedy_transmit.any()
        assert extract_thresholds(sol) == {}

    def test_waiting_regime_g_matches_closed_form(self, linear_penalty):
        source = SourceModel(0.2, 0.4)
        sol = rvi_solve(0.0, source, ChannelModel(p_e=0.5, c=0.5), linear_penalty, CFG)
        assert sol.g == pytest.approx(g_wait(source, linear_penalty), rel=1e-4)

    def test_g_matches_series_evaluation(self, fast_source, fast_channel, linear_penalty):
        for lam in (0.0, 2.0, 10.0):
            sol = rvi_solve(lam, fast_source, fast_channel, linear_penalty, CFG)
            n0 = optimal_threshold(lam, fast_source, fast_channel, linear_penalty)
            g = g_for_threshold(n0, lam, fast_source, fast_channel, linear_penalty)
            assert sol.g == pytest.approx(g, rel=1e-4)

    def test_value_increasing_in_delta(self, fast_solution):
        half = CFG.delta_max // 2
        for r in range(0, 8):
            col = fast_solution.values[max(r, 1) : half, r]
            assert np.all(np.diff(col) > 0.0)

    def test_value_monotone_in_r_fast_source(self, fast_solution):
        # mu < alpha: nonincreasing in the transmission count
        half = CFG.delta_max // 2
        vals = fast_solution.values[1:half]
        assert np.all(np.diff(vals, axis=1) <= 1e-9)

    def test_value_monotone_in_r_slow_source(self, linear_penalty):
        # mu >= alpha: nondecreasing in the transmission count
        source = SourceModel(0.1, 0.3)
        sol = rvi_solve(1.0, source, ChannelModel(p_e=0.5, c=0.8), linear_penalty, CFG)
        assert sol.converged
        half = CFG.delta_max // 2
        vals = sol.values[1:half]
        assert np.all(np.diff(vals, axis=1) >= -1e-9)

    def test_single_switching_point_per_count(self, fast_solution):
        for r in range(CFG.r_cap + 1):
            col = fast_solution.greedy_transmit[1:, r].astype(int)
            assert np.all(np.diff(col) >= 0)

    def test_doubling_delta_max_stable_g(self, fast_source, fast_channel, linear_penalty):
        small = rvi_solve(2.0, fast_source, fast_channel, linear_penalty, CFG)
        big = rvi_solve(
            2.0, fast_source, fast_channel, linear_penalty,
            RviConfig(delta_max=2 * CFG.delta_max, r_cap=CFG.r_cap),
        )
        assert abs(big.g - small.g) / big.g < 1e-6

    def test_non_convergence_reported(self, fast_source, fast_channel, linear_penalty):
        sol = rvi_solve(
            2.0, fast_source, fast_channel, linear_penalty,
            RviConfig(delta_max=200, r_cap=32, max_iters=3),
        )
        assert not sol.converged
        with pytest.raises(ValueError):
            extract_thresholds(sol)

    def test_r_cap_must_cover_a_round(self, fast_source, linear_penalty):
        wrapped = ChannelModel(p_e=0.5, c=0.5, r_max=40)
        with pytest.raises(ValueError):
            rvi_solve(0.0, fast_source, wrapped, linear_penalty, RviConfig(delta_max=100, r_cap=16))


class TestExtractThresholds:
    def test_nonincreasing_in_count(self, fast_solution):
        thresholds = extract_thresholds(fast_solution)
        assert 0 in thresholds
        ordered = [thresholds[r] for r in sorted(thresholds)]
        assert all(b <= a for a, b in zip(ordered, ordered[1:]))

    def test_agrees_with_closed_form_on_a_wrapped_channel(self, linear_penalty):
        source = SourceModel.from_states(0.5, 16)
        channel = ChannelModel(p_e=0.5, c=0.5, r_max=2)
        for lam in (0.0, 5.0):
            sol = rvi_solve(lam, source, channel, linear_penalty, RviConfig(delta_max=200, r_cap=16))
            assert extract_thresholds(sol)[0] == optimal_threshold(
                lam, source, channel, linear_penalty
            )
