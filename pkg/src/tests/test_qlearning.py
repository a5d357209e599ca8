"""
Tests for synchronous, asynchronous and general Q-learning.
"""

import math

import numpy as np
import pytest

from src.models.errors import DivergenceError, InvalidArgumentError
from src.models.mdp import Mdp, solve_q_star
from src.models.rng import RngStream
from src.utils.qlearning import (
    QMode,
    asynchronous_sampler,
    expected_step,
    iterate_bounds,
    q_step,
    reward_bounds,
    run_q_chain,
    run_q_replicas,
    sample_one_step,
    synchronous_sampler,
)


class TestSingleStep:
    def test_fixed_point_of_deterministic_mdp(self, deterministic_mdp):
        q_star = solve_q_star(deterministic_mdp)
        q = q_step(q_star, 0.5, deterministic_mdp, QMode.synchronous(), RngStream(0))
        np.testing.assert_allclose(q, q_star, atol=1e-12)

    def test_asynchronous_updates_one_pair(self, noisy_mdp):
        stream = RngStream(4)
        q = RngStream(5).normals(6)
        for _ in range(50):
            nxt = q_step(q, 0.3, noisy_mdp, QMode.asynchronous(), stream)
            assert np.count_nonzero(nxt != q) <= 1
            q = nxt

    def test_full_step_on_chain(self, chain_mdp):
        q = q_step([0.0, 0.0], 1.0, chain_mdp, QMode.synchronous(), RngStream(0))
        np.testing.assert_array_equal(q, [1.0, 0.0])

    def test_scalar_start_is_expanded(self, noisy_mdp):
        traj = run_q_chain(1.0, 0.1, 3, noisy_mdp, QMode.synchronous(), RngStream(0))
        np.testing.assert_array_equal(traj.iterates[0], np.ones(6))


class TestChains:
    def test_unit_stepsize_chain_stays_at_fixed_point(self, chain_mdp):
        traj = run_q_chain([0.0, 0.0], 1.0, 5, chain_mdp, QMode.synchronous(), RngStream(0))
        np.testing.assert_array_equal(traj.iterates[1:], np.tile([1.0, 0.0], (5, 1)))
        assert traj.mode == "synchronous"

    def test_deterministic_convergence(self, chain_mdp):
        traj = run_q_chain([0.0, 0.0], 0.1, 1000, chain_mdp, QMode.synchronous(), RngStream(0))
        np.testing.assert_allclose(traj.final_state, [1.0, 0.0], atol=1e-9)

    def test_mode_tag(self, noisy_mdp):
        traj = run_q_chain(0.0, 0.1, 4, noisy_mdp, QMode.asynchronous(), RngStream(0), record_stride=2)
        assert traj.mode == "asynchronous"
        assert len(traj) == 3

    def test_general_sampler_matches_synchronous(self, noisy_mdp):
        sync = run_q_replicas(0.0, [0.1, 0.2], 200, noisy_mdp, QMode.synchronous(), RngStream(8).splits(range(3)))
        general = run_q_replicas(0.0, [0.1, 0.2], 200, noisy_mdp, QMode.general(synchronous_sampler),
                                 RngStream(8).splits(range(3)))
        np.testing.assert_allclose(general.final, sync.final, rtol=0, atol=1e-13)

    def test_general_sampler_matches_asynchronous(self, noisy_mdp):
        direct = run_q_replicas(0.0, [0.2], 100, noisy_mdp, QMode.asynchronous(), RngStream(8).splits(range(2)))
        general = run_q_replicas(0.0, [0.2], 100, noisy_mdp, QMode.general(asynchronous_sampler),
                                 RngStream(8).splits(range(2)))
        np.testing.assert_allclose(general.final, direct.final, rtol=0, atol=1e-13)

    def test_asynchronous_tail_near_fixed_point(self, noisy_mdp):
        alpha = 0.05
        q_star = solve_q_star(noisy_mdp)
        batch = run_q_replicas(q_star, [alpha], 20_000, noisy_mdp, QMode.asynchronous(),
                               [RngStream(11)], tail_start=10_000)
        assert np.max(np.abs(batch.tail_mean[0, 0] - q_star)) <= 5 * math.sqrt(alpha)

    def test_divergence(self):
        mdp = Mdp(1, 1, [[1.0]], [0.0], gamma=0.5, reward_noise_std=1e30)
        with pytest.raises(DivergenceError) as info:
            run_q_chain([0.0], 0.5, 10, mdp, QMode.synchronous(), RngStream(0))
        assert info.value.step == 1


class TestRewardNoise:
    def test_uniform_noise_moments(self, noisy_mdp):
        samples = sample_one_step(np.zeros(6), 1.0, noisy_mdp, QMode.synchronous(reward_noise="uniform"),
                                  RngStream(2), 100_000)
        np.testing.assert_allclose(samples.mean(axis=0), noisy_mdp.r_bar, atol=0.01)
        np.testing.assert_allclose(samples.var(axis=0), 0.3, atol=0.01)
        half_width = math.sqrt(3.0 * 0.3)
        assert np.all(np.abs(samples - noisy_mdp.r_bar) <= half_width + 1e-12)

    def test_clipped_rewards_stay_in_bounds(self, noisy_mdp):
        samples = sample_one_step(np.zeros(6), 1.0, noisy_mdp, QMode.synchronous(clip_rewards=True),
                                  RngStream(2), 10_000)
        lo, hi = reward_bounds(noisy_mdp)
        assert samples.min() >= lo and samples.max() <= hi

    def test_iterate_bounds(self, noisy_mdp):
        lo, hi = iterate_bounds(noisy_mdp, np.zeros(6))
        width = 5 * math.sqrt(0.3)
        assert lo == pytest.approx((0.1 - width) / 0.1)
        assert hi == pytest.approx((0.9 + width) / 0.1)

    def test_iterate_bounds_include_start(self, noisy_mdp):
        _, hi = iterate_bounds(noisy_mdp, np.full(6, 100.0))
        assert hi == pytest.approx(100.0)

    def test_clipped_chain_stays_in_box(self, noisy_mdp):
        traj = run_q_chain(0.0, 1.0, 2000, noisy_mdp, QMode.synchronous(clip_rewards=True), RngStream(6))
        lo, hi = iterate_bounds(noisy_mdp, np.zeros(6))
        assert traj.iterates.min() >= lo and traj.iterates.max() <= hi


class TestExpectation:
    @pytest.mark.parametrize("mode", [QMode.synchronous(), QMode.asynchronous()], ids=str)
    def test_mean_update_matches_expected_step(self, noisy_mdp, mode):
        q = RngStream(3).normals(6)
        samples = sample_one_step(q, 0.5, noisy_mdp, mode, RngStream(4), 40_000)
        mean = samples.mean(axis=0)
        stderr = samples.std(axis=0, ddof=1) / math.sqrt(samples.shape[0])
        expected = expected_step(q, 0.5, noisy_mdp, mode)
        assert np.all(np.abs(mean - expected) <= 5 * stderr + 1e-12)

    def test_general_mode_has_no_known_expectation(self, noisy_mdp):
        with pytest.raises(InvalidArgumentError):
            expected_step(np.zeros(6), 0.5, noisy_mdp, QMode.general(synchronous_sampler))

    def test_samples_do_not_alias_input(self, noisy_mdp):
        q = np.zeros(6)
        sample_one_step(q, 0.5, noisy_mdp, QMode.asynchronous(), RngStream(0), 10)
        np.testing.assert_array_equal(q, np.zeros(6))


class TestValidation:
    @pytest.mark.parametrize("alpha", [0.0, 1.5])
    def test_stepsize_range(self, noisy_mdp, alpha):
        with pytest.raises(InvalidArgumentError):
            q_step(np.zeros(6), alpha, noisy_mdp, QMode.synchronous(), RngStream(0))

    def test_steps_positive(self, noisy_mdp):
        with pytest.raises(InvalidArgumentError):
            run_q_chain(0.0, 0.1, 0, noisy_mdp, QMode.synchronous(), RngStream(0))

    def test_q_length(self, noisy_mdp):
        with pytest.raises(InvalidArgumentError):
            q_step(np.zeros(5), 0.1, noisy_mdp, QMode.synchronous(), RngStream(0))

    def test_mode_arguments(self):
        with pytest.raises(InvalidArgumentError):
            QMode("episodic")
        with pytest.raises(InvalidArgumentError):
            QMode.general(None)
        with pytest.raises(InvalidArgumentError):
            QMode.synchronous(reward_noise="cauchy")

    def test_asynchronous_needs_full_support(self):
        mdp = Mdp(1, 2, [[1.0], [1.0]], [0.0, 1.0], kappa_b=[1.0, 0.0])
        with pytest.raises(InvalidArgumentError):
            q_step(np.zeros(2), 0.1, mdp, QMode.asynchronous(), RngStream(0))

    def test_sampler_shape_checked(self, noisy_mdp):
        def broken(mdp, u_pair, u_next, z):
            return np.ones(2), np.zeros((2, 3)), np.zeros(2)

        with pytest.raises(InvalidArgumentError):
            q_step(np.zeros(6), 0.1, noisy_mdp, QMode.general(broken), RngStream(0))
