import math
import tempfile

import numpy as np
from django.test import SimpleTestCase

from adazeroLab.exceptions import ContractViolation
from envs.density import VisitDensity
from envs.grids import Action, GridSpec, GridWorld, dark_chamber
from exploration.autoencoder import build_autoencoder
from exploration.evaluator import build_evaluator
from exploration.mixing import combine_batch
from nncore.gradcheck import grad_check
from nncore.optim import AdamSettings
from policy.networks import ActorCritic, build_actor_critic
from policy.ppo import (
    clipped_surrogate, greedy_path, mean_entropy, ppo_loss_and_gradients, ppo_update, softmax_policy_from_q,
)
from policy.rollout import EpisodeTracker, RolloutBatch, collect_rollout, compute_gae, normalize_advantages


class TablePolicy:
    """Returns row i of a fixed table for the i-th observation."""

    def __init__(self, table):
        self.table = np.asarray(table, dtype=np.float64)
        self.n_actions = self.table.shape[1]

    def action_probabilities(self, obs):
        return self.table[:len(obs)]


class FixedActionPolicy:

    def __init__(self, action, n_actions=4):
        self.action = int(action)
        self.n_actions = n_actions

    def action_probabilities(self, obs):
        probs = np.zeros((len(obs), self.n_actions))
        probs[:, self.action] = 1.0
        return probs


def small_agent(obs_shape=(5, 5, 1), seed=0):
    rng = np.random.default_rng(seed)
    policy = build_actor_critic(obs_shape, 4, rng, conv_filters=(4, 8), hidden=16)
    ae = build_autoencoder(obs_shape, rng, conv_filters=(4, 8), bottleneck=16)
    ev = build_evaluator(obs_shape, rng, conv_filters=(4, 8))
    return policy, ae, ev


def single_step_batch(policy, obs, action, advantage):
    logits, values = policy.forward(obs[None])
    log_probs = logits[0] - np.log(np.sum(np.exp(logits[0])))
    batch = RolloutBatch(
        obs=obs[None],
        next_obs=obs[None],
        actions=np.array([action]),
        logprobs=np.array([log_probs[action]]),
        values=values,
        dones=np.array([True]),
        rewards=combine_batch([0.0], [0.0], [1.0]),
        bootstrap_value=0.0,
        entropies=np.zeros(1),
    )
    batch.advantages = np.array([advantage])
    batch.returns = values.copy()
    return batch


class SoftmaxPolicyTestCase(SimpleTestCase):
    """
    π(a|s) = softmax(Q(s, ·)) and the entropy bookkeeping built on it.
    """

    def test_equal_q_values(self):
        dist = softmax_policy_from_q([0.0, 0.0])
        self.assertEqual(dist[0], 0.5)
        self.assertEqual(dist[1], 0.5)

    def test_direct_evaluation(self):
        dist = softmax_policy_from_q([1.0, 0.0])
        self.assertAlmostEqual(dist[0], 0.7310585786300049, places=12)
        self.assertAlmostEqual(dist[1], 0.2689414213699951, places=12)

    def test_intrinsic_bonus_levels_the_policy(self):
        """
        Adding δ = (0, 1) to Q = (1, 0) gives equal action values and the maximum two-action entropy.
        """
        before = softmax_policy_from_q([1.0, 0.0])
        after = softmax_policy_from_q(np.array([1.0, 0.0]) + np.array([0.0, 1.0]))
        self.assertEqual(after[0], 0.5)
        self.assertAlmostEqual(after.entropy, math.log(2), places=15)
        self.assertGreater(after.entropy, before.entropy, "Testing: entropy rises.")

    def test_non_finite_rejected(self):
        with self.assertRaises(ContractViolation):
            softmax_policy_from_q([0.0, float('inf')])

    def test_mean_entropy(self):
        states = np.zeros((3, 5, 5, 1))
        self.assertAlmostEqual(mean_entropy(TablePolicy(np.full((3, 4), 0.25)), states), math.log(4), places=15)
        self.assertEqual(mean_entropy(FixedActionPolicy(Action.UP), states), 0.0)
        mixed = TablePolicy([[0.5, 0.5, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]])
        self.assertAlmostEqual(mean_entropy(mixed, states[:2]), math.log(2) / 2, places=15)
        with self.assertRaises(ContractViolation):
            mean_entropy(mixed, states[:0])

    def test_actor_critic_outputs_distributions(self):
        policy, _, _ = small_agent()
        probs, values = policy.evaluate(np.random.default_rng(1).uniform(size=(10, 5, 5, 1)))
        self.assertEqual(probs.shape, (10, 4))
        self.assertEqual(values.shape, (10,))
        self.assertTrue(np.allclose(probs.sum(axis=1), 1.0, rtol=0, atol=1e-12))
        self.assertTrue(np.all(probs >= 0.0))


class AdvantageTestCase(SimpleTestCase):
    """
    Generalized advantage estimation against the hand-evaluated recursion.
    """

    def test_lambda_one_is_monte_carlo_minus_baseline(self):
        rewards = np.array([1.0, 0.0, 2.0])
        values = np.array([0.5, 0.2, 0.1])
        dones = np.array([False, False, True])
        advantages, returns = compute_gae(rewards, values, dones, bootstrap_value=7.0, gamma=0.9, lam=1.0)
        # G = (1 + 0.9·1.8, 0.9·2, 2) = (2.62, 1.8, 2)
        self.assertTrue(np.allclose(advantages, [2.12, 1.6, 1.9], rtol=0, atol=1e-12))
        self.assertTrue(np.allclose(returns, [2.62, 1.8, 2.0], rtol=0, atol=1e-12))

    def test_lambda_zero_is_td_error(self):
        rewards = np.array([0.0, 1.0])
        values = np.array([0.3, 0.4])
        advantages, _ = compute_gae(rewards, values, np.array([False, False]), bootstrap_value=0.5, gamma=0.5, lam=0.0)
        self.assertTrue(np.allclose(advantages, [0.0 + 0.5 * 0.4 - 0.3, 1.0 + 0.5 * 0.5 - 0.4], rtol=0, atol=1e-15))

    def test_done_cuts_the_recursion(self):
        rewards = np.array([0.0, 0.0, 5.0])
        values = np.zeros(3)
        advantages, _ = compute_gae(rewards, values, np.array([False, True, False]), 0.0, gamma=0.99, lam=0.95)
        self.assertEqual(advantages[0], 0.0, "Testing: nothing leaks across the episode boundary.")
        self.assertEqual(advantages[2], 5.0)

    def test_invalid_discount_rejected(self):
        with self.assertRaises(ContractViolation):
            compute_gae(np.zeros(2), np.zeros(2), np.zeros(2), 0.0, gamma=1.0, lam=0.95)
        with self.assertRaises(ContractViolation):
            compute_gae(np.zeros(2), np.zeros(3), np.zeros(2), 0.0, gamma=0.9, lam=0.95)

    def test_normalize(self):
        advantages = np.random.default_rng(0).normal(2.0, 3.0, size=100)
        normalized = normalize_advantages(advantages)
        self.assertAlmostEqual(normalized.mean(), 0.0, places=12)
        self.assertAlmostEqual(normalized.std(), 1.0, places=12)
        self.assertEqual(normalize_advantages(np.array([0.7]))[0], 0.7, "Testing: one sample is left alone.")
        with self.assertLogs('policy.rollout', level='WARNING'):
            self.assertFalse(np.any(normalize_advantages(np.full(4, 3.0))))


class ClippedSurrogateTestCase(SimpleTestCase):

    def test_unclipped_two_sample_batch(self):
        objective, grad = clipped_surrogate(np.array([1.5, 0.5]), np.array([2.0, -1.0]), math.inf)
        self.assertEqual(objective, (1.5 * 2.0 + 0.5 * -1.0) / 2)
        self.assertTrue(np.array_equal(grad, [1.0, -0.5]))

    def test_clipping_flattens_the_objective(self):
        objective, grad = clipped_surrogate(np.array([1.5, 0.5]), np.array([2.0, -1.0]), 0.2)
        self.assertAlmostEqual(objective, (1.2 * 2.0 + 0.8 * -1.0) / 2, places=15)
        self.assertFalse(np.any(grad), "Testing: both samples sit on the clipped branch.")

    def test_inside_the_trust_region_matches_unclipped(self):
        ratios, advantages = np.array([1.05, 0.9]), np.array([1.0, 1.0])
        self.assertEqual(clipped_surrogate(ratios, advantages, 0.2)[0], clipped_surrogate(ratios, advantages, math.inf)[0])


class PPOUpdateTestCase(SimpleTestCase):
    """
    One PPO update on hand-built batches.
    """

    def test_zero_advantages_leave_the_policy_head(self):
        policy, _, _ = small_agent()
        obs = np.random.default_rng(1).uniform(size=(5, 5, 1))
        batch = single_step_batch(policy, obs, Action.LEFT, 0.0)
        before = policy.policy_head.layers[0].params['weight'].copy()
        ppo_update(policy, batch, epochs=2, minibatch=1, adam=AdamSettings(lr=1e-2))
        self.assertTrue(np.array_equal(before, policy.policy_head.layers[0].params['weight']))

    def test_positive_advantage_raises_taken_action_probability(self):
        policy, _, _ = small_agent(seed=3)
        obs = np.random.default_rng(4).uniform(size=(5, 5, 1))
        before = policy.distribution(obs)[Action.RIGHT]
        batch = single_step_batch(policy, obs, Action.RIGHT, 1.0)
        stats = ppo_update(policy, batch, epochs=1, minibatch=1, adam=AdamSettings(lr=1e-3), value_coef=0.0)
        self.assertGreater(policy.distribution(obs)[Action.RIGHT], before)
        self.assertEqual(stats.minibatches, 1)
        self.assertEqual(stats.clip_fraction, 0.0, "Precondition: first step starts at ratio 1.")

    def test_update_requires_advantages(self):
        policy, _, _ = small_agent()
        batch = single_step_batch(policy, np.zeros((5, 5, 1)), 0, 1.0)
        batch.advantages = None
        with self.assertRaises(ContractViolation):
            ppo_update(policy, batch)

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(5)
        policy, _, _ = small_agent(seed=5)
        obs = rng.uniform(size=(6, 5, 5, 1))
        actions = rng.integers(0, 4, size=6)
        logits, _ = policy.forward(obs)
        old = (logits - np.log(np.sum(np.exp(logits), axis=1, keepdims=True)))[np.arange(6), actions]
        advantages, returns = rng.normal(size=6), rng.normal(size=6)

        def loss_fn():
            loss, grads = ppo_loss_and_gradients(
                policy, obs, actions, old, advantages, returns, clip_eps=0.2, value_coef=0.5, entropy_coef=0.01
            )
            return loss.total, grads

        report = grad_check(policy.param_sets, loss_fn, step=1e-6, samples_per_block=20, rng=rng)
        self.assertLess(report.max_relative_error, 1e-4)

    def test_save_and_load(self):
        policy, _, _ = small_agent(seed=6)
        obs = np.random.default_rng(7).uniform(size=(3, 5, 5, 1))
        with tempfile.TemporaryDirectory() as tmp:
            policy.save(tmp)
            restored = ActorCritic.load(tmp)
        self.assertTrue(np.array_equal(policy.evaluate(obs)[0], restored.evaluate(obs)[0]))


class RolloutTestCase(SimpleTestCase):

    def test_single_step_in_dark_chamber(self):
        policy, ae, ev = small_agent((8, 8, 1))
        env = GridWorld(dark_chamber(size=8))
        density = VisitDensity.empty(8, 8)
        batch = collect_rollout(policy, env, ae, ev, horizon=1, rng=np.random.default_rng(0), density=density)
        self.assertEqual(len(batch), 1)
        self.assertEqual(batch[0].breakdown.r_ext, 0.0)
        self.assertLessEqual(batch[0].logprob, 0.0)
        self.assertEqual(density.total_steps, 1, "Postcondition: the visited cell was counted.")

    def test_same_seed_same_batch(self):
        batches = []
        for _ in range(2):
            policy, ae, ev = small_agent((8, 8, 1), seed=11)
            env = GridWorld(dark_chamber(size=8))
            batches.append(collect_rollout(policy, env, ae, ev, horizon=32, rng=np.random.default_rng(12)))
        first, second = batches
        self.assertTrue(np.array_equal(first.actions, second.actions))
        self.assertTrue(np.array_equal(first.rewards.r_total, second.rewards.r_total))
        self.assertTrue(np.array_equal(first.advantages, second.advantages))

    def test_forced_mastery_gives_extrinsic_reward(self):
        policy, ae, ev = small_agent((8, 8, 1))
        env = GridWorld(dark_chamber(size=8))
        batch = collect_rollout(policy, env, ae, ev, horizon=16, rng=np.random.default_rng(2), forced_alpha=1.0)
        self.assertTrue(np.array_equal(batch.rewards.r_total, batch.rewards.r_ext))

    def test_episodes_reset_inside_a_rollout(self):
        policy, ae, ev = small_agent()
        env = GridWorld(GridSpec('short', 5, 5, start=(2, 2), max_episode_steps=3))
        tracker = EpisodeTracker()
        batch = collect_rollout(policy, env, ae, ev, horizon=7, rng=np.random.default_rng(3), tracker=tracker)
        self.assertEqual(list(np.flatnonzero(batch.dones)), [2, 5])
        self.assertEqual(len(batch.episode_returns), 2)
        self.assertEqual(tracker.running_length, 1, "Postcondition: the third episode carries over.")
        self.assertEqual(batch.entropy_record(7).step, 7)
        self.assertTrue(0.0 <= batch.entropy_record(7).mean_policy_entropy <= math.log(4))

    def test_horizon_must_be_positive(self):
        policy, ae, ev = small_agent()
        with self.assertRaises(ContractViolation):
            collect_rollout(policy, GridWorld(GridSpec('g', 5, 5, start=(0, 0))), ae, ev, 0, np.random.default_rng(0))


class GreedyPathTestCase(SimpleTestCase):

    def test_straight_line_to_goal(self):
        env = GridWorld(GridSpec('corridor', 1, 3, start=(0, 2), goal=(0, 0)))
        path = greedy_path(FixedActionPolicy(Action.LEFT), env)
        self.assertTrue(path.reached_goal)
        self.assertEqual(path.length, 2)
        self.assertEqual(path.cells, ((0, 2), (0, 1), (0, 0)))

    def test_bounded_by_max_steps(self):
        env = GridWorld(dark_chamber(size=6))
        path = greedy_path(FixedActionPolicy(Action.DOWN), env, max_steps=10)
        self.assertFalse(path.reached_goal)
        self.assertEqual(path.length, 10)
        self.assertEqual(set(path.cells), {(5, 0)}, "Testing: the wall keeps the agent in place.")
