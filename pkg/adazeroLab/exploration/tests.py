import math

import numpy as np
from django.test import SimpleTestCase

from adazeroLab.exceptions import ContractViolation
from envs.grids import GridSpec, GridWorld
from exploration import autoencoder, evaluator
from exploration.mixing import RunningMeanStd, combine, combine_batch, per_step_pipeline, pipeline_batch
from exploration.probe import TRACE_EVERY, coupling_correlation, joint_train, probe_mastery
from nncore.optim import AdamSettings

SMALL = {'conv_filters': (4, 8), 'bottleneck': 32}
FAST = AdamSettings(lr=5e-3)
SEEDS = range(5)


def grid_states(size=5, cells=None):
    """Observations of an empty size×size grid with the agent at each given cell."""
    env = GridWorld(GridSpec('probe', size, size, start=(0, 0)))
    env.reset()
    cells = cells if cells is not None else [(r, c) for r in range(size) for c in range(size)]
    return np.stack([env.observation_at(cell) for cell in cells])


def seen_and_unseen(seed, count=10):
    """Two disjoint random sets of ``count`` agent positions on the 5x5 grid."""
    states = grid_states()
    order = np.random.default_rng(1000 + seed).permutation(len(states))
    return states[order[:count]], states[order[count:2 * count]]


def zeroed(params):
    for _, _, value in params.parameters():
        value[...] = 0.0
    return params


class AutoencoderTestCase(SimpleTestCase):
    """
    Reconstruction error as intrinsic reward.
    """

    def test_perfect_reconstruction_gives_zero(self):
        """
        With every weight zero the output is sigmoid(0) = 0.5, which matches a flat 0.5 image exactly.
        """
        ae = zeroed(autoencoder.build_autoencoder((3, 3, 1), np.random.default_rng(0), **SMALL))
        # Testing assertion
        result = autoencoder.reconstruct(ae, np.full((3, 3, 1), 0.5))
        self.assertEqual(result.r_int, 0.0, "Testing: r_int is exactly zero.")

    def test_zero_output_decoder(self):
        """
        A decoder pinned at 0 gives r_int = ½ Σ s².
        """
        ae = zeroed(autoencoder.build_autoencoder((4, 4, 1), np.random.default_rng(1), **SMALL))
        ae.layers[-2].params['bias'][...] = -1000.0
        obs = np.random.default_rng(2).uniform(size=(4, 4, 1))
        result = autoencoder.reconstruct(ae, obs)
        # Precondition assertion
        self.assertFalse(np.any(result.obs_hat), "Precondition: decoder output is zero.")
        # Testing assertion
        self.assertAlmostEqual(result.r_int, 0.5 * float(np.sum(obs ** 2)), places=12, msg="Testing: r_int = Q/2.")

    def test_decoder_mirrors_the_encoder(self):
        """
        Each encoder conv stage has a decoder stage that upsamples back to that stage's input.
        """
        ae = autoencoder.build_autoencoder((13, 13, 1), np.random.default_rng(3), conv_filters=(8, 16), bottleneck=64)
        convs = [layer for layer in ae.layers if layer.kind == 'conv2d']
        upsamples = [layer for layer in ae.layers if layer.kind == 'upsample2d']
        # Precondition assertion
        self.assertEqual([c.output_shape for c in convs[:2]], [(7, 7, 8), (4, 4, 16)], "Precondition: encoder 13 → 7 → 4.")
        # Testing assertion
        self.assertEqual([u.output_shape[:2] for u in upsamples], [(7, 7), (13, 13)], "Testing: decoder 4 → 7 → 13.")
        self.assertEqual([c.output_shape for c in convs[2:]], [(7, 7, 8), (13, 13, 1)], "Testing: channels mirror back.")
        # Postcondition assertion
        self.assertEqual(ae.output_shape, (13, 13, 1), "Postcondition: output has the observation shape.")

    def test_reconstruct_is_deterministic_and_bounded(self):
        """
        Same input, same reconstruction; pixels in [0, 1]; r_int ≥ 0.
        """
        ae = autoencoder.build_autoencoder((5, 5, 1), np.random.default_rng(3), **SMALL)
        obs = grid_states(cells=[(2, 2)])[0]
        # Testing assertion
        first, second = autoencoder.reconstruct(ae, obs), autoencoder.reconstruct(ae, obs)
        self.assertEqual(first.r_int, second.r_int, "Testing: deterministic.")
        self.assertTrue(np.all((first.obs_hat >= 0) & (first.obs_hat <= 1)), "Testing: pixels in [0, 1].")
        self.assertGreaterEqual(first.r_int, 0.0, "Testing: non-negative reward.")

    def test_shape_mismatch_rejected(self):
        """
        Wrong observation shapes and empty batches are contract violations.
        """
        ae = autoencoder.build_autoencoder((5, 5, 1), np.random.default_rng(4), **SMALL)
        # Testing assertion
        with self.assertRaises(ContractViolation, msg="Testing: 4x4 into a 5x5 autoencoder."):
            autoencoder.reconstruct(ae, np.zeros((4, 4, 1)))
        with self.assertRaises(ContractViolation, msg="Testing: empty training batch."):
            autoencoder.train_step(ae, np.zeros((0, 5, 5, 1)))

    def test_training_on_one_observation_lowers_loss(self):
        """
        100 steps on a single image lower its loss for every seed.
        """
        obs = grid_states(cells=[(1, 3)])
        for seed in range(10):
            ae = autoencoder.build_autoencoder((5, 5, 1), np.random.default_rng(seed), **SMALL)
            # Testing assertion
            losses = [autoencoder.train_step(ae, obs, AdamSettings(lr=1e-3)) for _ in range(100)]
            self.assertLess(losses[-1], losses[0], f"Testing: seed {seed} loss went down.")

    def test_identical_batch_matches_single_image_gradient(self):
        """
        The loss is a batch mean, so repeating one image leaves loss and gradient unchanged.
        """
        ae = autoencoder.build_autoencoder((5, 5, 1), np.random.default_rng(5), **SMALL)
        obs = grid_states(cells=[(0, 4)])
        single_loss, single = autoencoder.loss_and_gradients(ae, obs)
        # Testing assertion
        batch_loss, batch = autoencoder.loss_and_gradients(ae, np.repeat(obs, 3, axis=0))
        self.assertAlmostEqual(single_loss, batch_loss, places=12, msg="Testing: same loss.")
        for (_, _, a), (_, _, b) in zip(single.items(), batch.items()):
            self.assertTrue(np.allclose(a, b, rtol=1e-10, atol=1e-14), "Testing: same gradient.")

    def test_zero_learning_rate_changes_nothing(self):
        """
        lr = 0 keeps loss and parameters fixed.
        """
        ae = autoencoder.build_autoencoder((5, 5, 1), np.random.default_rng(6), **SMALL)
        before = [value.copy() for _, _, value in ae.parameters()]
        obs = grid_states(cells=[(2, 1), (3, 3)])
        # Testing assertion
        losses = [autoencoder.train_step(ae, obs, AdamSettings(lr=0.0)) for _ in range(3)]
        self.assertEqual(losses[0], losses[-1], "Testing: loss constant.")
        # Postcondition assertion
        for old, (_, _, new) in zip(before, ae.parameters()):
            self.assertTrue(np.array_equal(old, new), "Postcondition: parameters unchanged.")

    def test_unseen_states_score_higher(self):
        """
        After training on a fixed state set, held-in states reconstruct better than new ones.
        """
        states = grid_states()
        wins = 0
        for seed in range(10):
            rng = np.random.default_rng(100 + seed)
            order = rng.permutation(len(states))
            seen, unseen = states[order[:5]], states[order[5:10]]
            ae = autoencoder.build_autoencoder((5, 5, 1), rng, **SMALL)
            for _ in range(400):
                autoencoder.train_step(ae, seen, FAST)
            _, r_seen = autoencoder.reconstruct_batch(ae, seen)
            _, r_unseen = autoencoder.reconstruct_batch(ae, unseen)
            wins += int(np.median(r_seen) < np.median(r_unseen))
        # Testing assertion
        self.assertGreaterEqual(wins, 9, "Testing: novelty is detected in at least 9 of 10 seeds.")

    def test_training_set_reward_decays(self):
        """
        1500 steps on a frozen set cut the median intrinsic reward by at least 10x.
        """
        states = grid_states(cells=[(r, c) for r in (0, 2, 4) for c in (0, 2, 4)] + [(1, 1)])
        ae = autoencoder.build_autoencoder((5, 5, 1), np.random.default_rng(7), **SMALL)
        _, before = autoencoder.reconstruct_batch(ae, states)
        # Precondition assertion
        self.assertGreater(np.median(before), 0.0, "Precondition: the untrained autoencoder is imperfect.")
        # Testing assertion
        for _ in range(1500):
            autoencoder.train_step(ae, states, FAST)
        _, after = autoencoder.reconstruct_batch(ae, states)
        self.assertLess(np.median(after), 0.1 * np.median(before), "Testing: reward decays on mastered states.")


class EvaluatorTestCase(SimpleTestCase):
    """
    Mastery evaluation network: real → 1, reconstruction → 0.
    """

    def test_zero_head_scores_one_half(self):
        """
        A zero output layer gives logit 0, so α = 0.5.
        """
        ev = evaluator.build_evaluator((5, 5, 1), np.random.default_rng(0), conv_filters=(4, 8))
        head = ev.layers[-1]
        head.params['weight'][...] = 0.0
        head.params['bias'][...] = 0.0
        # Testing assertion
        self.assertEqual(evaluator.score(ev, grid_states(cells=[(1, 1)])[0]).alpha, 0.5, "Testing: α = sigmoid(0).")

    def test_scores_are_probabilities_and_deterministic(self):
        """
        Even wild inputs score inside [0, 1], and scoring twice agrees.
        """
        ev = evaluator.build_evaluator((5, 5, 1), np.random.default_rng(1), conv_filters=(4, 8))
        inputs = np.random.default_rng(2).uniform(size=(50, 5, 5, 1)) * 20.0
        # Testing assertion
        alphas = evaluator.score_batch(ev, inputs)
        self.assertTrue(np.all((alphas >= 0.0) & (alphas <= 1.0)), "Testing: α in [0, 1].")
        self.assertTrue(np.array_equal(alphas, evaluator.score_batch(ev, inputs)), "Testing: deterministic.")

    def test_separable_batches_loss_decreases(self):
        """
        All-ones against all-zeros is learnable for every seed.
        """
        real, fake = np.ones((8, 5, 5, 1)), np.zeros((8, 5, 5, 1))
        for seed in range(10):
            ev = evaluator.build_evaluator((5, 5, 1), np.random.default_rng(seed), conv_filters=(4, 8))
            # Testing assertion
            losses = [evaluator.train_step(ev, real, fake, AdamSettings(lr=1e-2)) for _ in range(50)]
            self.assertLess(losses[-1], losses[0], f"Testing: seed {seed} separates the classes.")

    def test_indistinguishable_batches_bounded_by_ln2(self):
        """
        With identical real and fake batches the BCE can never drop below ln 2.
        """
        ev = evaluator.build_evaluator((5, 5, 1), np.random.default_rng(3), conv_filters=(4, 8))
        batch = grid_states(cells=[(0, 0), (4, 4), (2, 3)])
        for _ in range(20):
            # Testing assertion
            loss = evaluator.train_step(ev, batch, batch, AdamSettings(lr=1e-2))
            self.assertGreaterEqual(loss, math.log(2) - 1e-12, "Testing: loss ≥ ln 2.")

    def test_zero_learning_rate_changes_nothing(self):
        """
        lr = 0 leaves every evaluator weight in place.
        """
        ev = evaluator.build_evaluator((5, 5, 1), np.random.default_rng(4), conv_filters=(4, 8))
        before = [value.copy() for _, _, value in ev.parameters()]
        evaluator.train_step(ev, np.ones((2, 5, 5, 1)), np.zeros((2, 5, 5, 1)), AdamSettings(lr=0.0))
        # Postcondition assertion
        for old, (_, _, new) in zip(before, ev.parameters()):
            self.assertTrue(np.array_equal(old, new), "Postcondition: parameters unchanged.")

    def test_empty_batch_rejected(self):
        """
        Both batches must be non-empty.
        """
        ev = evaluator.build_evaluator((5, 5, 1), np.random.default_rng(5), conv_filters=(4, 8))
        # Testing assertion
        with self.assertRaises(ContractViolation, msg="Testing: empty fake batch."):
            evaluator.train_step(ev, np.ones((2, 5, 5, 1)), np.zeros((0, 5, 5, 1)))

    def test_default_schedule_comes_from_settings(self):
        """
        Without an explicit optimizer the evaluator uses its own decaying step size.
        """
        with self.settings(ADAZERO_EVALUATOR_ADAM={'lr': 2e-2, 'half_life': 7.0}):
            adam = evaluator.default_adam()
            pinned = evaluator.default_adam(half_life=0.0)
        # Testing assertion
        self.assertEqual((adam.lr, adam.half_life), (2e-2, 7.0), "Testing: settings supply lr and half-life.")
        self.assertEqual(pinned.half_life, 0.0, "Testing: an explicit 0 switches the decay off.")
        self.assertEqual(adam.beta2, 0.999, "Testing: moments follow the shared Adam settings.")

    def test_near_perfect_reconstruction_scores_as_mastered(self):
        """
        An evaluator trained to convergence against poor reconstructions scores a
        near-perfect reconstruction of a training state at α ≥ 0.9.
        """
        states, _ = seen_and_unseen(0)
        rng = np.random.default_rng(11)
        ae = autoencoder.build_autoencoder((5, 5, 1), rng, **SMALL)
        poor, _ = autoencoder.reconstruct_batch(ae, states)
        ev = evaluator.build_evaluator((5, 5, 1), rng, conv_filters=(4, 8))
        losses = [evaluator.train_step(ev, states, poor, AdamSettings(lr=1e-2)) for _ in range(300)]
        # Precondition assertion
        self.assertLess(losses[-1], 0.05, "Precondition: the evaluator has converged on real vs poor.")
        self.assertLess(np.median(evaluator.score_batch(ev, poor)), 0.1, "Precondition: poor reconstructions read as fake.")
        # Testing assertion
        near_perfect = 0.98 * states + 0.02 * poor
        alpha = evaluator.score_batch(ev, near_perfect)
        self.assertGreaterEqual(np.median(alpha), 0.9, "Testing: median α ≥ 0.9 on near-perfect reconstructions.")
        # Postcondition assertion
        self.assertTrue(np.all(evaluator.score_batch(ev, states) >= 0.9), "Postcondition: real states read as real.")

    def test_mastery_rises_as_reconstructions_sharpen(self):
        """
        With the evaluator settled on poor reconstructions, training the autoencoder raises α.
        """
        for seed in SEEDS:
            states, _ = seen_and_unseen(seed)
            rng = np.random.default_rng(seed)
            ae = autoencoder.build_autoencoder((5, 5, 1), rng, **SMALL)
            poor, _ = autoencoder.reconstruct_batch(ae, states)
            ev = evaluator.build_evaluator((5, 5, 1), rng, conv_filters=(4, 8))
            for _ in range(300):
                evaluator.train_step(ev, states, poor, AdamSettings(lr=1e-2))
            alpha_poor = float(np.median(evaluator.score_batch(ev, poor)))
            for _ in range(1500):
                autoencoder.train_step(ae, states, FAST)
            sharp, r_sharp = autoencoder.reconstruct_batch(ae, states)
            # Precondition assertion
            self.assertLess(np.median(r_sharp), np.median(autoencoder.reconstruction_error(states, poor)),
                            f"Precondition: seed {seed} reconstructions improved.")
            # Testing assertion
            alpha_sharp = float(np.median(evaluator.score_batch(ev, sharp)))
            self.assertGreater(alpha_sharp, alpha_poor, f"Testing: seed {seed} α rises from {alpha_poor:.3f}.")


class MixingTestCase(SimpleTestCase):
    """
    R_total = R_ext + (1 − α)·R_int.
    """

    def test_worked_examples(self):
        """
        Hand-evaluated mixes.
        """
        # Testing assertion
        self.assertEqual(combine(0.7, 0.4, 1.0).r_total, 0.7, "Testing: full mastery drops the bonus.")
        self.assertAlmostEqual(combine(0.7, 0.4, 0.0).r_total, 1.1, places=15, msg="Testing: no mastery keeps it all.")
        self.assertAlmostEqual(combine(1.0, 0.4, 0.5).r_total, 1.2, places=15, msg="Testing: half mastery keeps half.")

    def test_random_triples(self):
        """
        Formula, interpolation bounds and monotonicity in α over 10k random triples.
        """
        rng = np.random.default_rng(0)
        r_ext = rng.uniform(0, 5, size=10_000)
        r_int = rng.uniform(0, 5, size=10_000)
        alpha = rng.uniform(0, 1, size=10_000)
        # Testing assertion
        batch = combine_batch(r_ext, r_int, alpha)
        self.assertTrue(np.array_equal(batch.r_total, r_ext + (1.0 - alpha) * r_int), "Testing: exact formula.")
        self.assertTrue(np.all(batch.r_total >= r_ext), "Testing: lower interpolation bound.")
        self.assertTrue(np.all(batch.r_total <= r_ext + r_int), "Testing: upper interpolation bound.")
        higher = np.minimum(alpha + rng.uniform(0, 1, size=alpha.size), 1.0)
        self.assertTrue(np.all(combine_batch(r_ext, r_int, higher).r_total <= batch.r_total), "Testing: nonincreasing in α.")
        full = combine_batch(r_ext, r_int, np.ones_like(alpha))
        self.assertTrue(np.array_equal(full.r_total, r_ext), "Testing: α = 1 gives r_ext bit for bit.")
        # Postcondition assertion
        for i in range(0, 10_000, 997):
            self.assertEqual(combine(r_ext[i], r_int[i], alpha[i]), batch[i], "Postcondition: scalar and batch agree.")

    def test_out_of_range_inputs_rejected(self):
        """
        α outside [0, 1], negative rewards and NaN mastery are contract violations.
        """
        for args in ((0.0, 1.0, 1.5), (0.0, 1.0, -0.1), (0.0, -1.0, 0.5), (-1.0, 1.0, 0.5), (0.0, 1.0, float('nan'))):
            # Testing assertion
            with self.assertRaises(ContractViolation, msg=f"Testing: {args} rejected."):
                combine(*args)

    def test_identity_autoencoder_passes_extrinsic_through(self):
        """
        A perfect reconstruction adds no bonus whatever α is.
        """
        ae = zeroed(autoencoder.build_autoencoder((3, 3, 1), np.random.default_rng(0), **SMALL))
        ev = evaluator.build_evaluator((3, 3, 1), np.random.default_rng(1), conv_filters=(4, 8))
        # Testing assertion
        breakdown = per_step_pipeline(np.full((3, 3, 1), 0.5), 0.25, ae, ev)
        self.assertEqual(breakdown.r_int_raw, 0.0, "Testing: zero reconstruction error.")
        self.assertEqual(breakdown.r_total, 0.25, "Testing: r_total = r_ext.")

    def test_rewardless_chamber_gives_nonnegative_bonus(self):
        """
        With r_ext ≡ 0 the training reward is (1 − α)·r_int ≥ 0, and frozen snapshots repeat it.
        """
        states = grid_states()
        ae = autoencoder.build_autoencoder((5, 5, 1), np.random.default_rng(2), **SMALL)
        ev = evaluator.build_evaluator((5, 5, 1), np.random.default_rng(3), conv_filters=(4, 8))
        # Testing assertion
        batch = pipeline_batch(states, np.zeros(len(states)), ae, ev)
        self.assertTrue(np.allclose(batch.r_total, (1.0 - batch.alpha) * batch.r_int_raw, rtol=0, atol=0), "Testing: pure bonus.")
        self.assertTrue(np.all(batch.r_total >= 0.0), "Testing: non-negative.")
        # Postcondition assertion
        again = pipeline_batch(states, np.zeros(len(states)), ae, ev)
        self.assertTrue(np.array_equal(batch.r_total, again.r_total), "Postcondition: frozen snapshots are deterministic.")

    def test_forced_alpha_ablations(self):
        """
        α forced to 1 gives r_ext; α forced to 0 gives r_ext + r_int.
        """
        states = grid_states(cells=[(0, 0), (3, 1)])
        r_ext = np.array([0.0, 1.0])
        ae = autoencoder.build_autoencoder((5, 5, 1), np.random.default_rng(4), **SMALL)
        ev = evaluator.build_evaluator((5, 5, 1), np.random.default_rng(5), conv_filters=(4, 8))
        # Testing assertion
        no_intrinsic = pipeline_batch(states, r_ext, ae, ev, forced_alpha=1.0)
        no_adaptive = pipeline_batch(states, r_ext, ae, ev, forced_alpha=0.0)
        self.assertTrue(np.array_equal(no_intrinsic.r_total, r_ext), "Testing: no_intrinsic keeps r_ext.")
        self.assertTrue(np.array_equal(no_adaptive.r_total, r_ext + no_adaptive.r_int_raw), "Testing: no_adaptive adds it all.")

    def test_normalizer_keeps_raw_reward(self):
        """
        Running-std normalization rescales the mixed value but leaves r_int_raw = ½‖s − ŝ‖².
        """
        states = grid_states()
        ae = autoencoder.build_autoencoder((5, 5, 1), np.random.default_rng(6), **SMALL)
        ev = evaluator.build_evaluator((5, 5, 1), np.random.default_rng(7), conv_filters=(4, 8))
        _, raw = autoencoder.reconstruct_batch(ae, states)
        plain = pipeline_batch(states, np.zeros(len(states)), ae, ev)
        # Precondition assertion
        self.assertTrue(np.array_equal(plain.r_int_norm, plain.r_int_raw), "Precondition: no normalizer, nothing rescaled.")
        # Testing assertion
        normalizer = RunningMeanStd()
        scaled = pipeline_batch(states, np.zeros(len(states)), ae, ev, normalizer=normalizer)
        self.assertTrue(np.array_equal(scaled.r_int_raw, raw), "Testing: raw column is the reconstruction error.")
        self.assertTrue(np.allclose(scaled.r_int_norm, raw / (normalizer.std + 1e-8), rtol=1e-12, atol=0),
                        "Testing: mixed column is the rescaled error.")
        # Postcondition assertion
        self.assertTrue(np.array_equal(scaled.r_total, (1.0 - scaled.alpha) * scaled.r_int_norm),
                        "Postcondition: r_total mixes the rescaled value.")

    def test_running_std(self):
        """
        Chunked parallel updates match the moments of the whole sample.
        """
        stats = RunningMeanStd(epsilon=0.0)
        values = np.random.default_rng(6).normal(3.0, 2.0, size=4000)
        for chunk in np.split(values, 8):
            stats.update(chunk)
        # Testing assertion
        self.assertAlmostEqual(stats.mean, values.mean(), places=9, msg="Testing: mean.")
        self.assertAlmostEqual(stats.std, values.std(), places=9, msg="Testing: standard deviation.")
        self.assertTrue(np.all(stats.normalize(np.abs(values)) >= 0.0), "Testing: scaling keeps the sign.")


class MasteryProbeTestCase(SimpleTestCase):
    """
    Joint training of autoencoder and evaluator on random frozen state sets.
    """

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.probes = []
        for seed in SEEDS:
            seen, unseen = seen_and_unseen(seed)
            cls.probes.append(probe_mastery(
                seen, steps=1500, rng=np.random.default_rng(seed), unseen_states=unseen, ae_adam=FAST, **SMALL,
            ))

    def test_effective_intrinsic_vanishes_on_mastered_states(self):
        """
        (1 − α)·r_int falls below 5% of its starting median on every seed.
        """
        for seed, probe in zip(SEEDS, self.probes):
            # Precondition assertion
            self.assertLess(probe.final_median_r_int, probe.initial_median_r_int, f"Precondition: seed {seed} r_int fell.")
            # Testing assertion
            self.assertLess(probe.effective_ratio, 0.05, f"Testing: seed {seed} effective ratio {probe.effective_ratio:.4f}.")
            # Postcondition assertion
            self.assertTrue(0.0 <= probe.final_median_alpha <= 1.0, "Postcondition: α stays a probability.")

    def test_mastery_rises_after_the_evaluator_settles(self):
        """
        Median α at the end of training beats its value once the evaluator's step size has decayed.
        """
        rises = 0
        for probe in self.probes:
            # Precondition assertion
            self.assertEqual(len(probe.alpha_trace), 1500 // TRACE_EVERY, "Precondition: one trace point per chunk.")
            rises += int(probe.final_median_alpha > probe.alpha_at(TRACE_EVERY))
        # Testing assertion
        self.assertGreaterEqual(rises, 4, "Testing: α rises in at least 4 of 5 seeds.")

    def test_coupling_is_positive(self):
        """
        Across seen and unseen states, lower reconstruction error goes with higher α.
        """
        rhos = [probe.coupling_spearman for probe in self.probes]
        # Precondition assertion
        self.assertTrue(all(-1.0 <= rho <= 1.0 for rho in rhos), "Precondition: ρ is a rank correlation.")
        # Testing assertion
        self.assertGreater(float(np.mean(rhos)), 0.0, f"Testing: mean coupling over seeds is positive ({rhos}).")

    def test_coupling_correlation_is_deterministic(self):
        """
        Scoring the same probe set twice gives the same ρ.
        """
        rng = np.random.default_rng(1)
        states = grid_states()
        ae = autoencoder.build_autoencoder((5, 5, 1), rng, **SMALL)
        ev = evaluator.build_evaluator((5, 5, 1), rng, conv_filters=(4, 8))
        joint_train(ae, ev, states[:6], steps=20, ae_adam=FAST)
        # Testing assertion
        rho = coupling_correlation(ae, ev, states)
        self.assertTrue(-1.0 <= rho <= 1.0, "Testing: ρ in [−1, 1].")
        self.assertEqual(rho, coupling_correlation(ae, ev, states), "Testing: deterministic.")
