import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from adazeroLab.exceptions import ContractViolation, TrainingHalted
from nncore.checkpoint import load_checkpoint, save_checkpoint
from nncore.functional import PolicyDistribution, entropy, entropy_array, softmax
from nncore.gradcheck import grad_check
from nncore.layers import Conv2D, Dense, Flatten, ReLU, Reshape, Sigmoid, Tanh, Upsample2D, layer_from_descriptor
from nncore.network import Gradients, ParamSet, backward, forward
from nncore.optim import AdamSettings, adam_step, clip_grad_norm


def squared_loss(network, inputs, targets=None):
    """Loss ½‖y − t‖² with its analytic gradient, for grad_check."""
    def loss_fn():
        out = network.forward(inputs)
        residual = out if targets is None else out - targets
        return 0.5 * float(np.sum(residual ** 2)), [network.backward(residual)]
    return loss_fn


class ForwardBackwardTestCase(SimpleTestCase):
    """
    Forward and backward passes against hand-evaluated arithmetic.
    """

    def test_identity_dense_layer(self):
        """
        Identity weights with zero bias reproduce the input.
        """
        layer = Dense((3,), 3)
        layer.params['weight'][...] = np.eye(3)
        net = ParamSet([layer])
        x = np.array([[0.5, -1.0, 2.0]])
        # Precondition assertion
        self.assertFalse(np.any(layer.params['bias']), "Precondition: bias starts at zero.")
        # Testing assertion
        self.assertTrue(np.array_equal(forward(net, x), x), "Testing: identity layer returns x.")

    def test_zero_network_outputs_zero(self):
        """
        A zero-weight, zero-bias network maps anything to zeros.
        """
        net = ParamSet([Dense((4,), 5), Tanh((5,)), Dense((5,), 2)])
        # Testing assertion
        out = net.forward(np.random.default_rng(1).normal(size=(3, 4)))
        self.assertTrue(np.array_equal(out, np.zeros((3, 2))), "Testing: output is all zeros.")

    def test_two_layer_hand_evaluation(self):
        """
        h = relu(x W1 + b1); y = h W2 + b2, evaluated by hand for x = (1, 1).
        """
        first, second = Dense((2,), 2), Dense((2,), 1)
        first.params['weight'][...] = [[1.0, 2.0], [0.0, 1.0]]
        first.params['bias'][...] = [0.0, 1.0]
        second.params['weight'][...] = [[1.0], [-1.0]]
        second.params['bias'][...] = [0.5]
        net = ParamSet([first, ReLU((2,)), second])
        # Testing assertion: h = (1, 4); y = 1 - 4 + 0.5
        self.assertAlmostEqual(float(net.forward(np.array([[1.0, 1.0]]))[0, 0]), -2.5, places=12,
                               msg="Testing: matches the hand evaluation.")

    def test_linear_layer_gradient_is_outer_product(self):
        """
        For L = ½‖y‖² with y = xW the weight gradient is the outer product of x and y.
        """
        rng = np.random.default_rng(2)
        net = ParamSet([Dense((3,), 2, rng=rng)])
        x = rng.normal(size=(1, 3))
        y = net.forward(x)
        # Testing assertion
        grads = backward(net, y)
        self.assertTrue(np.allclose(grads.blocks[0]['weight'], np.outer(x[0], y[0]), atol=1e-14),
                        "Testing: weight gradient is x ⊗ y.")
        self.assertTrue(np.allclose(grads.blocks[0]['bias'], y[0], atol=1e-14), "Testing: bias gradient is y.")

    def test_zero_loss_gradient_gives_zero_parameter_gradients(self):
        """
        A zero upstream gradient produces zero parameter gradients everywhere.
        """
        rng = np.random.default_rng(3)
        net = ParamSet([Dense((3,), 4, rng=rng), Tanh((4,)), Dense((4,), 2, rng=rng)])
        net.forward(rng.normal(size=(5, 3)))
        grads = net.backward(np.zeros((5, 2)))
        # Testing assertion
        for _, _, value in grads.items():
            self.assertFalse(np.any(value), "Testing: every parameter gradient is zero.")

    def test_shape_mismatch_is_rejected(self):
        """
        Inputs of the wrong width are a contract violation.
        """
        net = ParamSet([Dense((3,), 2)])
        # Testing assertion
        with self.assertRaises(ContractViolation, msg="Testing: 4 features into a 3-feature layer."):
            net.forward(np.zeros((1, 4)))

    def test_incompatible_layer_stack_is_rejected(self):
        """
        Adjacent layers must agree on shape.
        """
        # Testing assertion
        with self.assertRaises(ContractViolation, msg="Testing: 2 outputs cannot feed 4 inputs."):
            ParamSet([Dense((3,), 2), Dense((4,), 1)])

    def test_backward_without_forward_is_rejected(self):
        """
        backward needs the activations cached by forward.
        """
        net = ParamSet([Dense((3,), 2)])
        # Testing assertion
        with self.assertRaises(ContractViolation, msg="Testing: no cached forward pass."):
            net.backward(np.zeros((1, 2)))

    def test_conv_output_shape(self):
        """
        3x3 kernel, stride 2, padding 1 halves a 50x50 image (rounding up).
        """
        conv = Conv2D((50, 50, 1), 8, kernel=3, stride=2, padding=1, rng=np.random.default_rng(0))
        # Testing assertion
        self.assertEqual(conv.output_shape, (25, 25, 8), "Testing: declared output shape.")
        out = conv.forward(np.zeros((2, 50, 50, 1)))
        self.assertEqual(out.shape, (2, 25, 25, 8), "Testing: computed output shape.")

    def test_conv_matches_explicit_sum(self):
        """
        A single output pixel equals the explicit kernel-window sum.
        """
        rng = np.random.default_rng(4)
        conv = Conv2D((4, 4, 2), 3, kernel=3, stride=1, padding=0, rng=rng)
        conv.params['bias'][...] = rng.normal(size=3)
        x = rng.normal(size=(1, 4, 4, 2))
        out = conv.forward(x)
        expected = np.einsum('ijc,ijcf->f', x[0, 1:4, 0:3, :], conv.params['weight']) + conv.params['bias']
        # Testing assertion
        self.assertTrue(np.allclose(out[0, 1, 0], expected, atol=1e-12), "Testing: window sum at (1, 0).")

    def test_upsample_repeats_nearest_cells(self):
        """
        Resizing 2x2 → 3x3 copies the nearest source cell; backward sums what each cell fed.
        """
        layer = Upsample2D((2, 2, 1), (3, 3))
        x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 2, 2, 1)
        # Precondition assertion
        self.assertEqual(layer.output_shape, (3, 3, 1), "Precondition: declared output shape.")
        # Testing assertion
        out = layer.forward(x)[0, :, :, 0]
        self.assertTrue(np.array_equal(out, [[1, 1, 2], [1, 1, 2], [3, 3, 4]]), "Testing: nearest-neighbour copy.")
        grad_in, grads = layer.backward(np.ones((1, 3, 3, 1)))
        self.assertTrue(np.array_equal(grad_in[0, :, :, 0], [[4, 2], [2, 1]]), "Testing: fan-out counts per cell.")
        # Postcondition assertion
        self.assertEqual(grads, {}, "Postcondition: the layer has no parameters.")

    def test_upsample_cannot_shrink(self):
        """
        Upsample2D only grows a map.
        """
        # Testing assertion
        with self.assertRaises(ContractViolation, msg="Testing: 4x4 → 3x3 is a shrink."):
            Upsample2D((4, 4, 1), (3, 3))


class GradCheckTestCase(SimpleTestCase):
    """
    Backward passes agree with central finite differences.
    """

    def test_random_two_layer_net(self):
        """
        Dense → ReLU → Dense on random inputs.
        """
        rng = np.random.default_rng(5)
        net = ParamSet([Dense((4,), 6, rng=rng), ReLU((6,)), Dense((6,), 3, rng=rng)])
        # Testing assertion
        report = grad_check(net, squared_loss(net, rng.normal(size=(7, 4))), step=1e-6)
        self.assertLess(report.max_relative_error, 1e-4, "Testing: gradients match finite differences.")

    def test_linear_least_squares(self):
        """
        A quadratic loss has exact central differences, so the error is at round-off level.
        """
        rng = np.random.default_rng(6)
        net = ParamSet([Dense((3,), 2, rng=rng)])
        inputs, targets = rng.normal(size=(10, 3)) * 3.0, rng.normal(size=(10, 2))
        # Testing assertion
        report = grad_check(net, squared_loss(net, inputs, targets), step=1e-3)
        self.assertLess(report.max_relative_error, 1e-7, "Testing: round-off level agreement.")

    def test_zero_parameter_network(self):
        """
        A network without parameters yields an empty report.
        """
        net = ParamSet([ReLU((3,))])
        # Testing assertion
        report = grad_check(net, squared_loss(net, np.ones((2, 3))))
        self.assertEqual(report.blocks, [], "Testing: nothing to check.")
        self.assertEqual(report.max_relative_error, 0.0, "Testing: zero error by definition.")

    def test_conv_dense_stack(self):
        """
        Conv → Tanh → Flatten → Dense → Sigmoid → Reshape.
        """
        rng = np.random.default_rng(7)
        net = ParamSet([
            Conv2D((5, 5, 1), 2, kernel=3, stride=2, padding=1, rng=rng),
            Tanh((3, 3, 2)),
            Flatten((3, 3, 2)),
            Dense((18,), 4, rng=rng),
            Sigmoid((4,)),
            Reshape((4,), (2, 2)),
        ])
        # Testing assertion
        report = grad_check(net, squared_loss(net, rng.uniform(size=(3, 5, 5, 1))), step=1e-6)
        self.assertLess(report.max_relative_error, 1e-4, "Testing: gradients match finite differences.")
        self.assertTrue(report.passed(), "Testing: report passes at the default tolerance.")

    def test_upsample_conv_decoder_stack(self):
        """
        Dense → Reshape → Upsample2D → Conv → Sigmoid, the decoder pattern.
        """
        rng = np.random.default_rng(8)
        net = ParamSet([
            Dense((4,), 8, rng=rng),
            Reshape((8,), (2, 2, 2)),
            Upsample2D((2, 2, 2), (3, 3)),
            Conv2D((3, 3, 2), 1, kernel=3, stride=1, padding=1, rng=rng),
            Sigmoid((3, 3, 1)),
        ])
        # Testing assertion
        report = grad_check(net, squared_loss(net, rng.normal(size=(3, 4))), step=1e-6)
        self.assertLess(report.max_relative_error, 1e-4, "Testing: gradients flow through the upsampling.")


class AdamTestCase(SimpleTestCase):
    """
    Bias-corrected Adam steps and gradient clipping.
    """

    def make_net(self):
        return ParamSet([Dense((2,), 1, rng=np.random.default_rng(8))])

    def constant_grads(self, net, value):
        return Gradients([{k: np.full_like(v, value) for k, v in layer.params.items()} for layer in net.layers])

    def test_zero_gradient_leaves_parameters(self):
        """
        g = 0 gives m = v = 0 and no movement.
        """
        net = self.make_net()
        before = net.layers[0].params['weight'].copy()
        # Testing assertion
        adam_step(net, self.constant_grads(net, 0.0))
        self.assertTrue(np.array_equal(net.layers[0].params['weight'], before), "Testing: weights unchanged.")
        # Postcondition assertion
        self.assertEqual(net.adam.t, 1, "Postcondition: the step still counts.")

    def test_constant_gradient_moves_against_sign(self):
        """
        A positive constant gradient pushes every weight down.
        """
        net = self.make_net()
        before = net.layers[0].params['weight'].copy()
        # Testing assertion
        for _ in range(50):
            adam_step(net, self.constant_grads(net, 2.0), lr=1e-2)
        self.assertTrue(np.all(net.layers[0].params['weight'] < before), "Testing: all weights decreased.")

    def test_one_step_hand_evaluation(self):
        """
        With fresh moments and g = 1: m̂ = 1, v̂ = 1, so Δθ = −lr / (1 + ε).
        """
        net = self.make_net()
        before = net.layers[0].params['weight'].copy()
        # Precondition assertion
        self.assertEqual(net.adam.t, 0, "Precondition: fresh optimizer state.")
        # Testing assertion
        adam_step(net, self.constant_grads(net, 1.0), lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8)
        delta = net.layers[0].params['weight'] - before
        self.assertTrue(np.allclose(delta, -1e-3 / (1.0 + 1e-8), rtol=0, atol=1e-15), "Testing: Δθ = −lr/(1+ε).")
        # Postcondition assertion
        self.assertEqual(net.adam.t, 1, "Postcondition: step counter advanced.")

    def test_nan_gradient_halts(self):
        """
        A NaN gradient stops training instead of poisoning the weights.
        """
        net = self.make_net()
        before = net.layers[0].params['weight'].copy()
        # Testing assertion
        with self.assertRaises(TrainingHalted, msg="Testing: NaN gradient halts."):
            adam_step(net, self.constant_grads(net, float('nan')))
        # Postcondition assertion
        self.assertTrue(np.array_equal(net.layers[0].params['weight'], before), "Postcondition: weights untouched.")

    def test_clip_grad_norm(self):
        """
        Three entries of 3 have norm 3√3; clipping to 1 rescales them.
        """
        net = self.make_net()
        grads = self.constant_grads(net, 3.0)
        # Testing assertion
        clipped, norm = clip_grad_norm([grads], 1.0)
        self.assertAlmostEqual(norm, 3.0 * math.sqrt(3.0), msg="Testing: pre-clip norm reported.")
        total = math.sqrt(sum(float(np.sum(v ** 2)) for _, _, v in clipped[0].items()))
        self.assertAlmostEqual(total, 1.0, places=9, msg="Testing: clipped norm is the cap.")

    def test_half_life_halves_the_step_size(self):
        """
        Step size lr · 0.5 ** (t / half_life); half_life 0 keeps it constant.
        """
        decaying = AdamSettings(lr=1e-2, half_life=10.0)
        # Testing assertion
        self.assertEqual(decaying.step_size(0), 1e-2, "Testing: full step before any update.")
        self.assertAlmostEqual(decaying.step_size(10), 5e-3, places=15, msg="Testing: halved after one half-life.")
        self.assertAlmostEqual(decaying.step_size(30), 1.25e-3, places=15, msg="Testing: eighth after three.")
        self.assertEqual(AdamSettings(lr=1e-2).step_size(1000), 1e-2, "Testing: no half-life, no decay.")

    def test_half_life_applies_to_the_network_step_count(self):
        """
        The second Adam step under half_life 1 moves half as far as the first under g = 1.
        """
        net = self.make_net()
        adam = AdamSettings(lr=1e-3, half_life=1.0)
        start = net.layers[0].params['weight'].copy()
        adam.apply(net, self.constant_grads(net, 1.0))
        middle = net.layers[0].params['weight'].copy()
        adam.apply(net, self.constant_grads(net, 1.0))
        # Testing assertion: with g constant, m̂ = v̂ = 1 at every step
        first, second = middle - start, net.layers[0].params['weight'] - middle
        self.assertTrue(np.allclose(second, 0.5 * first, rtol=1e-6, atol=0), "Testing: second step is half the first.")
        # Postcondition assertion
        self.assertEqual(net.adam.t, 2, "Postcondition: two steps counted.")


class SoftmaxEntropyTestCase(SimpleTestCase):
    """
    Softmax distributions and their entropy in nats.
    """

    def test_symmetric_logits(self):
        """
        Equal logits give the uniform distribution, whatever the constant.
        """
        # Testing assertion
        self.assertTrue(np.allclose(softmax([0.0, 0.0]).probs, [0.5, 0.5], atol=1e-15), "Testing: two actions.")
        for c in (-7.0, 0.0, 3.5, 1e3):
            self.assertTrue(np.allclose(softmax([c] * 4).probs, 0.25, atol=1e-15), f"Testing: four actions at {c}.")

    def test_direct_evaluation(self):
        """
        softmax(1, 0) = (e/(e+1), 1/(e+1)) with entropy ≈ 0.5822.
        """
        dist = softmax([1.0, 0.0])
        e = math.e
        # Testing assertion
        self.assertAlmostEqual(dist[0], e / (e + 1), places=14, msg="Testing: first probability.")
        self.assertAlmostEqual(dist[1], 1 / (e + 1), places=14, msg="Testing: second probability.")
        self.assertAlmostEqual(entropy(dist), 0.5822, places=3, msg="Testing: entropy value.")

    def test_sum_and_shift_invariance(self):
        """
        Probabilities sum to one and ignore a common shift of the logits.
        """
        rng = np.random.default_rng(9)
        for _ in range(200):
            logits = rng.uniform(-20, 20, size=rng.integers(2, 7))
            dist = softmax(logits)
            # Testing assertion
            self.assertLess(abs(dist.probs.sum() - 1.0), 1e-12, "Testing: sums to one.")
            self.assertTrue(np.all(dist.probs > 0), "Testing: strictly positive.")
            shifted = softmax(logits + rng.uniform(-50, 50))
            self.assertTrue(np.allclose(dist.probs, shifted.probs, rtol=0, atol=1e-12), "Testing: shift invariant.")

    def test_entropy_bounds(self):
        """
        Uniform over two actions gives ln 2; a point mass gives 0.
        """
        # Testing assertion
        self.assertAlmostEqual(entropy(PolicyDistribution(np.array([0.5, 0.5]))), math.log(2), places=15,
                               msg="Testing: maximum at uniform.")
        self.assertEqual(entropy(PolicyDistribution(np.array([1.0, 0.0]))), 0.0, "Testing: 0·log 0 counts as 0.")

    def test_two_action_entropy_monotonicity(self):
        """
        H(p, 1−p) rises strictly on (0, 0.5) and falls strictly on (0.5, 1).
        """
        p = np.arange(1, 1000) / 1000.0
        h = entropy_array(np.stack([p, 1.0 - p], axis=1))
        left, right = h[p <= 0.5], h[p >= 0.5]
        # Testing assertion
        self.assertTrue(np.all(np.diff(left) > 0), "Testing: strictly increasing before 0.5.")
        self.assertTrue(np.all(np.diff(right) < 0), "Testing: strictly decreasing after 0.5.")
        self.assertTrue(np.all(h[p != 0.5] < math.log(2)), "Testing: ln 2 only at 0.5.")

    def test_invalid_distribution_rejected(self):
        """
        Probabilities that do not sum to one are rejected.
        """
        # Testing assertion
        with self.assertRaises(ContractViolation, msg="Testing: 0.7 + 0.7 is not a distribution."):
            PolicyDistribution(np.array([0.7, 0.7]))


class CheckpointTestCase(SimpleTestCase):
    """
    npz checkpoints and in-memory snapshots.
    """

    def test_round_trip_preserves_parameters_and_moments(self):
        """
        Saving and loading keeps weights, Adam moments and the step counter.
        """
        rng = np.random.default_rng(10)
        net = ParamSet([
            Conv2D((6, 6, 1), 3, kernel=3, stride=2, padding=1, rng=rng),
            ReLU((3, 3, 3)),
            Flatten((3, 3, 3)),
            Dense((27,), 2, rng=rng),
        ])
        x = rng.normal(size=(4, 6, 6, 1))
        out = net.forward(x)
        adam_step(net, net.backward(out), lr=1e-2)
        # Precondition assertion
        self.assertEqual(net.adam.t, 1, "Precondition: one step taken.")
        # Testing assertion
        with tempfile.TemporaryDirectory() as tmp:
            path = save_checkpoint(net, Path(tmp) / 'net.npz')
            restored = load_checkpoint(path)
        self.assertEqual(restored.adam.t, 1, "Testing: step counter restored.")
        for (_, _, a), (_, _, b) in zip(net.parameters(), restored.parameters()):
            self.assertTrue(np.array_equal(a, b), "Testing: parameters restored bit for bit.")
        # Postcondition assertion
        self.assertTrue(np.array_equal(net.forward(x), restored.forward(x)), "Postcondition: same function.")

    def test_upsample_descriptor_round_trip(self):
        """
        Upsample2D rebuilds from its descriptor with the same target size.
        """
        layer = Upsample2D((3, 3, 4), (5, 5))
        # Testing assertion
        rebuilt = layer_from_descriptor(layer.describe())
        self.assertIsInstance(rebuilt, Upsample2D, "Testing: same kind.")
        self.assertEqual(rebuilt.output_shape, (5, 5, 4), "Testing: same output shape.")

    def test_snapshot_is_independent(self):
        """
        Mutating the live network leaves its snapshot alone.
        """
        net = ParamSet([Dense((2,), 2, rng=np.random.default_rng(11))])
        snap = net.snapshot()
        # Testing assertion
        net.layers[0].params['weight'] += 1.0
        self.assertFalse(np.array_equal(net.layers[0].params['weight'], snap.layers[0].params['weight']),
                         "Testing: snapshot did not move with the live weights.")
