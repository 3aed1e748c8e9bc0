import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdgzsl.gradcheck import check_gradients, finite_difference, max_relative_error
from cdgzsl.nets import (
    AdamState,
    FeedForwardNet,
    Layer,
    adam_init,
    adam_step,
    grad_norm_penalty,
    input_gradient,
    load_checkpoint,
    save_checkpoint,
    softmax_cross_entropy,
    softmax_with_temperature,
)


def identity_layer(n):
    return Layer(np.eye(n), np.zeros(n), "identity")


class TestForward:
    def test_identity_net_passthrough(self, rng):
        net = FeedForwardNet([identity_layer(4)])
        x = rng.standard_normal((6, 4)).astype(np.float32)
        out, _ = net.forward(x)
        assert np.array_equal(out, x)

    def test_softmax_symmetry(self):
        net = FeedForwardNet([Layer(np.eye(2), np.zeros(2), "softmax")])
        out, _ = net.forward(np.zeros((1, 2)))
        assert np.allclose(out, [[0.5, 0.5]])

    def test_matches_reference_forward(self, rng):
        # independent oracle: explicit matmul chain written out here
        w1 = rng.standard_normal((5, 7))
        b1 = rng.standard_normal(7)
        w2 = rng.standard_normal((7, 3))
        b2 = rng.standard_normal(3)
        net = FeedForwardNet(
            [Layer(w1, b1, "tanh"), Layer(w2, b2, "identity")], dtype=np.float64
        )
        x = rng.standard_normal((9, 5))
        expected = np.tanh(x @ w1 + b1) @ w2 + b2
        out, _ = net.forward(x)
        assert np.allclose(out, expected, atol=1e-6)

    def test_softmax_rows_sum_to_one(self, rng):
        net = FeedForwardNet.create([4, 6, 3], ["relu", "softmax"], rng)
        out, _ = net.forward(rng.standard_normal((20, 4)).astype(np.float32))
        assert np.allclose(out.sum(axis=1), 1.0, atol=1e-6)

    def test_dimension_mismatch(self, rng):
        net = FeedForwardNet.create([4, 3], ["identity"], rng)
        with pytest.raises(ValueError, match="does not match input dim"):
            net.forward(np.zeros((2, 5)))

    def test_softmax_only_final(self):
        with pytest.raises(ValueError, match="softmax"):
            FeedForwardNet(
                [Layer(np.eye(2), np.zeros(2), "softmax"), identity_layer(2)]
            )

    def test_chaining_validated(self):
        with pytest.raises(ValueError, match="chain"):
            FeedForwardNet(
                [Layer(np.zeros((3, 4)), np.zeros(4), "relu"),
                 Layer(np.zeros((5, 2)), np.zeros(2), "identity")]
            )


class TestBackward:
    def test_linear_squared_error_closed_form(self, rng):
        # single linear layer, one sample: dL/dW = 2 (pred - target) x^T
        w = rng.standard_normal((3, 2))
        net = FeedForwardNet([Layer(w, np.zeros(2), "identity")], dtype=np.float64)
        x = rng.standard_normal((1, 3))
        target = rng.standard_normal((1, 2))
        pred, cache = net.forward(x)
        grads, _ = net.backward(cache, 2.0 * (pred - target))
        assert np.allclose(grads[0], 2.0 * x.T @ (pred - target))
        assert np.allclose(grads[1], (2.0 * (pred - target)).ravel())

    @pytest.mark.parametrize("acts", [["tanh", "identity"], ["relu", "identity"], ["tanh", "softmax"]])
    def test_matches_finite_differences(self, acts, rng):
        net = FeedForwardNet.create([4, 5, 3], acts, rng, dtype=np.float64)
        x = rng.standard_normal((6, 4))
        target = rng.standard_normal((6, 3))

        def loss():
            out, _ = net.forward(x)
            return float(((out - target) ** 2).mean())

        out, cache = net.forward(x)
        grads, _ = net.backward(cache, 2.0 * (out - target) / out.size)
        report = check_gradients(loss, net.parameters(), grads)
        assert report.passed, report.per_param

    def test_zero_out_grad_gives_zero_grads(self, rng):
        net = FeedForwardNet.create([3, 4, 2], ["tanh", "identity"], rng)
        out, cache = net.forward(rng.standard_normal((5, 3)).astype(np.float32))
        grads, g_in = net.backward(cache, np.zeros_like(out))
        assert all(not g.any() for g in grads)
        assert not g_in.any()

    def test_stale_cache_rejected(self, rng):
        net1 = FeedForwardNet.create([3, 2], ["identity"], rng)
        net2 = FeedForwardNet.create([3, 2], ["identity"], rng)
        out, cache = net1.forward(np.zeros((1, 3)))
        with pytest.raises(ValueError, match="cache"):
            net2.backward(cache, out)

    def test_out_grad_shape_checked(self, rng):
        net = FeedForwardNet.create([3, 2], ["identity"], rng)
        _, cache = net.forward(np.zeros((4, 3)))
        with pytest.raises(ValueError, match="out_grad"):
            net.backward(cache, np.zeros((3, 2)))


class TestSoftmaxTemperature:
    def test_symmetric_logits(self):
        assert np.allclose(softmax_with_temperature(np.zeros((1, 2)), 3.0), 0.5)

    def test_hand_computed_value(self):
        # softmax([2,0]/5) = e^0.4 / (e^0.4 + 1) on the first entry
        out = softmax_with_temperature(np.array([[2.0, 0.0]]), 5.0)
        expected = np.exp(0.4) / (np.exp(0.4) + 1.0)
        assert abs(out[0, 0] - expected) < 1e-7
        assert np.allclose(out, [[0.5987, 0.4013]], atol=1e-4)

    def test_high_temperature_limit(self, rng):
        logits = rng.standard_normal((4, 6))
        out = softmax_with_temperature(logits, 1e6)
        assert np.allclose(out, 1.0 / 6.0, atol=1e-3)

    def test_rejects_nonpositive_temperature(self):
        for t in (0.0, -1.0):
            with pytest.raises(ValueError, match="temperature"):
                softmax_with_temperature(np.zeros((1, 2)), t)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.floats(0.01, 100.0))
    def test_rows_sum_to_one_property(self, seed, temperature):
        logits = np.random.default_rng(seed).uniform(-50, 50, size=(5, 7))
        out = softmax_with_temperature(logits, temperature)
        assert np.all(out >= 0)
        assert np.allclose(out.sum(axis=1), 1.0, atol=1e-6)


class TestCrossEntropy:
    def test_uniform_logits(self):
        loss, grad = softmax_cross_entropy(np.zeros((4, 3)), np.array([0, 1, 2, 0]))
        assert abs(loss - np.log(3.0)) < 1e-12
        assert grad.shape == (4, 3)

    def test_gradient_matches_fd(self, rng):
        logits = rng.standard_normal((5, 4))
        labels = rng.integers(4, size=5)
        _, grad = softmax_cross_entropy(logits, labels)
        fd = finite_difference(lambda: softmax_cross_entropy(logits, labels)[0], [logits])
        assert max_relative_error(grad, fd[0]) < 1e-6


class TestAdam:
    def test_zero_gradient_keeps_params(self, rng):
        net = FeedForwardNet.create([3, 2], ["identity"], rng)
        params = net.parameters()
        before = [p.copy() for p in params]
        state = adam_init(params, learning_rate=0.1)
        adam_step(params, [np.zeros_like(p) for p in params], state)
        assert state.step == 1
        assert all(np.array_equal(a, b) for a, b in zip(params, before))

    def test_constant_gradient_descends(self):
        p = np.array([0.0, 0.0])
        g = np.array([1.0, -2.0])
        state = adam_init([p], learning_rate=0.01)
        for _ in range(50):
            adam_step([p], [g], state)
        assert p[0] < 0 and p[1] > 0

    def test_single_step_hand_computed(self):
        # from zeroed moments: m_hat = g, v_hat = g^2, so
        # delta = -lr * g / (|g| + eps * sqrt(1 - beta2))
        p = np.array([1.0, -3.0])
        g = np.array([0.5, 2.0])
        lr = 0.01
        state = adam_init([p], learning_rate=lr)
        adam_step([p], [g], state)
        lr_t = lr * np.sqrt(1 - 0.999) / (1 - 0.9)
        m = 0.1 * g
        v = 0.001 * g * g
        expected = np.array([1.0, -3.0]) - lr_t * m / (np.sqrt(v) + 1e-8)
        assert np.allclose(p, expected, rtol=1e-12)

    def test_shape_mismatch(self):
        p = np.zeros(3)
        state = adam_init([p], 0.1)
        with pytest.raises(ValueError, match="shape"):
            adam_step([p], [np.zeros(4)], state)

    def test_state_shapes_mirror_params(self, rng):
        net = FeedForwardNet.create([4, 5, 2], ["relu", "identity"], rng)
        state = adam_init(net.parameters(), 1e-3)
        assert isinstance(state, AdamState)
        for p, m, v in zip(net.parameters(), state.m, state.v):
            assert m.shape == p.shape and v.shape == p.shape


class TestGradNormPenalty:
    def test_unit_norm_linear_critic_is_zero(self):
        w = np.zeros((5, 1))
        w[0, 0] = 1.0  # unit-norm gradient on the first 3 "feature" columns
        net = FeedForwardNet([Layer(w, np.zeros(1), "identity")])
        value, grads = grad_norm_penalty(net, np.random.default_rng(0).standard_normal((8, 5)).astype(np.float32), norm_cols=3)
        assert value == 0.0

    def test_input_gradient_linear(self, rng):
        w = rng.standard_normal((4, 1))
        net = FeedForwardNet([Layer(w, np.zeros(1), "identity")], dtype=np.float64)
        g = input_gradient(net, rng.standard_normal((6, 4)))
        assert np.allclose(g, np.tile(w.ravel(), (6, 1)))

    @pytest.mark.parametrize("norm_cols", [None, 3])
    def test_parameter_gradient_matches_fd(self, norm_cols, rng):
        net = FeedForwardNet.create([5, 6, 1], ["tanh", "identity"], rng, dtype=np.float64)
        x = rng.standard_normal((7, 5))
        value, grads = grad_norm_penalty(net, x, norm_cols=norm_cols)
        report = check_gradients(
            lambda: grad_norm_penalty(net, x, norm_cols=norm_cols)[0],
            net.parameters(), grads, tolerance=1e-3,
        )
        assert report.passed, report.per_param

    def test_requires_scalar_output(self, rng):
        net = FeedForwardNet.create([4, 3], ["identity"], rng)
        with pytest.raises(ValueError, match="scalar"):
            grad_norm_penalty(net, np.zeros((2, 4)))


class TestCheckpoint:
    def test_roundtrip_bit_exact(self, tmp_path, rng):
        net = FeedForwardNet.create([6, 5, 2], ["tanh", "softmax"], rng)
        path = tmp_path / "net.ckpt"
        save_checkpoint(path, net)
        back = load_checkpoint(path)
        assert len(back.layers) == len(net.layers)
        for a, b in zip(back.layers, net.layers):
            assert a.activation == b.activation
            assert np.array_equal(a.weights, b.weights)
            assert np.array_equal(a.bias, b.bias)

    def test_rejects_other_files(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b'{"format": "other"}\n')
        with pytest.raises(ValueError, match="not a network checkpoint"):
            load_checkpoint(path)
