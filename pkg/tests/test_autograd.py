import numpy as np
import pytest

from atat import autograd as A
from atat.autograd import Tensor
from atat.errors import InvalidBatch, ShapeError

RNG = np.random.default_rng


def t64(x, grad=True):
    return Tensor(np.asarray(x, dtype=np.float64), requires_grad=grad)


# -- naive oracles -------------------------------------------------------------

def conv1d_oracle(x, w, b):
    B, C, L = x.shape
    O, _, K = w.shape
    p = K // 2
    out = np.zeros((B, O, L))
    for bi in range(B):
        for o in range(O):
            for l in range(L):
                acc = b[o]
                for c in range(C):
                    for k in range(K):
                        j = l + k - p
                        if 0 <= j < L:
                            acc += w[o, c, k] * x[bi, c, j]
                out[bi, o, l] = acc
    return out


def conv2d_oracle(x, w, b):
    B, C, H, W = x.shape
    O, _, KH, KW = w.shape
    out = np.zeros((B, O, H, W))
    for bi in range(B):
        for o in range(O):
            for i in range(H):
                for j in range(W):
                    acc = b[o]
                    for c in range(C):
                        for u in range(KH):
                            for v in range(KW):
                                ii, jj = i + u - KH // 2, j + v - KW // 2
                                if 0 <= ii < H and 0 <= jj < W:
                                    acc += w[o, c, u, v] * x[bi, c, ii, jj]
                    out[bi, o, i, j] = acc
    return out


def sig(z):
    return 1.0 / (1.0 + np.exp(-z))


class TestConv:
    def test_zero_input_zero_output(self):
        w = t64(RNG(0).standard_normal((4, 2, 3)))
        out = A.conv1d(t64(np.zeros((1, 2, 8))), w, t64(np.zeros(4)))
        assert np.all(out.data == 0)

    def test_identity_kernel(self):
        x = RNG(1).standard_normal((1, 1, 16))
        out = A.conv1d(t64(x), t64([[[0.0, 1.0, 0.0]]]), t64([0.0]))
        np.testing.assert_array_equal(out.data, x)

    def test_matches_sliding_dot_oracle(self):
        rng = RNG(2)
        x, w, b = rng.standard_normal((1, 1, 8)), rng.standard_normal((1, 1, 3)), rng.standard_normal(1)
        np.testing.assert_allclose(A.conv1d(t64(x), t64(w), t64(b)).data, conv1d_oracle(x, w, b), atol=1e-12)

    def test_multichannel_oracle(self):
        rng = RNG(3)
        x, w, b = rng.standard_normal((2, 3, 10)), rng.standard_normal((4, 3, 5)), rng.standard_normal(4)
        np.testing.assert_allclose(A.conv1d(t64(x), t64(w), t64(b)).data, conv1d_oracle(x, w, b), atol=1e-12)

    def test_shape_errors(self):
        with pytest.raises(ShapeError):
            A.conv1d(t64(np.zeros((1, 2, 8))), t64(np.zeros((1, 3, 3))))
        with pytest.raises(ShapeError):
            A.conv1d(t64(np.zeros((1, 1, 8))), t64(np.zeros((1, 1, 4))))

    def test_conv2d_zero_and_identity(self):
        x = RNG(4).standard_normal((1, 1, 4, 4))
        k = np.zeros((1, 1, 3, 3))
        k[0, 0, 1, 1] = 1.0
        np.testing.assert_array_equal(A.conv2d(t64(x), t64(k), t64([0.0])).data, x)
        assert np.all(A.conv2d(t64(np.zeros((1, 1, 4, 4))), t64(RNG(5).standard_normal((2, 1, 3, 3))),
                               t64(np.zeros(2))).data == 0)

    def test_conv2d_oracle(self):
        rng = RNG(6)
        x, w, b = rng.standard_normal((1, 1, 4, 4)), rng.standard_normal((2, 1, 3, 3)), rng.standard_normal(2)
        np.testing.assert_allclose(A.conv2d(t64(x), t64(w), t64(b)).data, conv2d_oracle(x, w, b), atol=1e-12)


class TestPooling:
    def test_maxpool_hand_value(self):
        out = A.maxpool1d(t64([[[1.0, 3.0, 2.0, 2.0]]]))
        np.testing.assert_array_equal(out.data, [[[3.0, 2.0]]])

    def test_maxpool_tie_routes_to_first(self):
        x = t64([[[2.0, 2.0]]])
        A.maxpool1d(x).sum().backward()
        np.testing.assert_array_equal(x.grad, [[[1.0, 0.0]]])

    def test_upsample_definition(self):
        np.testing.assert_array_equal(A.upsample1d(t64([[[5.0, 7.0]]])).data, [[[5, 5, 7, 7]]])

    def test_factor_algebra(self):
        x = t64(RNG(0).standard_normal((2, 3, 12)))
        assert A.upsample1d(A.maxpool1d(x)).shape == x.shape

    def test_odd_length_rejected(self):
        with pytest.raises(ShapeError):
            A.maxpool1d(t64(np.zeros((1, 1, 5))))

    def test_maxpool2d(self):
        x = np.arange(16.0).reshape(1, 1, 4, 4)
        np.testing.assert_array_equal(A.maxpool2d(t64(x)).data, [[[[5, 7], [13, 15]]]])


class TestBatchNorm:
    def _bn(self, x, training=True, eps=1e-5):
        C = x.shape[1]
        rm, rv = np.zeros(C), np.ones(C)
        return A.batchnorm(t64(x), t64(np.ones(C)), t64(np.zeros(C)), rm, rv, training, 0.9, eps), rm, rv

    def test_standard_batch_passes_through(self):
        x = np.array([[[-1.0]], [[1.0]]])  # mean 0, var 1
        out, _, _ = self._bn(x)
        np.testing.assert_allclose(out.data, x, atol=1e-5)

    def test_constant_feature_gives_beta(self):
        x = np.full((4, 2, 3), 7.0)
        C = 2
        out = A.batchnorm(t64(x), t64(np.ones(C)), t64([0.5, -1.0]), np.zeros(C), np.ones(C), True)
        np.testing.assert_allclose(out.data[:, 0], 0.5)
        np.testing.assert_allclose(out.data[:, 1], -1.0)

    def test_output_moments(self):
        x = RNG(0).normal(3.0, 2.0, size=(8, 4, 16))
        out, _, _ = self._bn(x, eps=1e-12)
        np.testing.assert_allclose(out.data.mean(axis=(0, 2)), 0.0, atol=1e-6)
        np.testing.assert_allclose(out.data.var(axis=(0, 2)), 1.0, atol=1e-6)

    def test_running_stats_ema(self):
        x = RNG(1).normal(2.0, 3.0, size=(5, 1, 10))
        _, rm, rv = self._bn(x)
        n = 50
        np.testing.assert_allclose(rm, 0.1 * x.mean())
        np.testing.assert_allclose(rv, 0.9 + 0.1 * x.var() * n / (n - 1))

    def test_infer_uses_running_stats(self):
        x = RNG(2).standard_normal((3, 2, 4))
        out = A.batchnorm(t64(x), t64(np.ones(2)), t64(np.zeros(2)), np.array([1.0, -1.0]),
                          np.array([4.0, 0.25]), False, eps=0.0)
        np.testing.assert_allclose(out.data[:, 0], (x[:, 0] - 1.0) / 2.0)
        np.testing.assert_allclose(out.data[:, 1], (x[:, 1] + 1.0) / 0.5)

    def test_batch_of_one_rejected(self):
        with pytest.raises(InvalidBatch):
            self._bn(np.zeros((1, 2, 4)))


class TestActivations:
    def test_values(self):
        np.testing.assert_array_equal(A.relu(t64([-2.0, 3.0])).data, [0.0, 3.0])
        assert A.sigmoid(t64(0.0)).item() == 0.5
        np.testing.assert_allclose(A.leaky_relu(t64([-1.0, 2.0]), 0.2).data, [-0.2, 2.0])
        np.testing.assert_allclose(A.tanh(t64([0.3])).data, np.tanh([0.3]))

    def test_softmax_stable(self):
        np.testing.assert_array_equal(A.softmax(t64([1000.0, 1000.0])).data, [0.5, 0.5])

    def test_softmax_rows_sum_to_one(self):
        out = A.softmax(t64(RNG(0).normal(0, 30, size=(50, 7))), axis=-1)
        np.testing.assert_allclose(out.data.sum(-1), 1.0, atol=1e-9)


class TestDense:
    def test_identity_and_zero(self):
        x = RNG(0).standard_normal((4, 3))
        np.testing.assert_array_equal(A.dense(t64(x), t64(np.eye(3)), t64(np.zeros(3))).data, x)
        b = np.array([1.0, 2.0])
        np.testing.assert_array_equal(A.dense(t64(x), t64(np.zeros((3, 2))), t64(b)).data, np.tile(b, (4, 1)))

    def test_hand_matmul(self):
        rng = RNG(1)
        x, w, b = rng.standard_normal((5, 2)), rng.standard_normal((2, 3)), rng.standard_normal(3)
        expect = np.array([[sum(x[i, k] * w[k, j] for k in range(2)) + b[j] for j in range(3)] for i in range(5)])
        np.testing.assert_allclose(A.dense(t64(x), t64(w), t64(b)).data, expect, atol=1e-12)


class TestLSTM:
    def test_zero_parameters_zero_output(self):
        H = 3
        out = A.lstm(t64(RNG(0).standard_normal((2, 5, 4))), t64(np.zeros((4, 4 * H))),
                     t64(np.zeros((H, 4 * H))), t64(np.zeros(4 * H)))
        assert np.all(out.data == 0)

    def test_single_step_gate_equations(self):
        rng = RNG(1)
        F_, H = 3, 2
        x = rng.standard_normal((1, 1, F_))
        wi, wh, b = rng.standard_normal((F_, 4 * H)), rng.standard_normal((H, 4 * H)), rng.standard_normal(4 * H)
        z = x[0, 0] @ wi + b
        i, f, g, o = sig(z[:H]), sig(z[H:2 * H]), np.tanh(z[2 * H:3 * H]), sig(z[3 * H:])
        c = i * g  # previous cell state is zero
        expect = o * np.tanh(c)
        out = A.lstm(t64(x), t64(wi), t64(wh), t64(b))
        np.testing.assert_allclose(out.data[0, 0], expect, atol=1e-9)

    def test_sequence_length(self):
        layer = A.LSTM(2, 4, RNG(0))
        assert layer(Tensor(np.zeros((3, 7, 2), np.float32))).shape == (3, 7, 4)
        assert layer(Tensor(np.zeros((3, 7, 2), np.float32)), return_sequence=False).shape == (3, 4)


def attention_oracle(x, mha):
    q = x @ mha.query.weight.data + mha.query.bias.data
    k = x @ mha.key.weight.data + mha.key.bias.data
    v = x @ mha.value.weight.data + mha.value.bias.data
    s = q @ k.T / np.sqrt(q.shape[1])
    s = np.exp(s - s.max(1, keepdims=True))
    s /= s.sum(1, keepdims=True)
    return (s @ v) @ mha.out.weight.data + mha.out.bias.data


class TestAttention:
    def test_single_token(self):
        mha = A.MultiHeadSelfAttention(8, 4, RNG(0)).astype(np.float64)
        x = RNG(1).standard_normal((1, 1, 8))
        out = mha(t64(x))
        np.testing.assert_array_equal(mha.last_weights, np.ones((1, 4, 1, 1)))
        v = x[0] @ mha.value.weight.data + mha.value.bias.data
        np.testing.assert_allclose(out.data[0], v @ mha.out.weight.data + mha.out.bias.data, atol=1e-12)

    def test_identical_tokens(self):
        mha = A.MultiHeadSelfAttention(8, 4, RNG(2)).astype(np.float64)
        x = np.tile(RNG(3).standard_normal(8), (1, 5, 1))
        out = mha(t64(x)).data[0]
        np.testing.assert_allclose(out, np.tile(out[0], (5, 1)), atol=1e-12)

    def test_brute_force_one_head(self):
        mha = A.MultiHeadSelfAttention(4, 1, RNG(4)).astype(np.float64)
        x = RNG(5).standard_normal((1, 3, 4))
        np.testing.assert_allclose(mha(t64(x)).data[0], attention_oracle(x[0], mha), atol=1e-9)

    def test_rows_sum_to_one(self):
        mha = A.MultiHeadSelfAttention(16, 4, RNG(6)).astype(np.float64)
        mha(t64(RNG(7).normal(0, 5, size=(2, 30, 16))))
        np.testing.assert_allclose(mha.last_weights.sum(-1), 1.0, atol=1e-9)

    def test_heads_must_divide(self):
        with pytest.raises(ShapeError):
            A.MultiHeadSelfAttention(10, 4, RNG(0))


class TestTransformerLayer:
    def test_shape(self):
        layer = A.TransformerEncoderLayer(16, 4, 128, RNG(0))
        assert layer(Tensor(np.zeros((2, 12, 16), np.float32))).shape == (2, 12, 16)

    def test_layernorm_moments(self):
        x = RNG(1).normal(4, 3, size=(3, 5, 16))
        out = A.layer_norm(t64(x), t64(np.ones(16)), t64(np.zeros(16)), eps=1e-12)
        np.testing.assert_allclose(out.data.mean(-1), 0, atol=1e-6)
        np.testing.assert_allclose(out.data.var(-1), 1, atol=1e-6)

    def test_zero_sublayers_reduce_to_layer_norm(self):
        layer = A.TransformerEncoderLayer(8, 4, 32, RNG(2)).astype(np.float64)
        for name, p in layer.named_parameters():
            if not name.startswith("norm"):
                p.data[...] = 0.0
        x = RNG(3).normal(1, 2, size=(1, 6, 8))
        xhat = (x - x.mean(-1, keepdims=True)) / np.sqrt(x.var(-1, keepdims=True) + 1e-5)
        # second norm re-normalizes an already normalized row: only eps differs
        np.testing.assert_allclose(layer(t64(x)).data, xhat, atol=1e-4)


class TestLosses:
    def test_bce_half(self):
        assert A.bce(t64(0.5), 1.0).item() == pytest.approx(np.log(2))

    def test_bce_clamped(self):
        assert np.isfinite(A.bce(t64([0.0, 1.0]), [1.0, 0.0]).item())

    def test_cc_loss_extremes(self):
        x = RNG(0).standard_normal((1, 20))
        assert A.cc_loss(t64(x), x).item() == pytest.approx(0.0, abs=1e-12)
        assert A.cc_loss(t64(x), -x).item() == pytest.approx(2.0, abs=1e-12)

    def test_cc_loss_constant_rejected(self):
        from atat.errors import DegenerateSegment
        with pytest.raises(DegenerateSegment):
            A.cc_loss(t64(np.ones((1, 5))), np.arange(5.0)[None])

    def test_cross_entropy(self):
        logits = np.array([[2.0, 0.0], [0.0, 1.0]])
        expect = -np.mean([np.log(np.exp(2) / (np.exp(2) + 1)), np.log(np.e / (1 + np.e))])
        assert A.cross_entropy(t64(logits), [0, 1]).item() == pytest.approx(expect)


class TestAdam:
    def test_zero_gradient_no_change(self):
        p = np.array([1.0, -2.0])
        st = A.AdamState(lr=0.1)
        A.adam_step([p], [np.zeros(2)], st)
        np.testing.assert_array_equal(p, [1.0, -2.0])
        assert st.step == 1

    def test_first_step_is_signed_lr(self):
        p = np.zeros(3)
        g = np.array([0.3, -5.0, 1e-3])
        A.adam_step([p], [g], A.AdamState(lr=1e-4, eps=1e-12))
        np.testing.assert_allclose(p, -1e-4 * np.sign(g), rtol=1e-6)

    def test_two_steps_hand_iterated(self):
        lr, b1, b2, eps = 1e-2, 0.9, 0.999, 1e-7
        g = np.array([0.5, -1.5])
        p = np.array([1.0, 1.0])
        A_state = A.AdamState(lr, b1, b2, eps)
        A.adam_step([p], [g], A_state)
        A.adam_step([p], [g], A_state)
        ref = np.array([1.0, 1.0])
        m = v = np.zeros(2)
        for t in (1, 2):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g ** 2
            ref = ref - lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
        np.testing.assert_allclose(p, ref, rtol=0, atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            A.adam_step([np.zeros(2)], [np.zeros(3)], A.AdamState())


class TestDropout:
    def test_infer_identity(self):
        x = Tensor(np.ones(10))
        assert A.dropout(x, 0.3, RNG(0), training=False) is x

    def test_train_preserves_expectation(self):
        x = Tensor(np.ones(10_000))
        out = A.dropout(x, 0.3, RNG(0), training=True)
        assert abs(out.data.mean() - 1.0) < 0.02


class TestEngine:
    def test_shared_subexpression_accumulates(self):
        x = t64([2.0])
        y = x * x + x
        y.sum().backward()
        np.testing.assert_allclose(x.grad, [5.0])

    def test_broadcast_grad(self):
        x, b = t64(np.ones((3, 2))), t64(np.zeros(2))
        (x + b).sum().backward()
        np.testing.assert_array_equal(b.grad, [3.0, 3.0])

    def test_no_grad(self):
        x = t64([1.0])
        with A.no_grad():
            y = x * 2
        assert not y.requires_grad

    def test_forward_deterministic(self):
        layer = A.TransformerEncoderLayer(16, 4, 128, RNG(0))
        x = Tensor(RNG(1).standard_normal((2, 20, 16)).astype(np.float32))
        assert layer(x).data.tobytes() == layer(x).data.tobytes()

    def test_parameter_counts(self):
        assert A.Dense(16, 1, RNG(0)).num_parameters() == 17
        assert A.Conv1d(32, 64, 3, RNG(0)).num_parameters() == 64 * 32 * 3 + 64
        assert A.LSTM(16, 32, RNG(0)).num_parameters() == 4 * 32 * (16 + 32 + 1)
        assert A.MultiHeadSelfAttention(16, 4, RNG(0)).num_parameters() == 4 * (16 * 16 + 16)
        assert A.TransformerEncoderLayer(16, 4, 128, RNG(0)).num_parameters() == (
            4 * 272 + 2 * 32 + (16 * 128 + 128) + (128 * 16 + 16))
