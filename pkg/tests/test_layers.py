import numpy as np
import pytest

from mvsweep.neural import tensor as T
from mvsweep.neural.gradcheck import max_relative_error
from mvsweep.neural.layers import (
    BatchNorm2d,
    Conv2d,
    ConvBlock,
    LayerSpec,
    UpBlock,
    batchnorm2d,
    conv2d,
)
from mvsweep.neural.tensor import Tensor


def leaf(rng, shape, scale=1.0):
    return Tensor(rng.standard_normal(shape) * scale, requires_grad=True)


class TestConvForward:
    def test_matches_direct_convolution(self):
        rng = np.random.default_rng(0)
        x = Tensor(rng.standard_normal((2, 3, 8, 9)))
        w = Tensor(rng.standard_normal((4, 3, 3, 3)))
        b = Tensor(rng.standard_normal(4))
        out = conv2d(x, w, b, stride=1, padding=1)
        # direct sliding-window oracle
        xp = np.pad(x.data, ((0, 0), (0, 0), (1, 1), (1, 1)))
        expected = np.zeros_like(out.data)
        for n in range(2):
            for co in range(4):
                for i in range(8):
                    for j in range(9):
                        patch = xp[n, :, i:i + 3, j:j + 3]
                        expected[n, co, i, j] = np.sum(patch * w.data[co]) + b.data[co]
        np.testing.assert_allclose(out.data, expected, atol=1e-10)

    def test_stride_two_shapes(self):
        rng = np.random.default_rng(1)
        x = Tensor(rng.standard_normal((1, 5, 48, 64)))
        w = Tensor(rng.standard_normal((8, 5, 7, 7)))
        out = conv2d(x, w, None, stride=2, padding=3)
        assert out.data.shape == (1, 8, 24, 32)

    def test_channel_mismatch_rejected(self):
        x = Tensor(np.zeros((1, 3, 8, 8)))
        w = Tensor(np.zeros((2, 4, 3, 3)))
        with pytest.raises(ValueError, match="channels"):
            conv2d(x, w)


class TestConvGradients:
    def test_conv_gradient_small_input(self):
        rng = np.random.default_rng(2)
        x = leaf(rng, (1, 2, 6, 6))
        w = leaf(rng, (3, 2, 3, 3), scale=0.5)
        b = leaf(rng, (3,), scale=0.2)

        def fn(xx, ww, bb):
            out = conv2d(xx, ww, bb, stride=1, padding=1)
            return T.tsum(T.mul(out, out))

        assert max_relative_error(fn, [x, w, b]) < 1e-4

    @pytest.mark.parametrize("stride,kernel", [(1, 3), (2, 3), (2, 5), (2, 7)])
    def test_conv_gradient_randomized_shapes(self, stride, kernel):
        rng = np.random.default_rng(stride * 10 + kernel)
        for _ in range(3):
            cin = int(rng.integers(1, 4))
            cout = int(rng.integers(1, 4))
            h = int(rng.integers(kernel, kernel + 6))
            w = int(rng.integers(kernel, kernel + 6))
            x = leaf(rng, (1, cin, h, w))
            wt = leaf(rng, (cout, cin, kernel, kernel), scale=0.5)
            b = leaf(rng, (cout,), scale=0.2)

            def fn(xx, ww, bb):
                out = conv2d(xx, ww, bb, stride=stride, padding=kernel // 2)
                return T.tsum(T.sigmoid(out))

            err = max_relative_error(fn, [x, wt, b])
            assert err < 1e-4, f"stride={stride} k={kernel}: {err}"


class TestBatchNorm:
    def test_training_output_is_normalized(self):
        rng = np.random.default_rng(3)
        x = Tensor(rng.standard_normal((4, 3, 5, 5)) * 3 + 1)
        gamma = Tensor(np.ones(3))
        beta = Tensor(np.zeros(3))
        rm, rv = np.zeros(3), np.ones(3)
        out = batchnorm2d(x, gamma, beta, rm, rv, training=True)
        np.testing.assert_allclose(out.data.mean(axis=(0, 2, 3)), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.data.var(axis=(0, 2, 3)), 1.0, atol=1e-4)

    def test_running_stats_update(self):
        rng = np.random.default_rng(4)
        x = Tensor(rng.standard_normal((4, 2, 6, 6)) + 5.0)
        bn = BatchNorm2d(2, dtype=np.float64)
        bn(x, training=True)
        expected_mean = 0.1 * x.data.mean(axis=(0, 2, 3))
        np.testing.assert_allclose(bn.running_mean, expected_mean, rtol=1e-6)

    def test_eval_mode_uses_running_stats(self):
        x = Tensor(np.full((1, 1, 2, 2), 3.0))
        gamma, beta = Tensor(np.array([2.0])), Tensor(np.array([1.0]))
        rm, rv = np.array([1.0]), np.array([4.0])
        out = batchnorm2d(x, gamma, beta, rm, rv, training=False, eps=0.0)
        np.testing.assert_allclose(out.data, 2.0 * (3.0 - 1.0) / 2.0 + 1.0)

    def test_batchnorm_gradient_batch_four(self):
        rng = np.random.default_rng(5)
        x = leaf(rng, (4, 2, 3, 3))
        gamma = Tensor(rng.uniform(0.5, 1.5, size=2), requires_grad=True)
        beta = Tensor(rng.uniform(-0.5, 0.5, size=2), requires_grad=True)

        def fn(xx, gg, bb):
            rm, rv = np.zeros(2), np.ones(2)
            out = batchnorm2d(xx, gg, bb, rm, rv, training=True)
            return T.tsum(T.sigmoid(out))

        err = max_relative_error(fn, [x, gamma, beta])
        assert err < 1e-3

    def test_batchnorm_gradient_randomized(self):
        rng = np.random.default_rng(6)
        for trial in range(5):
            c = int(rng.integers(1, 4))
            x = leaf(rng, (int(rng.integers(2, 5)), c, 4, 4))
            gamma = Tensor(rng.uniform(0.5, 1.5, size=c), requires_grad=True)
            beta = Tensor(rng.uniform(-0.5, 0.5, size=c), requires_grad=True)

            def fn(xx, gg, bb):
                out = batchnorm2d(xx, gg, bb, np.zeros(c), np.ones(c), training=True)
                return T.tmean(T.mul(out, T.sigmoid(out)))

            err = max_relative_error(fn, [x, gamma, beta])
            assert err < 1e-3, f"trial {trial}: {err}"

    def test_eval_mode_gradient(self):
        rng = np.random.default_rng(7)
        x = leaf(rng, (2, 2, 3, 3))
        gamma = Tensor(rng.uniform(0.5, 1.5, size=2), requires_grad=True)
        beta = Tensor(np.zeros(2), requires_grad=True)
        rm = rng.uniform(-1, 1, size=2)
        rv = rng.uniform(0.5, 2.0, size=2)

        def fn(xx, gg, bb):
            out = batchnorm2d(xx, gg, bb, rm, rv, training=False)
            return T.tsum(T.mul(out, out))

        assert max_relative_error(fn, [x, gamma, beta]) < 1e-4


class TestLayerContainers:
    def test_layer_spec_validation(self):
        with pytest.raises(ValueError, match="odd"):
            LayerSpec("conv", kernel=4, stride=1)
        with pytest.raises(ValueError, match="stride"):
            LayerSpec("conv", kernel=3, stride=3)
        with pytest.raises(ValueError, match="kind"):
            LayerSpec("pool5")

    def test_conv_block_parameter_names(self):
        rng = np.random.default_rng(8)
        block = ConvBlock(3, 8, 3, 2, rng)
        names = set(block.parameters())
        assert names == {"conv.weight", "conv.bias", "bn.gamma", "bn.beta"}
        assert set(block.buffers()) == {"bn.running_mean", "bn.running_var"}

    def test_upblock_doubles_resolution(self):
        rng = np.random.default_rng(9)
        block = UpBlock(4, 2, rng, dtype=np.float64)
        x = Tensor(rng.standard_normal((1, 4, 3, 5)))
        out = block(x, training=True)
        assert out.data.shape == (1, 2, 6, 10)

    def test_zero_init_head_outputs_zero(self):
        rng = np.random.default_rng(10)
        head = Conv2d(4, 2, 3, rng=rng, zero_init=True)
        x = Tensor(rng.standard_normal((2, 4, 6, 6)))
        out = head(x)
        np.testing.assert_array_equal(out.data, 0.0)
