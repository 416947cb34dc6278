import numpy as np
import pytest

from mvsweep.neural.losses import bce_mask_loss
from mvsweep.neural.networks import DispNet, MaskNet, NetworkConfig
from mvsweep.neural.tensor import Tensor, no_grad


def config(planes=16, h=48, w=64, base=4):
    return NetworkConfig(planes=planes, base_channels=base, input_height=h, input_width=w)


class TestMaskNetForward:
    def test_output_scales_and_range(self):
        cfg = config()
        net = MaskNet(cfg, seed=1)
        rng = np.random.default_rng(0)
        volume = Tensor(rng.random((2, cfg.volume_channels, 48, 64)).astype(np.float32))
        with no_grad():
            outputs = net.forward(volume, training=True)
        shapes = [tuple(o.data.shape) for o in outputs]
        assert shapes == [(2, 16, 6, 8), (2, 16, 12, 16), (2, 16, 24, 32), (2, 16, 48, 64)]
        for out in outputs:
            assert out.data.min() > 0.0
            assert out.data.max() < 1.0

    def test_zero_init_heads_output_half(self):
        cfg = config()
        net = MaskNet(cfg, seed=2)
        volume = Tensor(np.zeros((1, cfg.volume_channels, 48, 64), dtype=np.float32))
        with no_grad():
            outputs = net.forward(volume, training=True)
        for out in outputs:
            np.testing.assert_array_equal(out.data, 0.5)

    def test_random_input_still_gives_half_before_training(self):
        # prediction heads are zero-initialized, so features cannot leak through
        cfg = config()
        net = MaskNet(cfg, seed=3)
        rng = np.random.default_rng(5)
        volume = Tensor(rng.random((1, cfg.volume_channels, 48, 64)).astype(np.float32))
        with no_grad():
            outputs = net.forward(volume, training=True)
        for out in outputs:
            np.testing.assert_array_equal(out.data, 0.5)

    def test_channel_mismatch_rejected(self):
        net = MaskNet(config(), seed=0)
        bad = Tensor(np.zeros((1, 30, 48, 64), dtype=np.float32))
        with pytest.raises(ValueError, match="channels"):
            net.forward(bad)

    def test_seed_determinism(self):
        cfg = config()
        a, b = MaskNet(cfg, seed=7), MaskNet(cfg, seed=7)
        for name, pa in a.parameters().items():
            np.testing.assert_array_equal(pa.data, b.parameters()[name].data)
        c = MaskNet(cfg, seed=8)
        assert any(
            not np.array_equal(p.data, c.parameters()[n].data)
            for n, p in a.parameters().items()
        )

    def test_odd_deeper_stages_are_cropped_back(self):
        # 48 rows stop dividing evenly after three halvings; the decoder must
        # still reproduce the predicted scales exactly
        cfg = config(h=24, w=40)
        net = MaskNet(cfg, seed=0)
        volume = Tensor(np.zeros((1, cfg.volume_channels, 24, 40), dtype=np.float32))
        with no_grad():
            outputs = net.forward(volume, training=True)
        assert [o.data.shape[2:] for o in outputs] == [(3, 5), (6, 10), (12, 20), (24, 40)]


class TestDispNetForward:
    def test_output_scales_square_input(self):
        cfg = config(h=64, w=64)
        net = DispNet(cfg, seed=1)
        rng = np.random.default_rng(1)
        x = Tensor(rng.random((1, cfg.disp_input_channels, 64, 64)).astype(np.float32))
        with no_grad():
            outputs = net.forward(x, training=True)
        shapes = [tuple(o.data.shape[2:]) for o in outputs]
        assert shapes == [(2, 2), (4, 4), (8, 8), (16, 16), (32, 32), (64, 64)]
        for out in outputs:
            assert out.data.min() >= 0.0

    def test_relu_heads_nonnegative_over_random_weights(self):
        cfg = config(planes=4, h=32, w=32, base=2)
        rng = np.random.default_rng(2)
        for seed in range(50):
            net = DispNet(cfg, seed=seed)
            x = Tensor((rng.random((1, cfg.disp_input_channels, 32, 32)) * 4 - 2).astype(np.float32))
            with no_grad():
                outputs = net.forward(x, training=True)
            assert min(float(o.data.min()) for o in outputs) >= 0.0

    def test_mask_input_perturbation_changes_output(self):
        cfg = config(h=32, w=32, base=4)
        net = DispNet(cfg, seed=3)
        rng = np.random.default_rng(3)
        base = rng.random((1, cfg.disp_input_channels, 32, 32)).astype(np.float32)
        doubled = base.copy()
        doubled[:, 3:] = np.clip(doubled[:, 3:] * 2.0, 0.0, 1.0)
        with no_grad():
            out_a = net.forward(Tensor(base), training=True)[-1]
            out_b = net.forward(Tensor(doubled), training=True)[-1]
        assert not np.array_equal(out_a.data, out_b.data)

    def test_shape_mismatch_rejected(self):
        net = DispNet(config(), seed=0)
        with pytest.raises(ValueError, match="channels"):
            net.forward(Tensor(np.zeros((1, 7, 48, 64), dtype=np.float32)))


class TestConfigValidation:
    def test_rejects_non_multiple_of_eight(self):
        with pytest.raises(ValueError, match="multiple of 8"):
            NetworkConfig(input_height=50, input_width=64)

    def test_default_loss_weights(self):
        cfg = NetworkConfig()
        assert cfg.disp_loss_weights == (0.1, 0.1, 0.1, 0.1, 0.1, 0.5)

    def test_rejects_wrong_weight_count(self):
        with pytest.raises(ValueError, match="weight"):
            NetworkConfig(disp_loss_weights=(0.5, 0.5))


class TestGradientFlow:
    def test_fusion_gradient_symmetry_with_identical_neighbours(self):
        cfg = config(planes=4, h=16, w=16, base=2)
        net = MaskNet(cfg, seed=4, dtype=np.float64)
        rng = np.random.default_rng(4)
        data = rng.random((1, cfg.volume_channels, 16, 16))
        va = Tensor(data.copy(), requires_grad=True)
        vb = Tensor(data.copy(), requires_grad=True)
        out_a = net.forward(va, training=True)[-1]
        out_b = net.forward(vb, training=True)[-1]
        from mvsweep.neural import tensor as T

        fused = T.mul(T.add(out_a, out_b), 0.5)
        truth = (rng.random((1, 4, 16, 16)) > 0.5).astype(np.float64)
        loss = bce_mask_loss(fused, truth, np.ones((1, 16, 16), dtype=bool))
        loss.backward()
        np.testing.assert_allclose(va.grad, vb.grad, rtol=1e-12, atol=1e-15)

    def test_training_step_keeps_everything_finite(self):
        cfg = config(planes=4, h=16, w=16, base=2)
        net = MaskNet(cfg, seed=5)
        rng = np.random.default_rng(5)
        volume = Tensor(rng.random((2, cfg.volume_channels, 16, 16)).astype(np.float32))
        outputs = net.forward(volume, training=True)
        truth = (rng.random((2, 4, 16, 16)) > 0.5).astype(np.float32)
        loss = bce_mask_loss(outputs[-1], truth, np.ones((2, 16, 16), dtype=bool))
        loss.backward()
        for name, p in net.parameters().items():
            if p.grad is not None:
                assert np.isfinite(p.grad).all(), name


class TestSpatialEquivariance:
    def test_translation_by_total_stride_shifts_finest_mask(self):
        cfg = config(planes=2, h=16, w=320, base=2)
        net = MaskNet(cfg, seed=6, dtype=np.float64)
        # random heads: zero-initialized ones would make the check vacuous
        rng = np.random.default_rng(6)
        for head in net.heads:
            head.weight.data[...] = rng.standard_normal(head.weight.data.shape) * 0.3
        net.eval()
        wide = rng.random((1, cfg.volume_channels, 16, 352))
        with no_grad():
            out_a = net.forward(Tensor(wide[:, :, :, 0:320]), training=False)[-1]
            out_b = net.forward(Tensor(wide[:, :, :, 32:352]), training=False)[-1]
        margin = 96
        left = out_a.data[:, :, :, 32 + margin:320 - margin]
        right = out_b.data[:, :, :, margin:320 - 32 - margin]
        np.testing.assert_allclose(left, right, atol=1e-10)
