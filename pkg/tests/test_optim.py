import numpy as np
import pytest

from mvsweep.neural.optim import Adam
from mvsweep.neural.tensor import Tensor


class TestAdamStep:
    def test_first_step_is_signed_learning_rate(self):
        rng = np.random.default_rng(0)
        p = Tensor(rng.standard_normal(16), requires_grad=True)
        start = p.data.copy()
        g = rng.standard_normal(16)
        g[np.abs(g) < 0.1] = 0.5  # keep eps negligible against |g|
        p.grad = g.copy()
        opt = Adam({"p": p}, lr=1e-3, eps=1e-8)
        opt.step()
        update = p.data - start
        np.testing.assert_allclose(update, -1e-3 * np.sign(g), rtol=1e-6)

    def test_zero_gradient_leaves_parameters_unchanged(self):
        p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
        opt = Adam({"p": p}, lr=0.1)
        opt.m["p"][...] = 0.0
        p.grad = np.zeros(2)
        opt.step()
        np.testing.assert_array_equal(p.data, [1.0, -2.0])
        assert opt.step_count == 1

    def test_moments_decay_without_gradient(self):
        p = Tensor(np.array([1.0]), requires_grad=True)
        opt = Adam({"p": p}, lr=0.0)
        opt.m["p"][...] = 1.0
        opt.v["p"][...] = 1.0
        p.grad = np.zeros(1)
        opt.step()
        np.testing.assert_allclose(opt.m["p"], 0.9)
        np.testing.assert_allclose(opt.v["p"], 0.999)

    def test_identical_parameters_identical_trajectories(self):
        a = Tensor(np.array([0.5, -0.5]), requires_grad=True)
        b = Tensor(np.array([0.5, -0.5]), requires_grad=True)
        opt = Adam({"a": a, "b": b}, lr=1e-2)
        rng = np.random.default_rng(1)
        for _ in range(25):
            g = rng.standard_normal(2)
            a.grad = g.copy()
            b.grad = g.copy()
            opt.step()
        np.testing.assert_array_equal(a.data, b.data)

    def test_nonfinite_gradient_fails_fast(self):
        p = Tensor(np.ones(2), requires_grad=True)
        opt = Adam({"p": p}, lr=1e-3)
        p.grad = np.array([1.0, np.nan])
        with pytest.raises(FloatingPointError, match="p"):
            opt.step()

    def test_missing_gradient_treated_as_zero(self):
        p = Tensor(np.ones(2), requires_grad=True)
        opt = Adam({"p": p}, lr=0.1)
        opt.step()
        np.testing.assert_array_equal(p.data, 1.0)

    def test_converges_on_quadratic(self):
        p = Tensor(np.array([8.0]), requires_grad=True)
        opt = Adam({"p": p}, lr=0.05)
        for _ in range(2000):
            p.grad = 2.0 * (p.data - 3.0)
            opt.step()
        np.testing.assert_allclose(p.data, 3.0, atol=1e-3)

    def test_rejects_bad_betas(self):
        p = Tensor(np.ones(1), requires_grad=True)
        with pytest.raises(ValueError, match="betas"):
            Adam({"p": p}, lr=1e-3, beta1=1.0)

    def test_state_roundtrip(self):
        rng = np.random.default_rng(2)
        p = Tensor(rng.standard_normal(4).astype(np.float32), requires_grad=True)
        opt = Adam({"p": p}, lr=1e-3)
        for _ in range(3):
            p.grad = rng.standard_normal(4).astype(np.float32)
            opt.step()
        state = opt.export_state()
        q = Tensor(p.data.copy(), requires_grad=True)
        opt2 = Adam({"p": q}, lr=1e-3)
        opt2.load_state(state)
        assert opt2.step_count == 3
        g = rng.standard_normal(4).astype(np.float32)
        p.grad = g.copy()
        q.grad = g.copy()
        opt.step()
        opt2.step()
        np.testing.assert_array_equal(p.data, q.data)
