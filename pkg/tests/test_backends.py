import numpy as np
import pytest

from mvsweep.kernels import available_backends, get_backend

BACKENDS = available_backends()
needs_both = pytest.mark.skipif(
    len(BACKENDS) < 2, reason="compiled kernel extension not built"
)


def reference_warp(img, hmat):
    """Direct per-pixel bilinear warp oracle (slow, obviously correct)."""
    c, h, w = img.shape
    out = np.zeros_like(img)
    valid = np.zeros((h, w), dtype=bool)
    for y in range(h):
        for x in range(w):
            q = hmat @ np.array([x, y, 1.0])
            if q[2] <= 1e-12:
                continue
            u, v = q[0] / q[2], q[1] / q[2]
            if not (0 <= u <= w - 1 and 0 <= v <= h - 1):
                continue
            x0 = min(int(np.floor(u)), w - 2)
            y0 = min(int(np.floor(v)), h - 2)
            fx, fy = u - x0, v - y0
            for ch in range(c):
                p = img[ch]
                out[ch, y, x] = (1 - fy) * ((1 - fx) * p[y0, x0] + fx * p[y0, x0 + 1]) + fy * (
                    (1 - fx) * p[y0 + 1, x0] + fx * p[y0 + 1, x0 + 1]
                )
            valid[y, x] = True
    return out, valid


@pytest.mark.parametrize("backend", BACKENDS)
class TestKernelContracts:
    def test_im2col_col2im_are_adjoint(self, backend):
        # <im2col(x), y> == <x, col2im(y)> characterizes the scatter exactly
        k = get_backend(backend)
        rng = np.random.default_rng(0)
        for kernel, stride, pad in [(3, 1, 1), (5, 2, 2), (7, 2, 3), (3, 2, 0)]:
            x = rng.standard_normal((2, 3, 12, 14))
            cols = k.im2col(x, kernel, kernel, stride, pad, pad)
            y = rng.standard_normal(cols.shape)
            lhs = float(np.sum(cols * y))
            rhs = float(np.sum(x * k.col2im(y, 12, 14, kernel, kernel, stride, pad, pad)))
            np.testing.assert_allclose(lhs, rhs, rtol=1e-12)

    def test_im2col_matches_padded_window_view(self, backend):
        k = get_backend(backend)
        rng = np.random.default_rng(1)
        x = rng.standard_normal((1, 2, 6, 7))
        cols = k.im2col(x, 3, 3, 2, 1, 1)
        xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        oh = ow = None
        expected = []
        for c in range(2):
            for ki in range(3):
                for kj in range(3):
                    window = xp[0, c, ki:ki + 6:2, kj:kj + 7:2]
                    expected.append(window.reshape(-1))
        expected = np.stack(expected)
        np.testing.assert_array_equal(cols[0], expected)

    def test_warp_matches_reference_loop(self, backend):
        k = get_backend(backend)
        rng = np.random.default_rng(2)
        img = rng.random((3, 10, 12))
        hmat = np.array([[0.97, 0.03, 0.8], [-0.02, 1.02, -0.4], [2e-4, -1e-4, 1.0]])
        got, got_valid = k.warp_bilinear(img, hmat)
        want, want_valid = reference_warp(img, hmat)
        np.testing.assert_array_equal(got_valid, want_valid)
        np.testing.assert_allclose(got, want, atol=1e-12)


@needs_both
class TestBackendBitEquality:
    @pytest.mark.parametrize("dtype", [np.float32, np.float64])
    def test_im2col_col2im_bitwise(self, dtype):
        knp, kcy = get_backend("numpy"), get_backend("cython")
        rng = np.random.default_rng(3)
        x = rng.standard_normal((2, 4, 11, 13)).astype(dtype)
        for kernel, stride, pad in [(3, 1, 1), (5, 2, 2), (7, 2, 3)]:
            a = knp.im2col(x, kernel, kernel, stride, pad, pad)
            b = kcy.im2col(x, kernel, kernel, stride, pad, pad)
            np.testing.assert_array_equal(a, b)
            g = rng.standard_normal(a.shape).astype(dtype)
            ga = knp.col2im(g, 11, 13, kernel, kernel, stride, pad, pad)
            gb = kcy.col2im(g, 11, 13, kernel, kernel, stride, pad, pad)
            np.testing.assert_array_equal(ga, gb)

    @pytest.mark.parametrize("dtype", [np.float32, np.float64])
    def test_warp_bitwise(self, dtype):
        knp, kcy = get_backend("numpy"), get_backend("cython")
        rng = np.random.default_rng(4)
        img = rng.random((3, 24, 32)).astype(dtype)
        for _ in range(5):
            hmat = np.eye(3) + rng.standard_normal((3, 3)) * np.array(
                [[0.05, 0.05, 2.0], [0.05, 0.05, 2.0], [2e-4, 2e-4, 0.02]]
            )
            wa, va = knp.warp_bilinear(img, hmat)
            wb, vb = kcy.warp_bilinear(img, hmat)
            np.testing.assert_array_equal(va, vb)
            np.testing.assert_array_equal(wa, wb)
