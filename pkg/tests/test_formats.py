import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvsweep import formats


class TestTensorFile:
    def test_roundtrip_with_nan(self, tmp_path):
        path = tmp_path / "t.mmvs"
        arr = np.array([[1.5, -2.25], [np.nan, 0.0]], dtype=np.float32)
        formats.write_tensor(path, arr)
        back = formats.read_tensor(path)
        assert back.dtype == np.float32
        assert back.shape == arr.shape
        np.testing.assert_array_equal(
            back.view(np.uint32), arr.view(np.uint32)
        )

    def test_rewrite_is_byte_identical(self, tmp_path):
        rng = np.random.default_rng(0)
        arr = rng.standard_normal((3, 4, 5)).astype(np.float32)
        arr[0, 0, 0] = np.nan
        p1, p2 = tmp_path / "a.mmvs", tmp_path / "b.mmvs"
        formats.write_tensor(p1, arr)
        formats.write_tensor(p2, formats.read_tensor(p1))
        assert p1.read_bytes() == p2.read_bytes()

    @given(
        values=st.lists(
            st.floats(allow_nan=True, allow_infinity=False, width=32),
            min_size=1,
            max_size=32,
        )
    )
    @settings(max_examples=30, deadline=None)
    def test_roundtrip_arbitrary_payloads(self, values, tmp_path_factory):
        path = tmp_path_factory.mktemp("tf") / "t.mmvs"
        arr = np.array(values, dtype=np.float32)
        formats.write_tensor(path, arr)
        back = formats.read_tensor(path)
        np.testing.assert_array_equal(back.view(np.uint32), arr.view(np.uint32))

    def test_header_fields(self, tmp_path):
        path = tmp_path / "t.mmvs"
        formats.write_tensor(path, np.zeros((2, 3), dtype=np.float32))
        blob = path.read_bytes()
        assert blob[:4] == b"MMVS"
        assert blob[4] == 1  # version
        assert blob[5] == 2  # axis count
        assert int.from_bytes(blob[6:10], "little") == 2
        assert int.from_bytes(blob[10:14], "little") == 3
        assert len(blob) == 14 + 4 * 6

    def test_rejects_bad_magic_and_truncation(self, tmp_path):
        path = tmp_path / "bad.mmvs"
        path.write_bytes(b"NOPE" + bytes(16))
        with pytest.raises(ValueError, match="magic"):
            formats.read_tensor(path)
        good = tmp_path / "good.mmvs"
        formats.write_tensor(good, np.zeros(4, dtype=np.float32))
        truncated = tmp_path / "trunc.mmvs"
        truncated.write_bytes(good.read_bytes()[:-3])
        with pytest.raises(ValueError, match="truncated"):
            formats.read_tensor(truncated)


class TestHistogramFile:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "h.dhst"
        counts = np.array([3, 0, 7, 2**40], dtype=np.uint64)
        formats.write_histogram(path, 4, 12.5, counts)
        bins, d_max, back = formats.read_histogram(path)
        assert bins == 4
        assert d_max == 12.5
        np.testing.assert_array_equal(back, counts)

    def test_layout(self, tmp_path):
        path = tmp_path / "h.dhst"
        formats.write_histogram(path, 2, 1.0, np.array([1, 2], dtype=np.uint64))
        blob = path.read_bytes()
        assert blob[:4] == b"DHST"
        assert blob[4] == 1
        assert int.from_bytes(blob[5:9], "little") == 2
        assert len(blob) == 4 + 1 + 4 + 8 + 16

    def test_rejects_wrong_magic(self, tmp_path):
        path = tmp_path / "x.dhst"
        path.write_bytes(b"XXXX" + bytes(20))
        with pytest.raises(ValueError, match="magic"):
            formats.read_histogram(path)


class TestPlaneFile:
    def test_roundtrip_exact(self, tmp_path):
        path = tmp_path / "planes.txt"
        depths = np.array([0.5, 1.0, 2.7182818284590451, 50.0])
        formats.write_planes(path, depths)
        back = formats.read_planes(path)
        np.testing.assert_array_equal(back, depths)

    def test_rejects_unsorted(self, tmp_path):
        with pytest.raises(ValueError, match="increasing"):
            formats.write_planes(tmp_path / "p.txt", [2.0, 1.0])
        bad = tmp_path / "bad.txt"
        bad.write_text("2.0\n1.0\n")
        with pytest.raises(ValueError, match="increasing"):
            formats.read_planes(bad)


class TestPpm:
    def test_roundtrip_is_exact_for_quantized_values(self, tmp_path):
        rng = np.random.default_rng(3)
        img = np.round(rng.random((3, 6, 9)) * 255) / 255.0
        path = tmp_path / "img.ppm"
        formats.write_ppm(path, img)
        back = formats.read_ppm(path)
        np.testing.assert_allclose(back, img, atol=1e-12)

    def test_header(self, tmp_path):
        path = tmp_path / "img.ppm"
        formats.write_ppm(path, np.zeros((3, 4, 5)))
        blob = path.read_bytes()
        assert blob.startswith(b"P6\n5 4\n255\n")
        assert len(blob) == len(b"P6\n5 4\n255\n") + 3 * 4 * 5


class TestPoseAndIntrinsics:
    def test_pose_roundtrip(self, tmp_path):
        rng = np.random.default_rng(1)
        poses = []
        for _ in range(3):
            q = np.linalg.qr(rng.standard_normal((3, 3)))[0]
            poses.append((q, rng.standard_normal(3)))
        path = tmp_path / "poses.txt"
        formats.write_poses(path, poses)
        back = formats.read_poses(path)
        for (r0, t0), (r1, t1) in zip(poses, back):
            np.testing.assert_array_equal(r0, r1)
            np.testing.assert_array_equal(t0, t1)

    def test_intrinsics_roundtrip(self, tmp_path):
        path = tmp_path / "intr.txt"
        formats.write_intrinsics(path, 70.25, 68.5, 31.5, 23.5)
        assert formats.read_intrinsics(path) == (70.25, 68.5, 31.5, 23.5)
