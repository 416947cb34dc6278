import numpy as np
import pytest

from mvsweep.neural.checkpoint import (
    load_checkpoint,
    pack_namespaces,
    save_checkpoint,
    split_namespaces,
)
from mvsweep.neural.networks import MaskNet, NetworkConfig


def small_config():
    return NetworkConfig(planes=4, base_channels=2, input_height=16, input_width=16)


class TestCheckpointFile:
    def test_roundtrip_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        named = {
            "model/w": rng.standard_normal((3, 2)).astype(np.float32),
            "model/b": rng.standard_normal(3).astype(np.float32),
            "optim/step": np.array([7.0], dtype=np.float32),
        }
        path = tmp_path / "ck.mmvsckpt"
        save_checkpoint(path, named)
        back = load_checkpoint(path)
        assert set(back) == set(named)
        for key in named:
            np.testing.assert_array_equal(back[key], named[key])
            assert back[key].dtype == np.float32

    def test_writes_are_deterministic(self, tmp_path):
        rng = np.random.default_rng(1)
        named = {f"model/p{i}": rng.standard_normal(5).astype(np.float32) for i in range(6)}
        p1, p2 = tmp_path / "a", tmp_path / "b"
        save_checkpoint(p1, named)
        save_checkpoint(p2, dict(reversed(list(named.items()))))
        assert p1.read_bytes() == p2.read_bytes()

    def test_magic_and_version(self, tmp_path):
        path = tmp_path / "ck"
        save_checkpoint(path, {"model/x": np.zeros(1, dtype=np.float32)})
        blob = path.read_bytes()
        assert blob[:8] == b"MMVSCKPT"
        assert blob[8] == 1
        bad = tmp_path / "bad"
        bad.write_bytes(b"WRONGMAG" + blob[8:])
        with pytest.raises(ValueError, match="magic"):
            load_checkpoint(bad)

    def test_scalar_entries(self, tmp_path):
        path = tmp_path / "ck"
        save_checkpoint(path, {"optim/step": np.float32(3.0)})
        back = load_checkpoint(path)
        assert back["optim/step"].shape == ()
        assert float(back["optim/step"]) == 3.0


class TestNamespaces:
    def test_pack_split_roundtrip(self):
        model = {"enc.w": np.ones(2, dtype=np.float32)}
        state = {"enc.running_mean": np.zeros(2, dtype=np.float32)}
        optim = {"enc.w/m": np.zeros(2, dtype=np.float32)}
        named = pack_namespaces(model=model, state=state, optim=optim)
        assert set(named) == {"model/enc.w", "state/enc.running_mean", "optim/enc.w/m"}
        m, s, o = split_namespaces(named)
        assert set(m) == {"enc.w"} and set(s) == {"enc.running_mean"} and set(o) == {"enc.w/m"}

    def test_unknown_namespace_rejected(self):
        with pytest.raises(ValueError, match="namespace"):
            split_namespaces({"junk/x": np.zeros(1)})


class TestNetworkRoundtrip:
    def test_masknet_parameters_roundtrip(self, tmp_path):
        net = MaskNet(small_config(), seed=3)
        named = pack_namespaces(model=net.export_arrays())
        path = tmp_path / "net.ck"
        save_checkpoint(path, named)
        model_arrays, _, _ = split_namespaces(load_checkpoint(path))
        restored = MaskNet(small_config(), seed=99)
        restored.load_arrays(model_arrays)
        for name, p in net.parameters().items():
            np.testing.assert_array_equal(p.data, restored.parameters()[name].data)
        for name, b in net.buffers().items():
            np.testing.assert_array_equal(b, restored.buffers()[name])

    def test_shape_mismatch_names_offending_tensor(self, tmp_path):
        net = MaskNet(small_config(), seed=0)
        named = net.export_arrays()
        first = sorted(named)[0]
        named[first] = np.zeros((2, 2), dtype=np.float32)
        with pytest.raises(ValueError, match=first.split(".")[0]):
            net.load_arrays(named)

    def test_unknown_tensor_rejected(self):
        net = MaskNet(small_config(), seed=0)
        with pytest.raises(KeyError, match="nonexistent"):
            net.load_arrays({"nonexistent": np.zeros(1, dtype=np.float32)})
