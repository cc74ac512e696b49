"""Network assembly, determinism, and the binary save/load format."""

import json

import numpy as np
import pytest

from strokelab.errors import DataError
from strokelab.neuralnet import Network, NetworkSpec, build_network
from strokelab.neuralnet import layers as L


class TestSpec:
    def test_defaults(self):
        spec = NetworkSpec(variant="dense")
        assert spec.input_size == 10
        assert spec.hidden_sizes == (64, 32, 16)
        assert spec.output_size == 2

    def test_dense_requires_three_hidden(self):
        with pytest.raises(ValueError):
            NetworkSpec(variant="dense", hidden_sizes=(64, 32))

    def test_conv_requires_two_channel_blocks(self):
        with pytest.raises(ValueError):
            NetworkSpec(variant="conv", conv_channels=(16, 32, 64))

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            NetworkSpec(variant="transformer")

    def test_conv_flattened_size(self):
        spec = NetworkSpec(variant="conv", batch_norm=False)
        # 10 -> conv(pad 1) 10 -> pool 5 -> conv 5 -> pool 2; 2 * 32 channels
        assert spec.flattened_size() == 64

    def test_conv_input_too_short_for_pooling(self):
        with pytest.raises(ValueError):
            NetworkSpec(variant="conv", input_size=3, batch_norm=False)


class TestBuild:
    def test_dense_layer_sequence(self):
        net = build_network(NetworkSpec(variant="dense"), seed=0)
        kinds = [type(l).__name__ for l in net.layers]
        assert kinds == [
            "Dense", "BatchNorm", "ReLU", "Dropout",
            "Dense", "BatchNorm", "ReLU", "Dropout",
            "Dense", "BatchNorm", "ReLU", "Dropout",
            "Dense",
        ]

    def test_dense_parameter_count(self):
        net = build_network(NetworkSpec(variant="dense"), seed=0)
        # 10*64+64 + 2*64 + 64*32+32 + 2*32 + 32*16+16 + 2*16 + 16*2+2
        assert net.num_parameters() == 3570

    def test_dense_without_batchnorm(self):
        net = build_network(
            NetworkSpec(variant="dense", batch_norm=False), seed=0)
        kinds = [type(l).__name__ for l in net.layers]
        assert "BatchNorm" not in kinds
        assert net.num_parameters() == 3570 - 2 * (64 + 32 + 16)

    def test_conv_layer_sequence(self):
        net = build_network(NetworkSpec(variant="conv", batch_norm=False), seed=0)
        kinds = [type(l).__name__ for l in net.layers]
        assert kinds == [
            "Reshape1d",
            "Conv1d", "ReLU", "MaxPool1d", "Dropout",
            "Conv1d", "ReLU", "MaxPool1d", "Dropout",
            "Flatten", "Dense", "ReLU", "Dropout", "Dense",
        ]

    def test_conv_parameter_count(self):
        net = build_network(NetworkSpec(variant="conv", batch_norm=False), seed=0)
        # conv1 1*16*3+16, conv2 16*32*3+32, dense 64*32+32, head 32*2+2
        assert net.num_parameters() == (48 + 16) + (1536 + 32) + (2048 + 32) + (64 + 2)

    def test_same_seed_same_weights(self):
        a = build_network(NetworkSpec(variant="dense"), seed=7)
        b = build_network(NetworkSpec(variant="dense"), seed=7)
        for key, val in a.parameters().items():
            np.testing.assert_array_equal(val, b.parameters()[key])

    def test_different_seed_different_weights(self):
        a = build_network(NetworkSpec(variant="dense"), seed=7)
        b = build_network(NetworkSpec(variant="dense"), seed=8)
        assert any(
            not np.array_equal(v, b.parameters()[k])
            for k, v in a.parameters().items())


class TestForwardBackward:
    def test_forward_shape(self):
        net = build_network(NetworkSpec(variant="dense"), seed=0)
        out = net.forward(np.zeros((5, 10)), train=False)
        assert out.shape == (5, 2)

    def test_conv_forward_shape(self):
        net = build_network(NetworkSpec(variant="conv", batch_norm=False), seed=0)
        out = net.forward(np.zeros((5, 10)), train=False)
        assert out.shape == (5, 2)

    def test_forward_rejects_wrong_width(self):
        net = build_network(NetworkSpec(variant="dense"), seed=0)
        with pytest.raises(ValueError):
            net.forward(np.zeros((5, 9)), train=False)

    def test_backward_requires_train_forward(self):
        net = build_network(NetworkSpec(variant="dense"), seed=0)
        with pytest.raises(RuntimeError):
            net.backward(np.zeros((5, 2)))
        net.forward(np.zeros((5, 10)), train=False)
        with pytest.raises(RuntimeError):
            net.backward(np.zeros((5, 2)))

    def test_backward_covers_every_parameter(self):
        net = build_network(NetworkSpec(variant="dense"), seed=1)
        net.forward(np.random.default_rng(0).normal(size=(4, 10)), train=True)
        grads = net.backward(np.full((4, 2), 0.25))
        assert set(grads) == set(net.parameters())
        for key, grad in grads.items():
            assert grad.shape == net.parameters()[key].shape

    def test_eval_forward_is_deterministic_despite_dropout(self):
        net = build_network(NetworkSpec(variant="dense"), seed=2)
        x = np.random.default_rng(1).normal(size=(6, 10))
        a = net.forward(x, train=False)
        b = net.forward(x, train=False)
        np.testing.assert_array_equal(a, b)

    def test_predict_proba_in_unit_interval(self):
        net = build_network(NetworkSpec(variant="dense"), seed=3)
        x = np.random.default_rng(2).normal(size=(8, 10))
        p = net.predict_proba(x)
        assert p.shape == (8,)
        assert np.all((p >= 0) & (p <= 1))

    def test_predict_threshold(self):
        net = build_network(NetworkSpec(variant="dense"), seed=3)
        x = np.random.default_rng(2).normal(size=(8, 10))
        p = net.predict_proba(x)
        np.testing.assert_array_equal(net.predict(x, threshold=0.5), (p >= 0.5).astype(int))


class TestFreeze:
    def test_freeze_then_unfreeze(self):
        net = build_network(NetworkSpec(variant="dense"), seed=4)
        x = np.random.default_rng(3).normal(size=(4, 10))
        net.freeze_dropout()
        a = net.forward(x, train=True)
        b = net.forward(x, train=True)
        np.testing.assert_array_equal(a, b)
        net.unfreeze_dropout()
        dropouts = [l for l in net.layers if isinstance(l, L.Dropout)]
        assert all(not d.frozen for d in dropouts)


class TestSerialization:
    def _train_a_little(self, net):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(8, net.spec.input_size))
        net.forward(x, train=True)

    def test_round_trip_dense(self, tmp_path):
        net = build_network(NetworkSpec(variant="dense"), seed=6)
        self._train_a_little(net)
        path = tmp_path / "model.json"
        net.save(path, extras={"threshold": 0.4})
        loaded, extras = Network.load(path)
        assert extras == {"threshold": 0.4}
        assert loaded.seed == 6
        for key, val in net.parameters().items():
            np.testing.assert_array_equal(val, loaded.parameters()[key])
        for key, val in net.buffers().items():
            np.testing.assert_array_equal(val, loaded.buffers()[key])

    def test_round_trip_conv(self, tmp_path):
        net = build_network(NetworkSpec(variant="conv", batch_norm=False), seed=7)
        path = tmp_path / "conv.json"
        net.save(path, extras={})
        loaded, _ = Network.load(path)
        x = np.random.default_rng(6).normal(size=(5, 10))
        np.testing.assert_array_equal(
            net.predict_proba(x), loaded.predict_proba(x))

    def test_predictions_survive_round_trip(self, tmp_path):
        net = build_network(NetworkSpec(variant="dense"), seed=8)
        self._train_a_little(net)  # perturb running stats away from init
        path = tmp_path / "m.json"
        net.save(path, extras={})
        loaded, _ = Network.load(path)
        x = np.random.default_rng(7).normal(size=(9, 10))
        np.testing.assert_array_equal(net.predict_proba(x), loaded.predict_proba(x))

    def test_corrupted_blob_detected(self, tmp_path):
        net = build_network(NetworkSpec(variant="dense"), seed=9)
        path = tmp_path / "m.json"
        net.save(path, extras={})
        blob = path.with_suffix(".bin")
        raw = bytearray(blob.read_bytes())
        raw[100] ^= 0xFF
        blob.write_bytes(bytes(raw))
        with pytest.raises(DataError, match="checksum"):
            Network.load(path)

    def test_wrong_magic_detected(self, tmp_path):
        net = build_network(NetworkSpec(variant="dense"), seed=10)
        path = tmp_path / "m.json"
        net.save(path, extras={})
        header = json.loads(path.read_text())
        header["magic"] = "something-else"
        path.write_text(json.dumps(header))
        with pytest.raises(DataError):
            Network.load(path)

    def test_missing_blob_detected(self, tmp_path):
        net = build_network(NetworkSpec(variant="dense"), seed=11)
        path = tmp_path / "m.json"
        net.save(path, extras={})
        path.with_suffix(".bin").unlink()
        with pytest.raises(DataError):
            Network.load(path)
