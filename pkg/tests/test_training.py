"""Training loop behavior: batching, determinism, history, actual learning."""

import numpy as np
import pytest

from strokelab.data_pipeline import ClassWeights, Dataset, Provenance
from strokelab.errors import DataError
from strokelab.neuralnet import (
    NetworkSpec,
    TrainConfig,
    TrainingHistory,
    build_network,
    train_network,
)
from strokelab.neuralnet.training import _batch_slices

COLUMNS = tuple(f"x{i}" for i in range(10))


def _blob_dataset(n, seed, separation=3.0):
    """Two gaussian blobs split along a random direction; linearly separable
    at separation 3, overlapping below 1.
    """
    rng = np.random.default_rng(seed)
    direction = rng.normal(size=10)
    direction /= np.linalg.norm(direction)
    labels = rng.integers(0, 2, n)
    labels[0], labels[1] = 0, 1
    x = rng.normal(size=(n, 10)) + np.outer(labels * separation, direction)
    return Dataset(
        features=x, labels=labels.astype(np.int64), columns=COLUMNS,
        provenance=Provenance(source="synthetic", split="train", seed=seed))


class TestBatchSlices:
    def test_even_split(self):
        assert _batch_slices(6, 2, False) == [slice(0, 2), slice(2, 4), slice(4, 6)]

    def test_ragged_tail_kept(self):
        assert _batch_slices(7, 3, False) == [slice(0, 3), slice(3, 6), slice(6, 7)]

    def test_singleton_tail_merged_for_batch_norm(self):
        assert _batch_slices(7, 3, True) == [slice(0, 3), slice(3, 7)]

    def test_merge_skipped_when_single_batch(self):
        assert _batch_slices(1, 3, True) == [slice(0, 1)]

    def test_slices_tile_the_range(self):
        for n in range(1, 40):
            for bs in range(1, 10):
                for merge in (False, True):
                    slices = _batch_slices(n, bs, merge)
                    covered = [i for s in slices for i in range(s.start, s.stop)]
                    assert covered == list(range(n)), (n, bs, merge)


class TestConfig:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)


class TestHistory:
    def test_row_round_trip(self):
        history = TrainingHistory(
            loss=[0.7, 0.5],
            train_accuracy=[0.6, 0.8],
            test_accuracy=[0.55, 0.75],
            train_f1=[0.5, 0.7],
            test_f1=[0.45, 0.65],
            test_precision=[0.4, 0.6],
            test_recall=[0.9, 0.8],
            wall_clock_seconds=1.25,
        )
        rebuilt = TrainingHistory.from_rows(history.to_rows())
        assert rebuilt.loss == history.loss
        assert rebuilt.test_recall == history.test_recall
        assert len(rebuilt) == 2


class TestTrainNetwork:
    def test_history_lengths_match_epochs(self):
        train = _blob_dataset(40, seed=0)
        test = _blob_dataset(20, seed=1)
        net = build_network(NetworkSpec(variant="dense", hidden_sizes=(8, 6, 4)), seed=0)
        history = train_network(net, train, test, TrainConfig(epochs=3, batch_size=16))
        assert len(history) == 3
        assert len(history.test_precision) == 3
        assert history.wall_clock_seconds > 0

    def test_deterministic_given_seeds(self):
        train = _blob_dataset(40, seed=2)
        test = _blob_dataset(20, seed=3)
        cfg = TrainConfig(epochs=4, batch_size=8, seed=5)

        def run():
            net = build_network(
                NetworkSpec(variant="dense", hidden_sizes=(8, 6, 4)), seed=9)
            history = train_network(net, train, test, cfg)
            return net, history

        net_a, hist_a = run()
        net_b, hist_b = run()
        assert hist_a.loss == hist_b.loss
        assert hist_a.test_f1 == hist_b.test_f1
        for key, val in net_a.parameters().items():
            np.testing.assert_array_equal(val, net_b.parameters()[key])

    def test_shuffle_seed_changes_trajectory(self):
        train = _blob_dataset(40, seed=4, separation=1.0)
        test = _blob_dataset(20, seed=5, separation=1.0)

        def run(shuffle_seed):
            net = build_network(
                NetworkSpec(variant="dense", hidden_sizes=(8, 6, 4)), seed=9)
            return train_network(
                net, train, test,
                TrainConfig(epochs=3, batch_size=8, seed=shuffle_seed))

        assert run(0).loss != run(1).loss

    def test_dense_learns_separable_data(self):
        train = _blob_dataset(120, seed=6)
        test = _blob_dataset(60, seed=7)
        net = build_network(NetworkSpec(variant="dense"), seed=0)
        history = train_network(
            net, train, test, TrainConfig(epochs=30, batch_size=32))
        assert history.train_accuracy[-1] >= 0.95
        assert history.loss[-1] < history.loss[0]

    def test_conv_learns_separable_data(self):
        train = _blob_dataset(120, seed=8)
        test = _blob_dataset(60, seed=9)
        net = build_network(NetworkSpec(variant="conv", batch_norm=False), seed=0)
        history = train_network(
            net, train, test, TrainConfig(epochs=40, batch_size=32))
        assert history.train_accuracy[-1] >= 0.95

    def test_explicit_class_weights_accepted(self):
        train = _blob_dataset(40, seed=10)
        test = _blob_dataset(20, seed=11)
        net = build_network(NetworkSpec(variant="dense", hidden_sizes=(8, 6, 4)), seed=0)
        history = train_network(
            net, train, test,
            TrainConfig(epochs=2, class_weights=ClassWeights(1.0, 5.0)))
        assert len(history) == 2

    def test_column_mismatch_rejected(self):
        train = _blob_dataset(40, seed=12)
        test = Dataset(
            features=np.zeros((2, 10)),
            labels=np.array([0, 1]),
            columns=tuple(reversed(COLUMNS)),
            provenance=Provenance(source="synthetic", split="test"))
        net = build_network(NetworkSpec(variant="dense", hidden_sizes=(8, 6, 4)), seed=0)
        with pytest.raises(DataError):
            train_network(net, train, test, TrainConfig(epochs=1))

    def test_epoch_loss_is_weighted_epoch_mean(self):
        # With batch_size >= n there is exactly one batch, so the reported
        # loss is the plain weighted loss of that forward pass.
        train = _blob_dataset(30, seed=13)
        test = _blob_dataset(10, seed=14)
        net = build_network(
            NetworkSpec(variant="dense", hidden_sizes=(8, 6, 4), dropout_rate=0.0),
            seed=0)
        history = train_network(
            net, train, test, TrainConfig(epochs=1, batch_size=64))
        assert len(history.loss) == 1
        assert np.isfinite(history.loss[0])
