"""Mini-batch training loop with per-epoch accuracy/F1/loss tracking."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..data_pipeline import ClassWeights, Dataset, class_weights
from ..errors import ConvergenceError, DataError
from ..metrics import confusion_matrix, summary_metrics
from . import layers as L
from .losses import weighted_cross_entropy
from .network import Network
from .optim import adam_step

log = logging.getLogger("strokelab")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 400
    batch_size: int = 32
    seed: int = 0
    class_weights: ClassWeights | None = None  # None fits balanced weights

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "seed": self.seed,
        }


@dataclass
class TrainingHistory:
    """Per-epoch curves; precision/recall columns track the test split."""

    loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    test_accuracy: list[float] = field(default_factory=list)
    train_f1: list[float] = field(default_factory=list)
    test_f1: list[float] = field(default_factory=list)
    test_precision: list[float] = field(default_factory=list)
    test_recall: list[float] = field(default_factory=list)
    wall_clock_seconds: float = 0.0

    COLUMNS = (
        "epoch", "loss", "train_accuracy", "test_accuracy",
        "train_f1", "test_f1", "test_precision", "test_recall",
    )

    def __len__(self) -> int:
        return len(self.loss)

    def to_rows(self) -> list[list]:
        return [
            [
                epoch + 1,
                self.loss[epoch],
                self.train_accuracy[epoch],
                self.test_accuracy[epoch],
                self.train_f1[epoch],
                self.test_f1[epoch],
                self.test_precision[epoch],
                self.test_recall[epoch],
            ]
            for epoch in range(len(self))
        ]

    @classmethod
    def from_rows(cls, rows: list[list]) -> "TrainingHistory":
        history = cls()
        for row in rows:
            history.loss.append(float(row[1]))
            history.train_accuracy.append(float(row[2]))
            history.test_accuracy.append(float(row[3]))
            history.train_f1.append(float(row[4]))
            history.test_f1.append(float(row[5]))
            history.test_precision.append(float(row[6]))
            history.test_recall.append(float(row[7]))
        return history

    def to_dict(self) -> dict:
        return {
            "loss": list(self.loss),
            "train_accuracy": list(self.train_accuracy),
            "test_accuracy": list(self.test_accuracy),
            "train_f1": list(self.train_f1),
            "test_f1": list(self.test_f1),
            "test_precision": list(self.test_precision),
            "test_recall": list(self.test_recall),
        }


def _batch_slices(n: int, batch_size: int, merge_tail_singleton: bool) -> list[slice]:
    bounds = list(range(0, n, batch_size)) + [n]
    slices = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
    if merge_tail_singleton and len(slices) > 1 and slices[-1].stop - slices[-1].start == 1:
        # A size-1 tail cannot feed batch statistics; fold it into its neighbor.
        last = slices.pop()
        prev = slices.pop()
        slices.append(slice(prev.start, last.stop))
    return slices


def _epoch_summary(net: Network, ds: Dataset, threshold: float = 0.5):
    scores = net.predict_proba(ds.features)
    preds = (scores >= threshold).astype(np.int64)
    return summary_metrics(confusion_matrix(preds, ds.labels))


def train_network(
    net: Network, train: Dataset, test: Dataset, config: TrainConfig = TrainConfig()
) -> TrainingHistory:
    """Shuffle, batch, step; returns the full per-epoch history.

    The reported epoch loss is the weighted mean over the whole epoch (batch
    losses recombined by their weight sums), so it matches what a single
    full-batch evaluation of the same parameters would have averaged.
    """
    if train.columns != test.columns:
        raise DataError("train and test column order disagree")
    weights_cfg = config.class_weights or class_weights(train.labels)
    has_batch_norm = any(isinstance(layer, L.BatchNorm) for layer in net.layers)
    if has_batch_norm and len(train) < 2:
        raise DataError("batch normalization needs at least 2 training rows")

    rng = np.random.default_rng(config.seed)
    history = TrainingHistory()
    started = time.perf_counter()
    n = len(train)
    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        features = train.features[perm]
        labels = train.labels[perm]

        loss_sum = 0.0
        weight_sum = 0.0
        for batch in _batch_slices(n, config.batch_size, has_batch_norm):
            logits = net.forward(features[batch], train=True)
            loss, dlogits = weighted_cross_entropy(logits, labels[batch], weights_cfg)
            if not np.isfinite(loss):
                raise ConvergenceError(
                    f"non-finite loss at epoch {epoch + 1}, batch starting at {batch.start}"
                )
            grads = net.backward(dlogits)
            adam_step(net, grads, config.learning_rate)
            w = float(weights_cfg.weight_vector(labels[batch]).sum())
            loss_sum += loss * w
            weight_sum += w

        train_summary = _epoch_summary(net, train)
        test_summary = _epoch_summary(net, test)
        history.loss.append(loss_sum / weight_sum)
        history.train_accuracy.append(train_summary.accuracy)
        history.test_accuracy.append(test_summary.accuracy)
        history.train_f1.append(train_summary.f1)
        history.test_f1.append(test_summary.f1)
        history.test_precision.append(test_summary.precision)
        history.test_recall.append(test_summary.recall)
        if (epoch + 1) % 50 == 0 or epoch == config.epochs - 1:
            log.info(
                "epoch %d/%d: loss %.4f, train acc %.4f, test acc %.4f",
                epoch + 1, config.epochs, history.loss[-1],
                train_summary.accuracy, test_summary.accuracy,
            )

    history.wall_clock_seconds = time.perf_counter() - started
    return history
