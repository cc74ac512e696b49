"""Class-weighted softmax cross-entropy with its exact logit gradient."""

from __future__ import annotations

import numpy as np

from ..data_pipeline import ClassWeights


def weighted_cross_entropy(
    logits: np.ndarray, labels: np.ndarray, weights: ClassWeights
) -> tuple[float, np.ndarray]:
    """Weighted-mean negative log likelihood over a batch.

        loss = sum_i w_{y_i} * (-log softmax(logits_i)[y_i]) / sum_i w_{y_i}

    Log-probabilities go through a shifted logsumexp, so saturated logits
    stay finite. Returns (loss, dloss/dlogits); the gradient already divides
    by the weight sum, so callers feed it straight into backward.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise ValueError(f"logits must be (batch, classes), got shape {logits.shape}")
    n, k = logits.shape
    if n == 0:
        raise ValueError("empty batch")
    if labels.shape != (n,):
        raise ValueError(f"{labels.shape} labels for {n} logits rows")
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"labels must lie in [0, {k - 1}]")

    sample_w = weights.weight_vector(labels)
    weight_sum = float(sample_w.sum())

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    nll = -log_probs[np.arange(n), labels]
    loss = float(np.sum(sample_w * nll) / weight_sum)

    grad = np.exp(log_probs)
    grad[np.arange(n), labels] -= 1.0
    grad *= sample_w[:, None] / weight_sum
    return loss, grad
