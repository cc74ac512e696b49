"""Class-weighted, L2-regularized logistic regression by full-batch descent.

The objective is

    J(w, b) = -(1/n) sum_i c_i [y_i log p_i + (1 - y_i) log(1 - p_i)]
              + (lambda / 2n) ||w||^2

with per-sample class weights c_i and an unregularized bias. Gradient
descent runs full batch from zero weights with a halving backoff: any step
that fails to decrease J is retried at half the learning rate, and the
reduced rate persists, so the objective trace is non-increasing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data_pipeline import ClassWeights, Dataset, PreprocessArtifacts, class_weights
from .errors import ConvergenceError, DataError

_MIN_LEARNING_RATE = 1e-30


def sigmoid(z):
    """Numerically stable logistic function, strictly inside (0, 1)."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    out = np.clip(out, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class LogRegConfig:
    l2_strength: float = 1.0
    learning_rate: float = 0.1
    max_iterations: int = 10000
    gradient_tolerance: float = 1e-6
    class_weights: ClassWeights | None = None  # None fits balanced weights

    def __post_init__(self) -> None:
        if self.l2_strength < 0:
            raise ValueError(f"l2_strength must be >= 0, got {self.l2_strength}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.gradient_tolerance <= 0:
            raise ValueError(f"gradient_tolerance must be > 0, got {self.gradient_tolerance}")

    def to_dict(self) -> dict:
        return {
            "l2_strength": self.l2_strength,
            "learning_rate": self.learning_rate,
            "max_iterations": self.max_iterations,
            "gradient_tolerance": self.gradient_tolerance,
        }


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float
    threshold: float = 0.5
    columns: tuple[str, ...] | None = None
    artifacts: PreprocessArtifacts | None = None
    l2_strength: float | None = None
    iterations: int | None = None
    final_objective: float | None = None
    class_weights: ClassWeights | None = None

    def to_dict(self) -> dict:
        return {
            "kind": "logistic",
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "threshold": self.threshold,
            "columns": None if self.columns is None else list(self.columns),
            "l2_strength": self.l2_strength,
            "iterations": self.iterations,
            "final_objective": self.final_objective,
            "class_weights": None if self.class_weights is None else self.class_weights.to_dict(),
            "preprocessing": None if self.artifacts is None else self.artifacts.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LogisticModel":
        if data.get("kind") != "logistic":
            raise DataError(f"not a logistic model file (kind={data.get('kind')!r})")
        return cls(
            weights=np.asarray(data["weights"], dtype=np.float64),
            bias=float(data["bias"]),
            threshold=float(data["threshold"]),
            columns=None if data.get("columns") is None else tuple(data["columns"]),
            artifacts=None if data.get("preprocessing") is None
            else PreprocessArtifacts.from_dict(data["preprocessing"]),
            l2_strength=data.get("l2_strength"),
            iterations=data.get("iterations"),
            final_objective=data.get("final_objective"),
            class_weights=None if data.get("class_weights") is None
            else ClassWeights.from_dict(data["class_weights"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "LogisticModel":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot load model from {path}: {exc}") from None


def objective_and_gradient(
    features: np.ndarray,
    labels: np.ndarray,
    sample_weights: np.ndarray,
    weights: np.ndarray,
    bias: float,
    l2_strength: float,
) -> tuple[float, np.ndarray, float]:
    """Weighted objective J and its exact gradient in one pass.

    Cross-entropy terms use log(sigmoid(z)) = -logaddexp(0, -z), which stays
    finite however saturated the margins get.
    """
    n = features.shape[0]
    z = features @ weights + bias
    log_p = -np.logaddexp(0.0, -z)
    log_1mp = -np.logaddexp(0.0, z)
    ce = -(labels * log_p + (1 - labels) * log_1mp)
    objective = float(np.sum(sample_weights * ce) / n + l2_strength * np.dot(weights, weights) / (2 * n))

    residual = sample_weights * (sigmoid(z) - labels)
    grad_w = features.T @ residual / n + (l2_strength / n) * weights
    grad_b = float(np.sum(residual) / n)
    return objective, grad_w, grad_b


def train_logreg(train: Dataset, config: LogRegConfig = LogRegConfig()) -> tuple[LogisticModel, int, float]:
    """Fit from zero weights; returns (model, iterations used, final objective).

    Convergence is declared when the gradient infinity norm drops below the
    tolerance; otherwise the loop stops at max_iterations.
    """
    labels = train.labels.astype(np.float64)
    if not ((train.labels == 0) | (train.labels == 1)).all():
        raise DataError("training labels must be 0 or 1")
    weights_cfg = config.class_weights or class_weights(train.labels)
    sample_w = weights_cfg.weight_vector(train.labels)

    w = np.zeros(train.n_features, dtype=np.float64)
    b = 0.0
    lr = config.learning_rate
    objective, grad_w, grad_b = objective_and_gradient(
        train.features, labels, sample_w, w, b, config.l2_strength
    )
    if not np.isfinite(objective):
        raise ConvergenceError("non-finite objective at iteration 0")

    iterations = 0
    stalled = False
    for iteration in range(1, config.max_iterations + 1):
        if max(np.max(np.abs(grad_w)), abs(grad_b)) < config.gradient_tolerance:
            break
        while True:
            w_next = w - lr * grad_w
            b_next = b - lr * grad_b
            candidate = objective_and_gradient(
                train.features, labels, sample_w, w_next, b_next, config.l2_strength
            )
            if np.isfinite(candidate[0]) and candidate[0] <= objective:
                break
            # Shrink until the step stops overshooting; the reduction sticks.
            lr /= 2.0
            if lr < _MIN_LEARNING_RATE:
                if not np.isfinite(candidate[0]):
                    raise ConvergenceError(f"non-finite objective at iteration {iteration}")
                # The objective is at its numerical floor; stop stepping.
                stalled = True
                break
        if stalled:
            break
        w, b = w_next, b_next
        objective, grad_w, grad_b = candidate
        iterations = iteration

    model = LogisticModel(
        weights=w,
        bias=float(b),
        threshold=0.5,
        columns=train.columns,
        l2_strength=config.l2_strength,
        iterations=iterations,
        final_objective=objective,
        class_weights=weights_cfg,
    )
    return model, iterations, objective


def predict_proba(model: LogisticModel, features) -> np.ndarray | float:
    """Stroke probability for one feature vector or a batch of them."""
    x = np.asarray(features, dtype=np.float64)
    d = model.weights.size
    if x.ndim == 1:
        if x.size != d:
            raise ValueError(f"expected {d} features, got {x.size}")
        return float(sigmoid(float(x @ model.weights) + model.bias))
    if x.ndim == 2:
        if x.shape[1] != d:
            raise ValueError(f"expected {d} features, got {x.shape[1]}")
        return sigmoid(x @ model.weights + model.bias)
    raise ValueError(f"features must be 1-D or 2-D, got shape {x.shape}")


def classify(probability: float, threshold: float = 0.5) -> int:
    """Threshold a probability; ties go to the positive class."""
    if not 0.0 <= probability <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {probability}")
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    return int(probability >= threshold)


def feature_importance(model: LogisticModel, names: tuple[str, ...] | None = None) -> list[tuple[str, float]]:
    """Features ranked by coefficient magnitude, ties in column order.

    Magnitudes are comparable because inputs are standardized before the fit.
    """
    if names is None:
        names = model.columns
    if names is None:
        raise ValueError("no feature names available for the importance ranking")
    if len(names) != model.weights.size:
        raise ValueError(f"{len(names)} names for {model.weights.size} coefficients")
    magnitude = np.abs(model.weights)
    order = np.argsort(-magnitude, kind="stable")
    return [(names[i], float(magnitude[i])) for i in order]
