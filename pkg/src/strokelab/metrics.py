"""Confusion-matrix summaries, ROC/AUC, and percentile-bootstrap intervals.

Positive class is stroke (label 1) throughout. Zero-denominator metrics are
reported as 0.0 and flagged rather than raising, so degenerate resamples and
all-negative predictions stay visible without crashing a run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError


def _as_binary(values, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0 and 1")
    return arr.astype(np.int64)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}

    @classmethod
    def from_dict(cls, data: dict) -> "ConfusionMatrix":
        return cls(tp=int(data["tp"]), fp=int(data["fp"]), tn=int(data["tn"]), fn=int(data["fn"]))


def confusion_matrix(predictions, labels) -> ConfusionMatrix:
    preds = _as_binary(predictions, "predictions")
    truth = _as_binary(labels, "labels")
    if preds.shape != truth.shape:
        raise ValueError(f"{preds.size} predictions for {truth.size} labels")
    if preds.size == 0:
        raise ValueError("cannot build a confusion matrix from zero samples")
    return ConfusionMatrix(
        tp=int(((preds == 1) & (truth == 1)).sum()),
        fp=int(((preds == 1) & (truth == 0)).sum()),
        tn=int(((preds == 0) & (truth == 0)).sum()),
        fn=int(((preds == 0) & (truth == 1)).sum()),
    )


@dataclass(frozen=True)
class SummaryMetrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    degenerate: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "degenerate": list(self.degenerate),
        }


def summary_metrics(cm: ConfusionMatrix) -> SummaryMetrics:
    """Accuracy, precision, recall, F1; zero denominators give 0 and a flag."""
    degenerate = []

    def ratio(num: int, den: int, name: str) -> float:
        if den == 0:
            degenerate.append(name)
            return 0.0
        return num / den

    accuracy = ratio(cm.tp + cm.tn, cm.total, "accuracy")
    precision = ratio(cm.tp, cm.tp + cm.fp, "precision")
    recall = ratio(cm.tp, cm.tp + cm.fn, "recall")
    if precision + recall == 0.0:
        degenerate.append("f1")
        f1 = 0.0
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return SummaryMetrics(
        accuracy=accuracy, precision=precision, recall=recall, f1=f1,
        degenerate=tuple(degenerate),
    )


@dataclass(frozen=True)
class RocCurve:
    """Operating points from threshold +inf down to the lowest score.

    Tied scores collapse into a single step, so consecutive points are
    distinct and both rates are non-decreasing from (0, 0) to (1, 1).
    """

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray

    def __post_init__(self) -> None:
        for name in ("fpr", "tpr"):
            rates = getattr(self, name)
            if np.any(np.diff(rates) < 0):
                raise ValueError(f"{name} must be non-decreasing")
        if self.fpr[0] != 0.0 or self.tpr[0] != 0.0:
            raise ValueError("curve must start at (0, 0)")
        if self.fpr[-1] != 1.0 or self.tpr[-1] != 1.0:
            raise ValueError("curve must end at (1, 1)")

    def __len__(self) -> int:
        return len(self.fpr)


def roc_curve(scores, labels) -> RocCurve:
    scores = np.asarray(scores, dtype=np.float64)
    truth = _as_binary(labels, "labels")
    if scores.shape != truth.shape:
        raise ValueError(f"{scores.size} scores for {truth.size} labels")
    n_pos = int((truth == 1).sum())
    n_neg = int((truth == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC needs both classes present")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_truth = truth[order]
    cum_tp = np.cumsum(sorted_truth == 1)
    cum_fp = np.cumsum(sorted_truth == 0)
    # Keep one operating point per distinct score: the last index of each run
    # of ties, i.e. the state after every tied sample has been admitted.
    last_of_run = np.flatnonzero(np.diff(sorted_scores) != 0)
    keep = np.concatenate([last_of_run, [scores.size - 1]])

    tpr = np.concatenate([[0.0], cum_tp[keep] / n_pos])
    fpr = np.concatenate([[0.0], cum_fp[keep] / n_neg])
    thresholds = np.concatenate([[np.inf], sorted_scores[keep]])
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=thresholds)


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the ROC curve."""
    dx = np.diff(curve.fpr)
    mid = (curve.tpr[1:] + curve.tpr[:-1]) / 2.0
    return float(np.sum(dx * mid))


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    level: float = 0.95
    iterations: int = 1000
    seed: int = 0
    n_degenerate: int = 0

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "level": self.level,
            "iterations": self.iterations,
            "seed": self.seed,
            "n_degenerate": self.n_degenerate,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ConfidenceInterval":
        return cls(
            lower=float(data["lower"]), upper=float(data["upper"]),
            level=float(data["level"]), iterations=int(data["iterations"]),
            seed=int(data["seed"]), n_degenerate=int(data["n_degenerate"]),
        )


BOOTSTRAP_METRICS = ("accuracy", "precision", "recall", "f1", "auc")


def _metric_on_sample(name: str, scores: np.ndarray, labels: np.ndarray, threshold: float) -> float | None:
    """Metric value for one (re)sample, or None when its denominator is empty."""
    if name == "auc":
        if len(np.unique(labels)) < 2:
            return None
        return auc(roc_curve(scores, labels))
    preds = (scores >= threshold).astype(np.int64)
    cm = confusion_matrix(preds, labels)
    summary = summary_metrics(cm)
    if name in summary.degenerate:
        return None
    return getattr(summary, name)


def bootstrap_ci(
    scores,
    labels,
    metric: str,
    iterations: int = 1000,
    level: float = 0.95,
    seed: int = 0,
    threshold: float = 0.5,
) -> ConfidenceInterval:
    """Percentile bootstrap over resampled (score, label) pairs.

    Each iteration seeds its own generator from (seed, iteration), so the
    interval is reproducible regardless of evaluation order. Degenerate
    resamples are skipped and counted, not silently folded in.
    """
    if metric not in BOOTSTRAP_METRICS:
        raise ValueError(f"unknown metric {metric!r}, expected one of {BOOTSTRAP_METRICS}")
    if iterations < 1:
        raise ValueError("iterations must be positive")
    if not 0.0 < level < 1.0:
        raise ValueError(f"confidence level must lie in (0, 1), got {level}")
    scores = np.asarray(scores, dtype=np.float64)
    truth = _as_binary(labels, "labels")
    if scores.shape != truth.shape:
        raise ValueError(f"{scores.size} scores for {truth.size} labels")
    n = scores.size
    if n == 0:
        raise ValueError("cannot bootstrap zero samples")

    values = []
    n_degenerate = 0
    for i in range(iterations):
        rng = np.random.default_rng([seed, i])
        idx = rng.integers(0, n, size=n)
        value = _metric_on_sample(metric, scores[idx], truth[idx], threshold)
        if value is None:
            n_degenerate += 1
        else:
            values.append(value)
    if not values:
        raise DataError(f"every bootstrap resample was degenerate for metric {metric!r}")

    alpha = (1.0 - level) / 2.0
    lower, upper = np.percentile(values, [100.0 * alpha, 100.0 * (1.0 - alpha)])
    return ConfidenceInterval(
        lower=float(lower), upper=float(upper), level=level,
        iterations=iterations, seed=seed, n_degenerate=n_degenerate,
    )


@dataclass(frozen=True)
class EvalReport:
    """Everything the report writer needs about one model's test scores."""

    confusion: ConfusionMatrix
    metrics: SummaryMetrics
    auc: float
    roc: RocCurve
    threshold: float
    intervals: dict[str, ConfidenceInterval] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "confusion": self.confusion.to_dict(),
            "threshold": self.threshold,
            "auc": self.auc,
            "intervals": {k: v.to_dict() for k, v in self.intervals.items()},
        }
        out.update(self.metrics.to_dict())
        return out


def evaluate_scores(
    scores,
    labels,
    threshold: float = 0.5,
    ci_metrics: tuple[str, ...] = ("accuracy", "recall"),
    iterations: int = 1000,
    level: float = 0.95,
    seed: int = 0,
) -> EvalReport:
    """Threshold scores (ties go positive), summarize, and attach intervals."""
    scores = np.asarray(scores, dtype=np.float64)
    truth = _as_binary(labels, "labels")
    preds = (scores >= threshold).astype(np.int64)
    cm = confusion_matrix(preds, truth)
    curve = roc_curve(scores, truth)
    intervals = {
        name: bootstrap_ci(scores, truth, name, iterations=iterations,
                           level=level, seed=seed, threshold=threshold)
        for name in ci_metrics
    }
    return EvalReport(
        confusion=cm,
        metrics=summary_metrics(cm),
        auc=auc(curve),
        roc=curve,
        threshold=threshold,
        intervals=intervals,
    )
