"""Rendered companions to the delimited report files.

Every figure is drawn from the same in-memory report the CSV writers see,
with the Agg backend and pinned render settings, so the PNGs are as
reproducible as the numbers they display.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .metrics import ConfusionMatrix, RocCurve
from .neuralnet import TrainingHistory

_RC = {
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
}

_COLORS = {"logistic": "#1f77b4", "dense": "#d62728", "conv": "#2ca02c"}
# Drop the writer's Software tag so the bytes do not depend on the
# matplotlib patch version.
_PNG_METADATA = {"Software": None}


def _save(fig, path: Path) -> None:
    fig.savefig(path, metadata=_PNG_METADATA)
    plt.close(fig)


def roc_figure(curves: dict[str, tuple[RocCurve, float]], path: Path) -> None:
    """Overlayed ROC curves, one per model, chance diagonal for reference."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 4.2))
        for name, (curve, area) in curves.items():
            ax.plot(curve.fpr, curve.tpr, label=f"{name} (AUC = {area:.3f})",
                    color=_COLORS.get(name), linewidth=1.6)
        ax.plot([0, 1], [0, 1], linestyle="--", color="gray", linewidth=0.8)
        ax.set_xlabel("false positive rate")
        ax.set_ylabel("true positive rate")
        ax.set_title("ROC curves on the test split")
        ax.set_xlim(-0.02, 1.02)
        ax.set_ylim(-0.02, 1.02)
        ax.legend(loc="lower right", frameon=False)
        _save(fig, path)


def history_figure(history: TrainingHistory, label: str, path: Path) -> None:
    """Loss, accuracy, and F1 traces across epochs for one network."""
    epochs = range(1, len(history) + 1)
    with plt.rc_context(_RC):
        fig, (ax_loss, ax_acc, ax_f1) = plt.subplots(1, 3, figsize=(11, 3.4))
        ax_loss.plot(epochs, history.loss, color="#444444", linewidth=1.2)
        ax_loss.set_xlabel("epoch")
        ax_loss.set_ylabel("weighted loss")
        ax_loss.set_title(f"{label}: training loss")

        ax_acc.plot(epochs, history.train_accuracy, label="train", linewidth=1.2)
        ax_acc.plot(epochs, history.test_accuracy, label="test", linewidth=1.2)
        ax_acc.set_xlabel("epoch")
        ax_acc.set_ylabel("accuracy")
        ax_acc.set_title(f"{label}: accuracy")
        ax_acc.legend(frameon=False)

        ax_f1.plot(epochs, history.train_f1, label="train", linewidth=1.2)
        ax_f1.plot(epochs, history.test_f1, label="test", linewidth=1.2)
        ax_f1.set_xlabel("epoch")
        ax_f1.set_ylabel("F1")
        ax_f1.set_title(f"{label}: F1")
        ax_f1.legend(frameon=False)

        fig.tight_layout()
        _save(fig, path)


def confusion_figure(cm: ConfusionMatrix, label: str, path: Path) -> None:
    """2x2 count grid, actual on rows, predicted on columns."""
    grid = [[cm.tn, cm.fp], [cm.fn, cm.tp]]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(3.6, 3.2))
        ax.imshow(grid, cmap="Blues")
        ax.grid(False)
        for i in range(2):
            for j in range(2):
                ax.text(j, i, str(grid[i][j]), ha="center", va="center",
                        color="#202020", fontsize=11)
        ax.set_xticks([0, 1], ["no stroke", "stroke"])
        ax.set_yticks([0, 1], ["no stroke", "stroke"])
        ax.set_xlabel("predicted")
        ax.set_ylabel("actual")
        ax.set_title(f"{label}: confusion matrix")
        fig.tight_layout()
        _save(fig, path)


def importance_figure(ranking: list[tuple[str, float]], path: Path) -> None:
    """Coefficient magnitudes, largest at the top."""
    names = [name for name, _ in ranking][::-1]
    values = [value for _, value in ranking][::-1]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.5, 3.8))
        ax.barh(range(len(names)), values, color="#1f77b4")
        ax.set_yticks(range(len(names)), names)
        ax.set_xlabel("|coefficient| (standardized inputs)")
        ax.set_title("logistic feature importance")
        fig.tight_layout()
        _save(fig, path)


def render_all(report, directory: Path) -> None:
    """The full figure set for one comparison report."""
    curves = {
        name: (result.evaluation.roc, result.evaluation.auc)
        for name, result in report.models().items()
    }
    roc_figure(curves, directory / "roc_curves.png")
    for name in ("dense", "conv"):
        result = report.models()[name]
        history_figure(result.history, name, directory / f"history_{name}.png")
        confusion_figure(result.evaluation.confusion, name, directory / f"confusion_{name}.png")
    confusion_figure(
        report.logistic.evaluation.confusion, "logistic",
        directory / "confusion_logistic.png",
    )
    importance_figure(report.importance, directory / "feature_importance.png")
